use std::fmt;
use std::str::FromStr;

use blake2::Blake2b512;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256, Sha512};
use whirlpool::Whirlpool;

use super::AnonymizeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "SHA256")]
    Sha256,
    #[serde(rename = "SHA512")]
    Sha512,
    #[serde(rename = "WHIRLPOOL")]
    Whirlpool,
    #[serde(rename = "BLAKE2B")]
    Blake2b,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Sha256, Algorithm::Sha512, Algorithm::Whirlpool, Algorithm::Blake2b];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sha256 => "SHA256",
            Algorithm::Sha512 => "SHA512",
            Algorithm::Whirlpool => "WHIRLPOOL",
            Algorithm::Blake2b => "BLAKE2B",
        }
    }

    /// Length of the full digest in hex characters.
    pub fn hex_len(self) -> usize {
        match self {
            Algorithm::Sha256 => 64,
            Algorithm::Sha512 | Algorithm::Whirlpool | Algorithm::Blake2b => 128,
        }
    }

    fn digest(self, pepper: &[u8], value: &[u8]) -> Vec<u8> {
        fn run<D: Digest>(pepper: &[u8], value: &[u8]) -> Vec<u8> {
            let mut d = D::new();
            d.update(pepper);
            d.update(value);
            d.finalize().to_vec()
        }
        match self {
            Algorithm::Sha256 => run::<Sha256>(pepper, value),
            Algorithm::Sha512 => run::<Sha512>(pepper, value),
            Algorithm::Whirlpool => run::<Whirlpool>(pepper, value),
            Algorithm::Blake2b => run::<Blake2b512>(pepper, value),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = AnonymizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_uppercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == norm)
            .ok_or_else(|| AnonymizeError::UnsupportedAlgorithm(s.to_string()))
    }
}

pub fn check_hex_len(algorithm: Algorithm, output_hex_len: usize) -> Result<(), AnonymizeError> {
    if output_hex_len < 8 || output_hex_len > algorithm.hex_len() || output_hex_len % 2 != 0 {
        return Err(AnonymizeError::InvalidConfig(format!(
            "output_hex_len must be even and within [8, {}] for {algorithm}, got {output_hex_len}",
            algorithm.hex_len()
        )));
    }
    Ok(())
}

/// Lowercase hex of `digest(pepper || value)`, cut to `output_hex_len` chars.
pub fn hash_value(value: &str, algorithm: Algorithm, pepper: &str, output_hex_len: usize) -> Result<String, AnonymizeError> {
    if value.is_empty() {
        return Err(AnonymizeError::EmptyValue);
    }
    check_hex_len(algorithm, output_hex_len)?;
    Ok(truncated_hex(algorithm, pepper, value, output_hex_len))
}

pub(super) fn truncated_hex(algorithm: Algorithm, pepper: &str, value: &str, output_hex_len: usize) -> String {
    let mut token = hex::encode(algorithm.digest(pepper.as_bytes(), value.as_bytes()));
    token.truncate(output_hex_len);
    token
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_pepper_then_value() {
        // printf 'pepperu1' | sha256sum
        assert_eq!(
            hash_value("u1", Algorithm::Sha256, "pepper", 64).unwrap(),
            "f1a7ee0185dc7865269206963de4de3a549fbe04312328af1e810141bdb6ed32"
        );
        assert_eq!(hash_value("u1", Algorithm::Sha256, "pepper", 16).unwrap(), "f1a7ee0185dc7865");
    }

    #[test]
    fn pepper_changes_token() {
        // printf 'au1' | sha256sum ; printf 'bu1' | sha256sum
        assert_eq!(
            hash_value("u1", Algorithm::Sha256, "a", 64).unwrap(),
            "20deb89e72986384630d79c8fa6299229d64842d1d5550ab5df1c2b43fb217cf"
        );
        assert_eq!(
            hash_value("u1", Algorithm::Sha256, "b", 64).unwrap(),
            "57ff0948c5dc57e2a483f0aa9dd5c35d684c2dc31a510ba91ba913e04bea29aa"
        );
    }

    #[test]
    fn parse_names() {
        assert_eq!("sha256".parse::<Algorithm>().unwrap(), Algorithm::Sha256);
        assert_eq!("BLAKE2B".parse::<Algorithm>().unwrap(), Algorithm::Blake2b);
        assert_eq!("sha-512".parse::<Algorithm>().unwrap(), Algorithm::Sha512);
        assert!("md5".parse::<Algorithm>().is_err());
    }

    #[test]
    fn hex_len_bounds() {
        assert!(hash_value("x", Algorithm::Sha256, "p", 6).is_err());
        assert!(hash_value("x", Algorithm::Sha256, "p", 66).is_err());
        assert!(hash_value("x", Algorithm::Sha256, "p", 9).is_err());
        assert_eq!(hash_value("x", Algorithm::Sha512, "p", 128).unwrap().len(), 128);
        assert!(hash_value("", Algorithm::Sha256, "p", 64).is_err());
    }
}
