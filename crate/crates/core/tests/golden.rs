use serde::Deserialize;
use smdt_core::anonymizer::{hash_value, Algorithm};
use smdt_core::standardizer::extract_entities;
use smdt_core::store::EntityType;

#[derive(Deserialize)]
struct EntityCase {
    text: String,
    expected: Vec<Expected>,
}

#[derive(Deserialize)]
struct Expected {
    entity_type: EntityType,
    body: String,
}

#[test]
fn entity_golden_lists() {
    let cases: Vec<EntityCase> = serde_json::from_str(include_str!("data/entity_golden.json")).unwrap();
    assert_eq!(cases.len(), 30);
    for c in cases {
        let expected: Vec<(EntityType, String)> = c.expected.into_iter().map(|e| (e.entity_type, e.body)).collect();
        assert_eq!(extract_entities(&c.text), expected, "{:?}", c.text);
    }
}

#[derive(Deserialize)]
struct HashDoc {
    cases: Vec<HashCase>,
}

#[derive(Deserialize)]
struct HashCase {
    value: String,
    pepper: String,
    output_hex_len: usize,
    sha256: String,
    sha512: String,
    blake2b: String,
    whirlpool: String,
}

#[test]
fn hash_vectors_with_truncation() {
    let doc: HashDoc = serde_json::from_str(include_str!("data/hash_vectors.json")).unwrap();
    assert_eq!(doc.cases.len(), 100);
    for c in &doc.cases {
        for (algo, full) in [
            (Algorithm::Sha256, &c.sha256),
            (Algorithm::Sha512, &c.sha512),
            (Algorithm::Blake2b, &c.blake2b),
            (Algorithm::Whirlpool, &c.whirlpool),
        ] {
            assert_eq!(full.len(), algo.hex_len());
            for len in [c.output_hex_len, algo.hex_len()] {
                assert_eq!(hash_value(&c.value, algo, &c.pepper, len).unwrap(), full[..len], "{algo:?} {:?}", c.value);
            }
        }
    }
}

#[test]
fn lengths_outside_the_digest_are_rejected() {
    assert!(hash_value("x", Algorithm::Sha256, "p", 66).is_err());
    assert!(hash_value("x", Algorithm::Sha256, "p", 7).is_err());
    assert!(hash_value("x", Algorithm::Sha512, "p", 9).is_err());
    assert!(hash_value("x", Algorithm::Blake2b, "p", 128).is_ok());
}
