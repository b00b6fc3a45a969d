/// Parses `90m`, `1h`, `1d` or `30s` into a positive duration.
pub fn parse(s: &str) -> Result<chrono::Duration, String> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (digits, unit) = s.split_at(split);
    let n: i64 = digits.parse().map_err(|_| format!("`{s}`: expected a number followed by s, m, h or d"))?;
    let d = match unit {
        "s" => chrono::Duration::seconds(n),
        "m" => chrono::Duration::minutes(n),
        "h" => chrono::Duration::hours(n),
        "d" => chrono::Duration::days(n),
        _ => return Err(format!("`{s}`: unit must be s, m, h or d")),
    };
    if n == 0 {
        return Err(format!("`{s}`: duration must be positive"));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::parse;

    #[test]
    fn suffixes() {
        assert_eq!(parse("90m").unwrap(), chrono::Duration::minutes(90));
        assert_eq!(parse("1h").unwrap(), chrono::Duration::hours(1));
        assert_eq!(parse("1d").unwrap(), chrono::Duration::hours(24));
        assert_eq!(parse("45s").unwrap(), chrono::Duration::seconds(45));
    }

    #[test]
    fn rejects() {
        for bad in ["", "h", "1", "1w", "0h", "-1h", "1.5h"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
