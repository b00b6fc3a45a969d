//! Lenient conversions from raw JSON / CSV values into schema field values.
//!
//! Raw exports disagree on representation: ids arrive as numbers or strings,
//! counts as `"1,234"` or `"3.4K"`, timestamps as ISO text, epoch numbers or
//! the classic Twitter format. CSV cells are always strings and an empty cell
//! means "absent".

use std::collections::BTreeMap;

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::store::GeoPoint;
use crate::timestamp::Timestamp;

/// Overrides from canonical raw keys to source keys, e.g. `text -> full_text`.
/// Keys and values may be dotted paths into nested objects.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldMapping(pub BTreeMap<String, String>);

impl FieldMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, canonical: &str, source: &str) -> Self {
        self.0.insert(canonical.to_string(), source.to_string());
        self
    }

    /// Looks up a canonical key, honoring overrides. Nulls and empty strings
    /// count as absent.
    pub fn get<'a>(&self, raw: &'a Value, canonical: &str) -> Option<&'a Value> {
        let path = self.0.get(canonical).map(String::as_str).unwrap_or(canonical);
        lookup(raw, path).filter(|v| !is_blank(v))
    }
}

fn is_blank(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::String(s) => s.trim().is_empty(),
        _ => false,
    }
}

/// Exact key first (flat CSV headers such as `user.id`), then dotted traversal.
pub fn lookup<'a>(raw: &'a Value, path: &str) -> Option<&'a Value> {
    if let Some(v) = raw.get(path) {
        return Some(v);
    }
    let mut cur = raw;
    for part in path.split('.') {
        cur = cur.get(part)?;
    }
    Some(cur)
}

pub fn as_id(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.trim().to_string()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(format!("expected an id, got {other}")),
    }
}

pub fn as_text(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        other => Err(format!("expected text, got {other}")),
    }
}

pub fn as_bool(v: &Value) -> Result<bool, String> {
    match v {
        Value::Bool(b) => Ok(*b),
        Value::Number(n) => Ok(n.as_f64().unwrap_or(0.0) != 0.0),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "t" | "yes" | "y" | "1" => Ok(true),
            "false" | "f" | "no" | "n" | "0" => Ok(false),
            other => Err(format!("expected a boolean, got `{other}`")),
        },
        other => Err(format!("expected a boolean, got {other}")),
    }
}

/// Signed count, for sources whose scores may go negative.
pub fn as_signed_count(v: &Value) -> Result<i64, String> {
    let f = match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| format!("bad number {n}"))?,
        Value::String(s) => parse_count_text(s)?,
        other => return Err(format!("expected a count, got {other}")),
    };
    if f.fract() != 0.0 || !f.is_finite() {
        return Err(format!("count {f} is not an integer"));
    }
    Ok(f as i64)
}

/// Nonnegative count; accepts `"1,234"`, `"3.4K"`, `"2M"`, `12.0`.
pub fn as_count(v: &Value) -> Result<u64, String> {
    let n = as_signed_count(v)?;
    u64::try_from(n).map_err(|_| format!("count {n} is negative"))
}

fn parse_count_text(s: &str) -> Result<f64, String> {
    let cleaned: String = s.trim().chars().filter(|c| !matches!(c, ',' | '_' | ' ')).collect();
    let (digits, multiplier) = match cleaned.chars().last() {
        Some('k' | 'K') => (&cleaned[..cleaned.len() - 1], 1e3),
        Some('m' | 'M') => (&cleaned[..cleaned.len() - 1], 1e6),
        Some('b' | 'B') => (&cleaned[..cleaned.len() - 1], 1e9),
        _ => (cleaned.as_str(), 1.0),
    };
    let base: f64 = digits.parse().map_err(|_| format!("unparseable count `{s}`"))?;
    let value = base * multiplier;
    if multiplier > 1.0 {
        // "3.4K" is a display rounding; the nearest integer is all we can recover.
        Ok(value.round())
    } else {
        Ok(value)
    }
}

/// ISO-8601, Twitter's `Wed Oct 10 20:19:24 +0000 2018`, or epoch seconds
/// (milliseconds when the magnitude says so).
pub fn as_timestamp(v: &Value) -> Result<Timestamp, String> {
    match v {
        Value::Number(n) => {
            let f = n.as_f64().ok_or_else(|| format!("bad epoch {n}"))?;
            epoch(f)
        }
        Value::String(s) => {
            let t = s.trim();
            if let Ok(ts) = Timestamp::parse_iso(t) {
                return Ok(ts);
            }
            if let Ok(dt) = DateTime::parse_from_str(t, "%a %b %d %H:%M:%S %z %Y") {
                return Ok(Timestamp::from_datetime(dt.to_utc()));
            }
            if let Ok(f) = t.parse::<f64>() {
                return epoch(f);
            }
            Err(format!("unparseable timestamp `{s}`"))
        }
        other => Err(format!("expected a timestamp, got {other}")),
    }
}

fn epoch(f: f64) -> Result<Timestamp, String> {
    if !f.is_finite() {
        return Err("non-finite epoch".into());
    }
    let micros = if f.abs() >= 1e11 { f * 1e3 } else { f * 1e6 };
    Ok(Timestamp::from_micros(micros.round() as i64))
}

/// `{lat, lon}` object, `[lat, lon]` array, or sibling `key.lat` / `key.lon`.
pub fn geo(mapping: &FieldMapping, raw: &Value, key: &str) -> Result<Option<GeoPoint>, String> {
    let num = |v: &Value| -> Result<f64, String> {
        match v {
            Value::Number(n) => n.as_f64().ok_or_else(|| "bad coordinate".to_string()),
            Value::String(s) => s.trim().parse().map_err(|_| format!("bad coordinate `{s}`")),
            other => Err(format!("bad coordinate {other}")),
        }
    };
    if let Some(v) = mapping.get(raw, key) {
        return match v {
            Value::Object(o) => {
                let lat = o.get("lat").ok_or("location without lat")?;
                let lon = o.get("lon").or_else(|| o.get("lng")).ok_or("location without lon")?;
                Ok(Some(GeoPoint { lat: num(lat)?, lon: num(lon)? }))
            }
            Value::Array(a) if a.len() == 2 => Ok(Some(GeoPoint { lat: num(&a[0])?, lon: num(&a[1])? })),
            other => Err(format!("unrecognized location {other}")),
        };
    }
    let lat = mapping.get(raw, &format!("{key}.lat"));
    let lon = mapping.get(raw, &format!("{key}.lon"));
    match (lat, lon) {
        (Some(lat), Some(lon)) => Ok(Some(GeoPoint { lat: num(lat)?, lon: num(lon)? })),
        (None, None) => Ok(None),
        _ => Err(format!("{key} has only one coordinate")),
    }
}
