//! `identity`: re-ingests this crate's own JSON-Lines exports.
//!
//! Export lines carry every field of their table (absent values as null), so
//! the table is recognized from the key set.

use serde_json::Value;

use super::{Adapter, SourceFormat, SourceInfo, StandardizeError};
use crate::store::{Record, Table};

pub const NAME: &str = "identity";

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityAdapter;

pub fn detect_table(row: &serde_json::Map<String, Value>) -> Option<Table> {
    let has = |k: &str| row.contains_key(k);
    let table = if has("model_id") && has("account_id") {
        Table::AccountEnrichments
    } else if has("model_id") && has("post_id") {
        Table::PostEnrichments
    } else if has("action_type") {
        Table::Actions
    } else if has("entity_type") {
        Table::Entities
    } else if has("community_type") {
        Table::Communities
    } else if has("post_id") && has("account_id") {
        Table::Posts
    } else if has("account_id") {
        Table::Accounts
    } else {
        return None;
    };
    Some(table)
}

impl Adapter for IdentityAdapter {
    fn name(&self) -> &str {
        NAME
    }

    fn accepted_format(&self) -> SourceFormat {
        SourceFormat::Jsonl
    }

    fn standardize(&self, raw: &Value, _info: &SourceInfo) -> Result<Vec<Record>, StandardizeError> {
        let row = raw.as_object().ok_or_else(|| StandardizeError::Malformed("record is not an object".into()))?;
        let table = detect_table(row)
            .ok_or_else(|| StandardizeError::Malformed("key set matches no schema table".into()))?;
        let record = Record::from_row(table, row.clone()).map_err(StandardizeError::Malformed)?;
        Ok(vec![record])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{AccountRecord, PostRecord};
    use crate::Timestamp;

    #[test]
    fn round_trips_rows_of_each_shape() {
        let t = Timestamp::ymd_hms(2023, 5, 14, 1, 0, 0);
        let info = SourceInfo::new("d", "p", "f.jsonl", 0);
        for record in [
            Record::from(AccountRecord::new("u1", t)),
            Record::from(PostRecord::new("p1", "u1", "body", t, t)),
        ] {
            let row = Value::Object(record.to_row());
            let out = IdentityAdapter.standardize(&row, &info).unwrap();
            assert_eq!(out, vec![record]);
        }
    }

    #[test]
    fn unknown_shape_is_malformed() {
        let info = SourceInfo::new("d", "p", "f.jsonl", 0);
        let raw = serde_json::json!({"tweet": 1});
        assert!(IdentityAdapter.standardize(&raw, &info).is_err());
    }
}
