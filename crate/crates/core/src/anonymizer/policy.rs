use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AnonymizeError;
use crate::store::{EntityType, FieldKind, Table};

pub type FieldLists = BTreeMap<Table, Vec<String>>;

/// Which fields are hashed, rewritten or nulled when copying a store.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnonymizePolicy {
    pub hashed_fields: FieldLists,
    pub redacted_text_fields: FieldLists,
    pub entity_redaction_types: Vec<EntityType>,
    pub dropped_fields: FieldLists,
}

/// Id fields that refer to the same kind of object across tables. Either all
/// of a family is hashed or none of it is, otherwise joins break.
const ID_FAMILIES: &[(&str, &[(Table, &str)])] = &[
    (
        "account",
        &[
            (Table::Communities, "owner_account_id"),
            (Table::Accounts, "account_id"),
            (Table::Posts, "account_id"),
            (Table::Actions, "originator_account_id"),
            (Table::Actions, "target_account_id"),
            (Table::AccountEnrichments, "account_id"),
        ],
    ),
    (
        "post",
        &[
            (Table::Posts, "post_id"),
            (Table::Posts, "conversation_id"),
            (Table::Actions, "originator_post_id"),
            (Table::Actions, "target_post_id"),
            (Table::Entities, "post_id"),
            (Table::PostEnrichments, "post_id"),
        ],
    ),
    ("community", &[(Table::Communities, "community_id"), (Table::Posts, "community_id")]),
];

fn lists(entries: &[(Table, &[&str])]) -> FieldLists {
    entries
        .iter()
        .map(|(t, fields)| (*t, fields.iter().map(|f| f.to_string()).collect()))
        .collect()
}

impl AnonymizePolicy {
    /// Hashes every identifier (except `model_id`) plus handles and display
    /// names, redacts mentions and emails in free text, nulls avatars and
    /// locations. URLs and engagement counts are kept.
    pub fn default_policy() -> Self {
        AnonymizePolicy {
            hashed_fields: lists(&[
                (Table::Communities, &["community_id", "community_username", "owner_account_id"]),
                (Table::Accounts, &["account_id", "user_name", "profile_name"]),
                (Table::Posts, &["post_id", "account_id", "conversation_id", "community_id"]),
                (
                    Table::Actions,
                    &["originator_account_id", "originator_post_id", "target_account_id", "target_post_id"],
                ),
                (Table::Entities, &["post_id"]),
                (Table::AccountEnrichments, &["account_id"]),
                (Table::PostEnrichments, &["post_id"]),
            ]),
            redacted_text_fields: lists(&[
                (Table::Communities, &["bio"]),
                (Table::Accounts, &["bio"]),
                (Table::Posts, &["body"]),
                (Table::Entities, &["body"]),
                (Table::AccountEnrichments, &["body"]),
                (Table::PostEnrichments, &["body"]),
            ]),
            entity_redaction_types: vec![EntityType::Mention, EntityType::Email],
            dropped_fields: lists(&[
                (Table::Communities, &["profile_image_url"]),
                (Table::Accounts, &["profile_image_url", "location"]),
                (Table::Posts, &["location"]),
            ]),
        }
    }

    /// Copies everything verbatim.
    pub fn identity() -> Self {
        AnonymizePolicy::default()
    }

    pub fn is_hashed(&self, table: Table, field: &str) -> bool {
        contains(&self.hashed_fields, table, field)
    }

    pub fn is_redacted(&self, table: Table, field: &str) -> bool {
        contains(&self.redacted_text_fields, table, field)
    }

    pub fn is_dropped(&self, table: Table, field: &str) -> bool {
        contains(&self.dropped_fields, table, field)
    }

    pub fn validate(&self) -> Result<(), AnonymizeError> {
        let bad = |msg: String| Err(AnonymizeError::InvalidPolicy(msg));
        for (table, fields) in &self.hashed_fields {
            for f in fields {
                let def = table.field(f).map_err(|e| AnonymizeError::InvalidPolicy(e.to_string()))?;
                if def.kind != FieldKind::Text {
                    return bad(format!("{table}.{f}: only text fields can be hashed"));
                }
            }
        }
        for (table, fields) in &self.redacted_text_fields {
            for f in fields {
                let def = table.field(f).map_err(|e| AnonymizeError::InvalidPolicy(e.to_string()))?;
                if !matches!(def.kind, FieldKind::Text | FieldKind::Json) {
                    return bad(format!("{table}.{f}: only text or JSON fields can be redacted"));
                }
                if self.is_hashed(*table, f) {
                    return bad(format!("{table}.{f}: listed as both hashed and redacted"));
                }
            }
        }
        for (table, fields) in &self.dropped_fields {
            for f in fields {
                let def = table.field(f).map_err(|e| AnonymizeError::InvalidPolicy(e.to_string()))?;
                if def.required {
                    return bad(format!("{table}.{f}: required fields cannot be dropped"));
                }
            }
        }
        for t in &self.entity_redaction_types {
            if !matches!(t, EntityType::Mention | EntityType::Email | EntityType::Url) {
                return bad(format!("entity type {t} cannot be redacted"));
            }
        }
        for (family, members) in ID_FAMILIES {
            let hashed: Vec<bool> = members.iter().map(|(t, f)| self.is_hashed(*t, f)).collect();
            if hashed.iter().any(|h| *h) && !hashed.iter().all(|h| *h) {
                let listing: Vec<String> = members
                    .iter()
                    .zip(&hashed)
                    .map(|((t, f), h)| format!("{t}.{f}={}", if *h { "hashed" } else { "kept" }))
                    .collect();
                return bad(format!("{family} ids must be hashed everywhere or nowhere: {}", listing.join(", ")));
            }
        }
        Ok(())
    }
}

fn contains(lists: &FieldLists, table: Table, field: &str) -> bool {
    lists.get(&table).is_some_and(|v| v.iter().any(|f| f == field))
}
