//! Table and field metadata for the unified schema.
//!
//! Every table is described by an ordered list of fields. The ordering is the
//! canonical column order used for storage, export and reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Communities,
    Accounts,
    Posts,
    Actions,
    Entities,
    AccountEnrichments,
    PostEnrichments,
}

impl Table {
    pub const ALL: [Table; 7] = [
        Table::Communities,
        Table::Accounts,
        Table::Posts,
        Table::Actions,
        Table::Entities,
        Table::AccountEnrichments,
        Table::PostEnrichments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Table::Communities => "communities",
            Table::Accounts => "accounts",
            Table::Posts => "posts",
            Table::Actions => "actions",
            Table::Entities => "entities",
            Table::AccountEnrichments => "account_enrichments",
            Table::PostEnrichments => "post_enrichments",
        }
    }

    pub fn fields(self) -> &'static [FieldDef] {
        match self {
            Table::Communities => COMMUNITY_FIELDS,
            Table::Accounts => ACCOUNT_FIELDS,
            Table::Posts => POST_FIELDS,
            Table::Actions => ACTION_FIELDS,
            Table::Entities => ENTITY_FIELDS,
            Table::AccountEnrichments => ACCOUNT_ENRICHMENT_FIELDS,
            Table::PostEnrichments => POST_ENRICHMENT_FIELDS,
        }
    }

    /// Fields forming the deduplication key, which doubles as the ordering key.
    pub fn key_fields(self) -> &'static [&'static str] {
        match self {
            Table::Communities => &["community_id", "retrieved_at"],
            Table::Accounts => &["account_id", "retrieved_at"],
            Table::Posts => &["post_id", "retrieved_at"],
            Table::Actions => &[
                "originator_account_id",
                "originator_post_id",
                "target_account_id",
                "target_post_id",
                "action_type",
                "created_at",
            ],
            Table::Entities => &["post_id", "entity_type", "body", "created_at"],
            Table::AccountEnrichments => &["account_id", "model_id", "created_at"],
            Table::PostEnrichments => &["post_id", "model_id", "created_at"],
        }
    }

    pub fn field(self, name: &str) -> Result<&'static FieldDef, StoreError> {
        self.fields()
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| StoreError::UnknownField {
                table: self.name().to_string(),
                field: name.to_string(),
            })
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Table {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Table::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| StoreError::UnknownTable(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Text,
    /// Nonnegative integer.
    Count,
    Bool,
    /// Latitude/longitude pair, stored as two REAL columns.
    Geo,
    Time,
    /// Closed vocabulary stored as its upper-case name.
    Enum,
    /// JSON object stored as compact text.
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldDef {
    pub name: &'static str,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldDef {
    /// SQL column names backing this field.
    pub fn columns(&self) -> Vec<String> {
        match self.kind {
            FieldKind::Geo => vec![format!("{}_lat", self.name), format!("{}_lon", self.name)],
            _ => vec![self.name.to_string()],
        }
    }

    pub fn sql_type(&self) -> &'static str {
        match self.kind {
            FieldKind::Text | FieldKind::Enum | FieldKind::Json => "TEXT",
            FieldKind::Count | FieldKind::Bool | FieldKind::Time => "INTEGER",
            FieldKind::Geo => "REAL",
        }
    }
}

const fn req(name: &'static str, kind: FieldKind) -> FieldDef {
    FieldDef { name, kind, required: true }
}

const fn opt(name: &'static str, kind: FieldKind) -> FieldDef {
    FieldDef { name, kind, required: false }
}

use FieldKind::*;

const COMMUNITY_FIELDS: &[FieldDef] = &[
    req("community_id", Text),
    req("community_type", Enum),
    opt("community_username", Text),
    opt("community_name", Text),
    opt("bio", Text),
    opt("is_public", Bool),
    opt("member_count", Count),
    opt("post_count", Count),
    opt("profile_image_url", Text),
    opt("owner_account_id", Text),
    opt("created_at", Time),
    req("retrieved_at", Time),
];

const ACCOUNT_FIELDS: &[FieldDef] = &[
    req("account_id", Text),
    opt("user_name", Text),
    opt("profile_name", Text),
    opt("bio", Text),
    opt("location", Geo),
    opt("post_count", Count),
    opt("friend_count", Count),
    opt("follower_count", Count),
    opt("is_verified", Bool),
    opt("profile_image_url", Text),
    opt("created_at", Time),
    req("retrieved_at", Time),
];

const POST_FIELDS: &[FieldDef] = &[
    req("post_id", Text),
    req("account_id", Text),
    opt("conversation_id", Text),
    opt("community_id", Text),
    req("body", Text),
    opt("location", Geo),
    opt("like_count", Count),
    opt("dislike_count", Count),
    opt("view_count", Count),
    opt("share_count", Count),
    opt("comment_count", Count),
    opt("quote_count", Count),
    opt("bookmark_count", Count),
    req("created_at", Time),
    req("retrieved_at", Time),
];

const ACTION_FIELDS: &[FieldDef] = &[
    opt("originator_account_id", Text),
    opt("originator_post_id", Text),
    opt("target_account_id", Text),
    opt("target_post_id", Text),
    req("action_type", Enum),
    req("created_at", Time),
    req("retrieved_at", Time),
];

const ENTITY_FIELDS: &[FieldDef] = &[
    req("post_id", Text),
    req("body", Text),
    req("entity_type", Enum),
    req("created_at", Time),
    req("retrieved_at", Time),
];

const ACCOUNT_ENRICHMENT_FIELDS: &[FieldDef] = &[
    req("account_id", Text),
    req("model_id", Text),
    req("body", Json),
    req("created_at", Time),
    req("retrieved_at", Time),
];

const POST_ENRICHMENT_FIELDS: &[FieldDef] = &[
    req("post_id", Text),
    req("model_id", Text),
    req("body", Json),
    req("created_at", Time),
    req("retrieved_at", Time),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_fields_are_declared_fields() {
        for table in Table::ALL {
            for key in table.key_fields() {
                assert!(table.field(key).is_ok(), "{table}.{key}");
            }
        }
    }

    #[test]
    fn table_names_round_trip() {
        for table in Table::ALL {
            assert_eq!(table.name().parse::<Table>().unwrap(), table);
        }
        assert!("tweets".parse::<Table>().is_err());
    }
}
