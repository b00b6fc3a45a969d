//! Record types of the unified schema.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::schema::Table;
use crate::timestamp::Timestamp;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let upper = s.trim().to_ascii_uppercase();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str() == upper)
                    .ok_or_else(|| format!("unknown {} `{}`", stringify!($name), s))
            }
        }
    };
}

string_enum!(CommunityType {
    Channel => "CHANNEL",
    Group => "GROUP",
});

string_enum!(ActionType {
    Like => "LIKE",
    Upvote => "UPVOTE",
    Downvote => "DOWNVOTE",
    Share => "SHARE",
    Quote => "QUOTE",
    Reply => "REPLY",
    Mention => "MENTION",
    Follow => "FOLLOW",
    Block => "BLOCK",
    Link => "LINK",
});

string_enum!(EntityType {
    Hashtag => "HASHTAG",
    Mention => "MENTION",
    Url => "URL",
    Email => "EMAIL",
    MediaKey => "MEDIA_KEY",
});

string_enum!(TargetKind {
    Account => "ACCOUNT",
    Post => "POST",
});

impl TargetKind {
    pub fn table(self) -> Table {
        match self {
            TargetKind::Account => Table::AccountEnrichments,
            TargetKind::Post => Table::PostEnrichments,
        }
    }

    pub fn source_table(self) -> Table {
        match self {
            TargetKind::Account => Table::Accounts,
            TargetKind::Post => Table::Posts,
        }
    }

    pub fn id_field(self) -> &'static str {
        match self {
            TargetKind::Account => "account_id",
            TargetKind::Post => "post_id",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    fn check(&self) -> Result<(), String> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("location ({}, {}) out of range", self.lat, self.lon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunityRecord {
    pub community_id: String,
    pub community_type: CommunityType,
    pub community_username: Option<String>,
    pub community_name: Option<String>,
    pub bio: Option<String>,
    pub is_public: Option<bool>,
    pub member_count: Option<u64>,
    pub post_count: Option<u64>,
    pub profile_image_url: Option<String>,
    pub owner_account_id: Option<String>,
    pub created_at: Option<Timestamp>,
    pub retrieved_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountRecord {
    pub account_id: String,
    pub user_name: Option<String>,
    pub profile_name: Option<String>,
    pub bio: Option<String>,
    pub location: Option<GeoPoint>,
    pub post_count: Option<u64>,
    pub friend_count: Option<u64>,
    pub follower_count: Option<u64>,
    pub is_verified: Option<bool>,
    pub profile_image_url: Option<String>,
    pub created_at: Option<Timestamp>,
    pub retrieved_at: Timestamp,
}

impl AccountRecord {
    pub fn new(account_id: impl Into<String>, retrieved_at: Timestamp) -> Self {
        AccountRecord {
            account_id: account_id.into(),
            user_name: None,
            profile_name: None,
            bio: None,
            location: None,
            post_count: None,
            friend_count: None,
            follower_count: None,
            is_verified: None,
            profile_image_url: None,
            created_at: None,
            retrieved_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRecord {
    pub post_id: String,
    pub account_id: String,
    pub conversation_id: Option<String>,
    pub community_id: Option<String>,
    pub body: String,
    pub location: Option<GeoPoint>,
    pub like_count: Option<u64>,
    pub dislike_count: Option<u64>,
    pub view_count: Option<u64>,
    pub share_count: Option<u64>,
    pub comment_count: Option<u64>,
    pub quote_count: Option<u64>,
    pub bookmark_count: Option<u64>,
    pub created_at: Timestamp,
    pub retrieved_at: Timestamp,
}

impl PostRecord {
    pub fn new(
        post_id: impl Into<String>,
        account_id: impl Into<String>,
        body: impl Into<String>,
        created_at: Timestamp,
        retrieved_at: Timestamp,
    ) -> Self {
        PostRecord {
            post_id: post_id.into(),
            account_id: account_id.into(),
            conversation_id: None,
            community_id: None,
            body: body.into(),
            location: None,
            like_count: None,
            dislike_count: None,
            view_count: None,
            share_count: None,
            comment_count: None,
            quote_count: None,
            bookmark_count: None,
            created_at,
            retrieved_at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub originator_account_id: Option<String>,
    pub originator_post_id: Option<String>,
    pub target_account_id: Option<String>,
    pub target_post_id: Option<String>,
    pub action_type: ActionType,
    pub created_at: Timestamp,
    pub retrieved_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityRecord {
    pub post_id: String,
    pub body: String,
    pub entity_type: EntityType,
    pub created_at: Timestamp,
    pub retrieved_at: Timestamp,
}

/// Model output attached to an account or a post. Stored in
/// `account_enrichments` or `post_enrichments` depending on `target_kind`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichmentRecord {
    pub target_kind: TargetKind,
    pub target_id: String,
    pub model_id: String,
    pub body: Map<String, Value>,
    pub created_at: Timestamp,
    pub retrieved_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Community(CommunityRecord),
    Account(AccountRecord),
    Post(PostRecord),
    Action(ActionRecord),
    Entity(EntityRecord),
    Enrichment(EnrichmentRecord),
}

fn non_empty(field: &str, value: &str) -> Result<(), String> {
    if value.is_empty() {
        Err(format!("{field} must be non-empty"))
    } else {
        Ok(())
    }
}

fn non_empty_opt(field: &str, value: &Option<String>) -> Result<(), String> {
    match value {
        Some(v) => non_empty(field, v),
        None => Ok(()),
    }
}

impl Record {
    pub fn table(&self) -> Table {
        match self {
            Record::Community(_) => Table::Communities,
            Record::Account(_) => Table::Accounts,
            Record::Post(_) => Table::Posts,
            Record::Action(_) => Table::Actions,
            Record::Entity(_) => Table::Entities,
            Record::Enrichment(e) => e.target_kind.table(),
        }
    }

    /// Checks the per-type invariants the store enforces on insertion.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Record::Community(c) => {
                non_empty("community_id", &c.community_id)?;
                non_empty_opt("owner_account_id", &c.owner_account_id)?;
                if let Some(created) = c.created_at {
                    if created > c.retrieved_at {
                        return Err("created_at is after retrieved_at".into());
                    }
                }
                Ok(())
            }
            Record::Account(a) => {
                non_empty("account_id", &a.account_id)?;
                if let Some(loc) = &a.location {
                    loc.check()?;
                }
                Ok(())
            }
            Record::Post(p) => {
                non_empty("post_id", &p.post_id)?;
                non_empty("account_id", &p.account_id)?;
                non_empty_opt("conversation_id", &p.conversation_id)?;
                non_empty_opt("community_id", &p.community_id)?;
                if let Some(loc) = &p.location {
                    loc.check()?;
                }
                if p.created_at > p.retrieved_at {
                    return Err("created_at is after retrieved_at".into());
                }
                Ok(())
            }
            Record::Action(a) => {
                non_empty_opt("originator_account_id", &a.originator_account_id)?;
                non_empty_opt("originator_post_id", &a.originator_post_id)?;
                non_empty_opt("target_account_id", &a.target_account_id)?;
                non_empty_opt("target_post_id", &a.target_post_id)?;
                let has_originator = a.originator_account_id.is_some() || a.originator_post_id.is_some();
                let has_target = a.target_account_id.is_some() || a.target_post_id.is_some();
                if !has_originator || !has_target {
                    return Err("action needs an originator and a target".into());
                }
                match a.action_type {
                    ActionType::Follow | ActionType::Block => {
                        if a.originator_account_id.is_none() || a.target_account_id.is_none() {
                            return Err(format!(
                                "{} requires originator_account_id and target_account_id",
                                a.action_type
                            ));
                        }
                    }
                    ActionType::Share | ActionType::Quote | ActionType::Reply => {
                        if a.target_post_id.is_none() {
                            return Err(format!("{} requires target_post_id", a.action_type));
                        }
                    }
                    _ => {}
                }
                Ok(())
            }
            Record::Entity(e) => {
                non_empty("post_id", &e.post_id)?;
                non_empty("body", &e.body)?;
                let shape_ok = match e.entity_type {
                    EntityType::Hashtag => e.body.starts_with('#') && e.body.len() > 1,
                    EntityType::Mention => e.body.starts_with('@') && e.body.len() > 1,
                    _ => true,
                };
                if !shape_ok {
                    return Err(format!("{} body `{}` has the wrong shape", e.entity_type, e.body));
                }
                Ok(())
            }
            Record::Enrichment(e) => {
                non_empty("target_id", &e.target_id)?;
                non_empty("model_id", &e.model_id)
            }
        }
    }

    /// Row form: Table 1 field names, absent optionals as null.
    pub fn to_row(&self) -> Map<String, Value> {
        let value = match self {
            Record::Community(r) => serde_json::to_value(r),
            Record::Account(r) => serde_json::to_value(r),
            Record::Post(r) => serde_json::to_value(r),
            Record::Action(r) => serde_json::to_value(r),
            Record::Entity(r) => serde_json::to_value(r),
            Record::Enrichment(e) => {
                let mut row = Map::new();
                row.insert(e.target_kind.id_field().into(), Value::String(e.target_id.clone()));
                row.insert("model_id".into(), Value::String(e.model_id.clone()));
                row.insert("body".into(), Value::Object(e.body.clone()));
                row.insert("created_at".into(), Value::String(e.created_at.to_iso()));
                row.insert("retrieved_at".into(), Value::String(e.retrieved_at.to_iso()));
                return row;
            }
        };
        match value.expect("record serialization is infallible") {
            Value::Object(map) => map,
            _ => unreachable!("records serialize to objects"),
        }
    }

    pub fn from_row(table: Table, row: Map<String, Value>) -> Result<Record, String> {
        let value = Value::Object(row);
        let err = |e: serde_json::Error| e.to_string();
        Ok(match table {
            Table::Communities => Record::Community(serde_json::from_value(value).map_err(err)?),
            Table::Accounts => Record::Account(serde_json::from_value(value).map_err(err)?),
            Table::Posts => Record::Post(serde_json::from_value(value).map_err(err)?),
            Table::Actions => Record::Action(serde_json::from_value(value).map_err(err)?),
            Table::Entities => Record::Entity(serde_json::from_value(value).map_err(err)?),
            Table::AccountEnrichments | Table::PostEnrichments => {
                let kind = if table == Table::AccountEnrichments {
                    TargetKind::Account
                } else {
                    TargetKind::Post
                };
                let row: EnrichmentRow = serde_json::from_value(value).map_err(err)?;
                let target_id = match kind {
                    TargetKind::Account => row.account_id,
                    TargetKind::Post => row.post_id,
                }
                .ok_or_else(|| format!("missing {}", kind.id_field()))?;
                Record::Enrichment(EnrichmentRecord {
                    target_kind: kind,
                    target_id,
                    model_id: row.model_id,
                    body: row.body,
                    created_at: row.created_at,
                    retrieved_at: row.retrieved_at,
                })
            }
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnrichmentRow {
    account_id: Option<String>,
    post_id: Option<String>,
    model_id: String,
    body: Map<String, Value>,
    created_at: Timestamp,
    retrieved_at: Timestamp,
}

macro_rules! record_from {
    ($($ty:ident => $variant:ident),+) => {
        $(impl From<$ty> for Record {
            fn from(r: $ty) -> Self {
                Record::$variant(r)
            }
        })+
    };
}

record_from!(
    CommunityRecord => Community,
    AccountRecord => Account,
    PostRecord => Post,
    ActionRecord => Action,
    EntityRecord => Entity,
    EnrichmentRecord => Enrichment
);
