//! `generic_microblog`: flat Twitter-like records.
//!
//! Canonical raw keys (override any of them with a [`FieldMapping`]):
//!
//! | key | maps to |
//! |-----|---------|
//! | `id`, `text`, `ts` | post id, body, created_at (required) |
//! | `retrieved_at` | snapshot time, else the run default |
//! | `user.id` | author account (required) |
//! | `user.name`, `user.display_name`, `user.bio`, `user.location` | account fields |
//! | `user.followers`, `user.friends`, `user.posts`, `user.verified`, `user.avatar`, `user.created_at` | account fields |
//! | `conversation_id`, `location`, `like_count`, `dislike_count`, `view_count`, `share_count`, `comment_count`, `quote_count`, `bookmark_count` | post fields |
//! | `repost_of` / `repost_of_user` | SHARE action |
//! | `quote_of` / `quote_of_user` | QUOTE action |
//! | `reply_to` / `reply_to_user` | REPLY action |
//! | `media_keys` | MEDIA_KEY entities (array of strings) |

use serde_json::Value;

use super::coerce::{self, FieldMapping};
use super::{post_entities, Adapter, SourceFormat, SourceInfo, StandardizeError};
use crate::store::{AccountRecord, ActionRecord, ActionType, EntityRecord, EntityType, PostRecord, Record};

pub const NAME: &str = "generic_microblog";

#[derive(Debug, Clone)]
pub struct MicroblogAdapter {
    name: String,
    format: SourceFormat,
    mapping: FieldMapping,
}

impl Default for MicroblogAdapter {
    fn default() -> Self {
        MicroblogAdapter { name: NAME.to_string(), format: SourceFormat::Jsonl, mapping: FieldMapping::new() }
    }
}

impl MicroblogAdapter {
    pub fn with_mapping(name: impl Into<String>, format: SourceFormat, mapping: FieldMapping) -> Self {
        MicroblogAdapter { name: name.into(), format, mapping }
    }
}

type Res<T> = Result<T, StandardizeError>;

fn malformed(field: &str, reason: String) -> StandardizeError {
    StandardizeError::Malformed(format!("{field}: {reason}"))
}

pub(super) struct Fields<'a> {
    pub mapping: &'a FieldMapping,
    pub raw: &'a Value,
}

impl Fields<'_> {
    pub fn id(&self, key: &str) -> Res<Option<String>> {
        self.mapping.get(self.raw, key).map(|v| coerce::as_id(v).map_err(|e| malformed(key, e))).transpose()
    }

    pub fn required_id(&self, key: &str) -> Res<String> {
        self.id(key)?.filter(|s| !s.is_empty()).ok_or_else(|| malformed(key, "missing".into()))
    }

    pub fn text(&self, key: &str) -> Res<Option<String>> {
        self.mapping.get(self.raw, key).map(|v| coerce::as_text(v).map_err(|e| malformed(key, e))).transpose()
    }

    pub fn count(&self, key: &str) -> Res<Option<u64>> {
        self.mapping.get(self.raw, key).map(|v| coerce::as_count(v).map_err(|e| malformed(key, e))).transpose()
    }

    pub fn signed(&self, key: &str) -> Res<Option<i64>> {
        self.mapping
            .get(self.raw, key)
            .map(|v| coerce::as_signed_count(v).map_err(|e| malformed(key, e)))
            .transpose()
    }

    pub fn boolean(&self, key: &str) -> Res<Option<bool>> {
        self.mapping.get(self.raw, key).map(|v| coerce::as_bool(v).map_err(|e| malformed(key, e))).transpose()
    }

    pub fn time(&self, key: &str) -> Res<Option<crate::Timestamp>> {
        self.mapping.get(self.raw, key).map(|v| coerce::as_timestamp(v).map_err(|e| malformed(key, e))).transpose()
    }

    pub fn geo(&self, key: &str) -> Res<Option<crate::store::GeoPoint>> {
        coerce::geo(self.mapping, self.raw, key).map_err(|e| malformed(key, e))
    }

    pub fn retrieved_at(&self, info: &SourceInfo) -> Res<crate::Timestamp> {
        match self.time("retrieved_at")? {
            Some(t) => Ok(t),
            None => info
                .default_retrieved_at
                .ok_or_else(|| malformed("retrieved_at", "absent and no run default".into())),
        }
    }
}

impl Adapter for MicroblogAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn accepted_format(&self) -> SourceFormat {
        self.format
    }

    fn standardize(&self, raw: &Value, info: &SourceInfo) -> Res<Vec<Record>> {
        if !raw.is_object() {
            return Err(StandardizeError::Malformed("record is not an object".into()));
        }
        let f = Fields { mapping: &self.mapping, raw };
        let post_id = f.required_id("id")?;
        let account_id = f.required_id("user.id")?;
        if !raw_has(raw, &self.mapping, "text") {
            return Err(malformed("text", "missing".into()));
        }
        let body = f.text("text")?.unwrap_or_default();
        let created_at = f.time("ts")?.ok_or_else(|| malformed("ts", "missing".into()))?;
        let retrieved_at = f.retrieved_at(info)?;

        let mut out = Vec::new();

        let mut account = AccountRecord::new(account_id.clone(), retrieved_at);
        account.user_name = f.text("user.name")?;
        account.profile_name = f.text("user.display_name")?;
        account.bio = f.text("user.bio")?;
        account.location = f.geo("user.location")?;
        account.follower_count = f.count("user.followers")?;
        account.friend_count = f.count("user.friends")?;
        account.post_count = f.count("user.posts")?;
        account.is_verified = f.boolean("user.verified")?;
        account.profile_image_url = f.text("user.avatar")?;
        account.created_at = f.time("user.created_at")?;
        out.push(Record::Account(account));

        let mut post = PostRecord::new(post_id.clone(), account_id.clone(), body, created_at, retrieved_at);
        post.conversation_id = f.id("conversation_id")?;
        post.location = f.geo("location")?;
        post.like_count = f.count("like_count")?;
        post.dislike_count = f.count("dislike_count")?;
        post.view_count = f.count("view_count")?;
        post.share_count = f.count("share_count")?;
        post.comment_count = f.count("comment_count")?;
        post.quote_count = f.count("quote_count")?;
        post.bookmark_count = f.count("bookmark_count")?;

        let mut entities = post_entities(&post);
        if let Some(keys) = f.mapping.get(raw, "media_keys") {
            let keys = match keys {
                Value::Array(items) => items.iter().map(coerce::as_id).collect::<Result<Vec<_>, _>>(),
                Value::String(s) => Ok(s.split(['|', ',']).map(|k| k.trim().to_string()).filter(|k| !k.is_empty()).collect()),
                other => Err(format!("expected a list, got {other}")),
            }
            .map_err(|e| malformed("media_keys", e))?;
            for key in keys.into_iter().filter(|k| !k.is_empty()) {
                entities.push(Record::Entity(EntityRecord {
                    post_id: post_id.clone(),
                    body: key,
                    entity_type: EntityType::MediaKey,
                    created_at,
                    retrieved_at,
                }));
            }
        }
        out.push(Record::Post(post));
        out.extend(entities);

        for (post_key, user_key, action_type) in [
            ("repost_of", "repost_of_user", ActionType::Share),
            ("quote_of", "quote_of_user", ActionType::Quote),
            ("reply_to", "reply_to_user", ActionType::Reply),
        ] {
            let target_post_id = f.id(post_key)?.filter(|s| !s.is_empty());
            let target_account_id = f.id(user_key)?.filter(|s| !s.is_empty());
            if let Some(target_post_id) = target_post_id {
                out.push(Record::Action(ActionRecord {
                    originator_account_id: Some(account_id.clone()),
                    originator_post_id: Some(post_id.clone()),
                    target_account_id,
                    target_post_id: Some(target_post_id),
                    action_type,
                    created_at,
                    retrieved_at,
                }));
            } else if target_account_id.is_some() {
                return Err(malformed(user_key, format!("given without {post_key}")));
            }
        }
        Ok(out)
    }
}

/// True when the source key exists and is non-null, even as an empty string.
pub(super) fn raw_has(raw: &Value, mapping: &FieldMapping, canonical: &str) -> bool {
    let path = mapping.0.get(canonical).map(String::as_str).unwrap_or(canonical);
    coerce::lookup(raw, path).map(|v| !v.is_null()).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Timestamp;
    use serde_json::json;

    fn info() -> SourceInfo {
        SourceInfo::new("fixture", "microblog", "tweets.jsonl", 0)
            .with_default_retrieved_at(Timestamp::ymd_hms(2023, 5, 16, 0, 0, 0))
    }

    #[test]
    fn basic_post_yields_account_post_and_hashtag() {
        let raw = json!({"id": "1", "user": {"id": "u1", "name": "alice"}, "text": "hi #x", "ts": "2023-05-14T10:00:00Z"});
        let out = MicroblogAdapter::default().standardize(&raw, &info()).unwrap();
        assert_eq!(out.len(), 3);
        match &out[0] {
            Record::Account(a) => {
                assert_eq!(a.account_id, "u1");
                assert_eq!(a.user_name.as_deref(), Some("alice"));
            }
            other => panic!("{other:?}"),
        }
        match &out[1] {
            Record::Post(p) => {
                assert_eq!(p.post_id, "1");
                assert_eq!(p.body, "hi #x");
                assert_eq!(p.retrieved_at, Timestamp::ymd_hms(2023, 5, 16, 0, 0, 0));
            }
            other => panic!("{other:?}"),
        }
        match &out[2] {
            Record::Entity(e) => {
                assert_eq!((e.post_id.as_str(), e.body.as_str(), e.entity_type), ("1", "#x", EntityType::Hashtag));
                assert_eq!(e.created_at, Timestamp::ymd_hms(2023, 5, 14, 10, 0, 0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn repost_reference_yields_share_action() {
        let raw = json!({"id": "1", "user": {"id": "u1"}, "text": "RT", "ts": 1684058400, "repost_of": "9"});
        let out = MicroblogAdapter::default().standardize(&raw, &info()).unwrap();
        let actions: Vec<_> = out
            .iter()
            .filter_map(|r| match r {
                Record::Action(a) => Some(a),
                _ => None,
            })
            .collect();
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].originator_post_id.as_deref(), Some("1"));
        assert_eq!(actions[0].target_post_id.as_deref(), Some("9"));
        assert_eq!(actions[0].action_type, ActionType::Share);
    }

    #[test]
    fn missing_required_keys_are_malformed() {
        let a = MicroblogAdapter::default();
        for raw in [
            json!({"user": {"id": "u1"}, "text": "", "ts": 0}),
            json!({"id": "1", "text": "", "ts": 0}),
            json!({"id": "1", "user": {"id": "u1"}, "ts": 0}),
            json!({"id": "1", "user": {"id": "u1"}, "text": ""}),
            json!([1, 2]),
        ] {
            assert!(matches!(a.standardize(&raw, &info()), Err(StandardizeError::Malformed(_))), "{raw}");
        }
    }

    #[test]
    fn empty_body_is_allowed() {
        let raw = json!({"id": "1", "user": {"id": "u1"}, "text": "", "ts": 0});
        assert!(MicroblogAdapter::default().standardize(&raw, &info()).is_ok());
    }

    #[test]
    fn display_counts_normalize() {
        let raw = json!({"id": "1", "user": {"id": "u1", "followers": "1,234"}, "text": "x", "ts": 0, "like_count": "3.4K"});
        let out = MicroblogAdapter::default().standardize(&raw, &info()).unwrap();
        match (&out[0], &out[1]) {
            (Record::Account(a), Record::Post(p)) => {
                assert_eq!(a.follower_count, Some(1234));
                assert_eq!(p.like_count, Some(3400));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn media_keys_become_entities() {
        let raw = json!({"id": "1", "user": {"id": "u1"}, "text": "pic", "ts": 0, "media_keys": ["3_1", "3_2"]});
        let out = MicroblogAdapter::default().standardize(&raw, &info()).unwrap();
        let media: Vec<_> = out
            .iter()
            .filter_map(|r| match r {
                Record::Entity(e) if e.entity_type == EntityType::MediaKey => Some(e.body.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(media, ["3_1", "3_2"]);
    }
}
