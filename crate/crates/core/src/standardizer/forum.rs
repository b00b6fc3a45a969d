//! `generic_forum`: Reddit-like submissions and comments.
//!
//! Canonical raw keys: `kind` (`submission` | `comment`), `id`, `author_id`,
//! `author`, `author_created`, `title`, `selftext`, `body`, `score`, `ups`,
//! `num_comments`, `created_utc`, `retrieved_on`, `link_id`, `parent_id`,
//! `parent_author_id`, and a `subforum` object with `id`, `name`, `title`,
//! `description`, `subscribers`, `public`, `icon`, `created`.

use serde_json::Value;

use super::coerce::FieldMapping;
use super::microblog::{raw_has, Fields};
use super::{post_entities, Adapter, SourceFormat, SourceInfo, StandardizeError};
use crate::store::{AccountRecord, ActionRecord, ActionType, CommunityRecord, CommunityType, PostRecord, Record};

pub const NAME: &str = "generic_forum";

#[derive(Debug, Clone)]
pub struct ForumAdapter {
    name: String,
    format: SourceFormat,
    mapping: FieldMapping,
}

impl Default for ForumAdapter {
    fn default() -> Self {
        ForumAdapter { name: NAME.to_string(), format: SourceFormat::Jsonl, mapping: FieldMapping::new() }
    }
}

impl ForumAdapter {
    pub fn with_mapping(name: impl Into<String>, format: SourceFormat, mapping: FieldMapping) -> Self {
        ForumAdapter { name: name.into(), format, mapping }
    }
}

fn malformed(reason: impl Into<String>) -> StandardizeError {
    StandardizeError::Malformed(reason.into())
}

impl Adapter for ForumAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn accepted_format(&self) -> SourceFormat {
        self.format
    }

    fn standardize(&self, raw: &Value, info: &SourceInfo) -> Result<Vec<Record>, StandardizeError> {
        if !raw.is_object() {
            return Err(malformed("record is not an object"));
        }
        let f = Fields { mapping: &self.mapping, raw };
        let post_id = f.required_id("id")?;
        let account_id = f.required_id("author_id")?;
        let created_at = f.time("created_utc")?.ok_or_else(|| malformed("created_utc: missing"))?;
        let retrieved_at = match f.time("retrieved_on")? {
            Some(t) => t,
            None => f.retrieved_at(info)?,
        };

        let is_comment = match f.text("kind")?.as_deref() {
            Some("comment") => true,
            Some("submission") => false,
            Some(other) => return Err(malformed(format!("kind: unknown `{other}`"))),
            None => !raw_has(raw, &self.mapping, "title"),
        };

        let body = if is_comment {
            if !raw_has(raw, &self.mapping, "body") {
                return Err(malformed("body: missing"));
            }
            f.text("body")?.unwrap_or_default()
        } else {
            let title = f.text("title")?.ok_or_else(|| malformed("title: missing"))?;
            match f.text("selftext")? {
                Some(text) => format!("{title}\n\n{text}"),
                None => title,
            }
        };

        let mut out = Vec::new();

        let community_id = f.id("subforum.id")?;
        if let Some(community_id) = &community_id {
            out.push(Record::Community(CommunityRecord {
                community_id: community_id.clone(),
                community_type: CommunityType::Group,
                community_username: f.text("subforum.name")?,
                community_name: f.text("subforum.title")?,
                bio: f.text("subforum.description")?,
                is_public: f.boolean("subforum.public")?,
                member_count: f.count("subforum.subscribers")?,
                post_count: None,
                profile_image_url: f.text("subforum.icon")?,
                owner_account_id: None,
                created_at: f.time("subforum.created")?,
                retrieved_at,
            }));
        }

        let mut account = AccountRecord::new(account_id.clone(), retrieved_at);
        account.user_name = f.text("author")?;
        account.created_at = f.time("author_created")?;
        out.push(Record::Account(account));

        let mut post = PostRecord::new(post_id.clone(), account_id.clone(), body, created_at, retrieved_at);
        post.community_id = community_id;
        post.conversation_id = if is_comment { f.id("link_id")? } else { Some(post_id.clone()) };
        // Net score can be negative; only upvote counts are likes.
        post.like_count = match f.count("ups")? {
            Some(ups) => Some(ups),
            None => f.signed("score")?.and_then(|s| u64::try_from(s).ok()),
        };
        post.comment_count = f.count("num_comments")?;
        let entities = post_entities(&post);
        out.push(Record::Post(post));
        out.extend(entities);

        if is_comment {
            if let Some(parent) = f.id("parent_id")?.filter(|p| !p.is_empty()) {
                out.push(Record::Action(ActionRecord {
                    originator_account_id: Some(account_id),
                    originator_post_id: Some(post_id),
                    target_account_id: f.id("parent_author_id")?,
                    target_post_id: Some(parent),
                    action_type: ActionType::Reply,
                    created_at,
                    retrieved_at,
                }));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Table;
    use crate::Timestamp;
    use serde_json::json;

    fn info() -> SourceInfo {
        SourceInfo::new("fixture", "forum", "forum.jsonl", 0)
    }

    fn submission() -> Value {
        json!({
            "kind": "submission", "id": "s1", "author_id": "a1", "author": "bob",
            "title": "Hello", "selftext": "world #tag", "score": 5, "num_comments": 2,
            "created_utc": 1684065600, "retrieved_on": 1684238400,
            "subforum": {"id": "c1", "name": "r_finland", "title": "Finland", "subscribers": 120, "public": true}
        })
    }

    #[test]
    fn submission_includes_group_community() {
        let out = ForumAdapter::default().standardize(&submission(), &info()).unwrap();
        let tables: Vec<Table> = out.iter().map(Record::table).collect();
        assert_eq!(tables, [Table::Communities, Table::Accounts, Table::Posts, Table::Entities]);
        match &out[0] {
            Record::Community(c) => {
                assert_eq!(c.community_type, CommunityType::Group);
                assert_eq!(c.member_count, Some(120));
                assert_eq!(c.retrieved_at, Timestamp::ymd_hms(2023, 5, 16, 12, 0, 0));
            }
            other => panic!("{other:?}"),
        }
        match &out[2] {
            Record::Post(p) => {
                assert_eq!(p.body, "Hello\n\nworld #tag");
                assert_eq!(p.like_count, Some(5));
                assert_eq!(p.conversation_id.as_deref(), Some("s1"));
                assert_eq!(p.community_id.as_deref(), Some("c1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comment_with_parent_yields_reply() {
        let raw = json!({
            "kind": "comment", "id": "k1", "author_id": "a2", "body": "agree", "score": -3,
            "created_utc": 1684065700, "retrieved_on": 1684238400, "link_id": "s1",
            "parent_id": "s1", "parent_author_id": "a1", "subforum": {"id": "c1"}
        });
        let out = ForumAdapter::default().standardize(&raw, &info()).unwrap();
        let post = out.iter().find_map(|r| match r {
            Record::Post(p) => Some(p),
            _ => None,
        });
        assert_eq!(post.unwrap().like_count, None);
        let reply = out.iter().find_map(|r| match r {
            Record::Action(a) => Some(a),
            _ => None,
        });
        let reply = reply.unwrap();
        assert_eq!(reply.action_type, ActionType::Reply);
        assert_eq!(reply.target_post_id.as_deref(), Some("s1"));
        assert_eq!(reply.target_account_id.as_deref(), Some("a1"));
    }

    #[test]
    fn missing_author_is_malformed() {
        let mut raw = submission();
        raw.as_object_mut().unwrap().remove("author_id");
        assert!(ForumAdapter::default().standardize(&raw, &info()).is_err());
    }
}
