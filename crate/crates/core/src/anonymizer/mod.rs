//! Pseudonymized copies of a store.
//!
//! Identifiers are replaced by truncated peppered digests, so equal inputs map
//! to equal tokens across every table and joins survive the copy. Mentions and
//! emails inside free text are replaced by `<TYPE:token>` markers, where a
//! mention is hashed without its `@` and therefore matches the token of the
//! corresponding handle.

mod hashing;
mod policy;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

pub use hashing::{check_hex_len, hash_value, Algorithm};
pub use policy::{AnonymizePolicy, FieldLists};

use crate::secret::Secret;
use crate::standardizer::entity_spans;
use crate::store::{store_path, EntityType, FieldKind, Filter, Record, StoreError, StoreHandle, Table};

pub const DEFAULT_CHUNK_ROWS: usize = 5_000;
pub const DEFAULT_PEPPER_ENV: &str = "SMDT_PEPPER";

const META_STATUS: &str = "anonymize.status";

#[derive(Debug, thiserror::Error)]
pub enum AnonymizeError {
    #[error("unsupported algorithm `{0}` (expected SHA256, SHA512, WHIRLPOOL or BLAKE2B)")]
    UnsupportedAlgorithm(String),
    #[error("cannot hash an empty value")]
    EmptyValue,
    #[error("invalid anonymize config: {0}")]
    InvalidConfig(String),
    #[error("invalid anonymize policy: {0}")]
    InvalidPolicy(String),
    #[error("source store {0} does not exist")]
    SourceMissing(PathBuf),
    #[error("destination store {0} exists; confirm reinitialization or pass --force")]
    DestinationExists(PathBuf),
    #[error("token collision on `{token}`: two distinct values hash alike; use a longer output_hex_len")]
    Collision { token: String },
    #[error("{table}: copied {copied} of {source_rows} rows")]
    RowCountMismatch { table: Table, copied: u64, source_rows: u64 },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct AnonymizeConfig {
    pub src_db_name: String,
    pub dst_db_name: String,
    pub pepper: Secret,
    pub algorithm: Algorithm,
    pub output_hex_len: usize,
    pub chunk_rows: usize,
    /// Ask before clearing an existing destination. When false the
    /// destination is cleared silently.
    pub ask_reinit: bool,
}

impl AnonymizeConfig {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, pepper: Secret) -> Self {
        AnonymizeConfig {
            src_db_name: src.into(),
            dst_db_name: dst.into(),
            pepper,
            algorithm: Algorithm::Sha256,
            output_hex_len: 64,
            chunk_rows: DEFAULT_CHUNK_ROWS,
            ask_reinit: true,
        }
    }

    pub fn validate(&self) -> Result<(), AnonymizeError> {
        let bad = |m: &str| Err(AnonymizeError::InvalidConfig(m.to_string()));
        if self.pepper.is_empty() {
            return bad("pepper must be non-empty");
        }
        if self.chunk_rows == 0 {
            return bad("chunk_rows must be positive");
        }
        if same_file(&store_path(&self.src_db_name), &store_path(&self.dst_db_name)) {
            return bad("source and destination must differ");
        }
        check_hex_len(self.algorithm, self.output_hex_len)
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AnonymizeReport {
    pub copied: BTreeMap<Table, u64>,
    pub tokens_issued: u64,
    pub redactions: BTreeMap<EntityType, u64>,
}

/// Replaces entities of the policy's redaction types with `<TYPE:token>`.
/// Everything between matches is kept byte for byte.
pub fn anonymize_text<F>(body: &str, policy: &AnonymizePolicy, mut hash: F) -> (String, BTreeMap<EntityType, u64>)
where
    F: FnMut(&str) -> String,
{
    let mut counts = BTreeMap::new();
    if policy.entity_redaction_types.is_empty() {
        return (body.to_string(), counts);
    }
    let mut out = String::with_capacity(body.len());
    let mut cursor = 0;
    for span in entity_spans(body) {
        if !policy.entity_redaction_types.contains(&span.entity_type) {
            continue;
        }
        let matched = &body[span.start..span.end];
        let value = match span.entity_type {
            EntityType::Mention => &matched[1..],
            _ => matched,
        };
        out.push_str(&body[cursor..span.start]);
        out.push('<');
        out.push_str(span.entity_type.as_str());
        out.push(':');
        out.push_str(&hash(value));
        out.push('>');
        cursor = span.end;
        *counts.entry(span.entity_type).or_insert(0) += 1;
    }
    out.push_str(&body[cursor..]);
    (out, counts)
}

/// Hashes values for one run and fails on the first token collision.
struct Tokenizer<'a> {
    algorithm: Algorithm,
    pepper: &'a str,
    len: usize,
    issued: HashMap<String, String>,
    collision: Option<String>,
}

impl Tokenizer<'_> {
    fn token(&mut self, value: &str) -> String {
        let token = hashing::truncated_hex(self.algorithm, self.pepper, value, self.len);
        match self.issued.get(&token) {
            Some(prev) if prev != value => {
                if self.collision.is_none() {
                    self.collision = Some(token.clone());
                }
            }
            Some(_) => {}
            None => {
                self.issued.insert(token.clone(), value.to_string());
            }
        }
        token
    }
}

fn redact_json(value: &mut Value, policy: &AnonymizePolicy, tok: &mut Tokenizer, counts: &mut BTreeMap<EntityType, u64>) {
    match value {
        Value::String(s) => {
            let (text, c) = anonymize_text(s, policy, |v| tok.token(v));
            *s = text;
            merge_counts(counts, &c);
        }
        Value::Array(items) => items.iter_mut().for_each(|v| redact_json(v, policy, tok, counts)),
        Value::Object(map) => map.values_mut().for_each(|v| redact_json(v, policy, tok, counts)),
        _ => {}
    }
}

fn merge_counts(into: &mut BTreeMap<EntityType, u64>, from: &BTreeMap<EntityType, u64>) {
    for (t, n) in from {
        *into.entry(*t).or_insert(0) += n;
    }
}

/// A MENTION entity row's body is the mention itself. It keeps its `@` so the
/// row stays a valid mention, and gets the same token as `<MENTION:token>` in
/// the post text.
fn whole_mention(
    table: Table,
    field: &str,
    row_type: &Option<String>,
    value: &Value,
    policy: &AnonymizePolicy,
) -> Option<String> {
    if table != Table::Entities || field != "body" || row_type.as_deref() != Some(EntityType::Mention.as_str()) {
        return None;
    }
    if !policy.entity_redaction_types.contains(&EntityType::Mention) {
        return None;
    }
    value.as_str()?.strip_prefix('@').filter(|h| !h.is_empty()).map(str::to_string)
}

fn transform_row(
    table: Table,
    mut row: Map<String, Value>,
    policy: &AnonymizePolicy,
    tok: &mut Tokenizer,
    counts: &mut BTreeMap<EntityType, u64>,
) -> Map<String, Value> {
    let row_type = row.get("entity_type").and_then(Value::as_str).map(str::to_string);
    for def in table.fields() {
        let Some(value) = row.get_mut(def.name) else { continue };
        if value.is_null() {
            continue;
        }
        if policy.is_dropped(table, def.name) {
            *value = Value::Null;
        } else if policy.is_hashed(table, def.name) {
            if let Value::String(s) = value {
                if !s.is_empty() {
                    *s = tok.token(s);
                }
            }
        } else if policy.is_redacted(table, def.name) {
            if let Some(handle) = whole_mention(table, def.name, &row_type, value, policy) {
                *value = Value::String(format!("@{}", tok.token(&handle)));
                *counts.entry(EntityType::Mention).or_insert(0) += 1;
                continue;
            }
            match def.kind {
                FieldKind::Json => redact_json(value, policy, tok, counts),
                _ => {
                    if let Value::String(s) = value {
                        let (text, c) = anonymize_text(s, policy, |v| tok.token(v));
                        *s = text;
                        merge_counts(counts, &c);
                    }
                }
            }
        }
    }
    row
}

/// Copies `src` into a fresh `dst` under `policy`, `chunk_rows` rows at a
/// time. `confirm` is asked before an existing destination is cleared when
/// `ask_reinit` is set. The destination's `anonymize.status` meta key reads
/// `incomplete` until the last chunk is written.
pub fn run_anonymization(
    config: &AnonymizeConfig,
    policy: &AnonymizePolicy,
    confirm: &mut dyn FnMut(&Path) -> bool,
) -> Result<AnonymizeReport, AnonymizeError> {
    config.validate()?;
    policy.validate()?;

    let src = match StoreHandle::open_existing(&config.src_db_name) {
        Ok(s) => s,
        Err(StoreError::NotFound(p)) => return Err(AnonymizeError::SourceMissing(p)),
        Err(e) => return Err(e.into()),
    };
    let dst_path = store_path(&config.dst_db_name);
    if dst_path.exists() && config.ask_reinit && !confirm(&dst_path) {
        return Err(AnonymizeError::DestinationExists(dst_path));
    }
    let dst = StoreHandle::init(&config.dst_db_name, true)?;
    dst.meta_set(META_STATUS, "incomplete")?;
    dst.meta_set("anonymize.algorithm", config.algorithm.as_str())?;
    dst.meta_set("anonymize.output_hex_len", &config.output_hex_len.to_string())?;

    let mut tok = Tokenizer {
        algorithm: config.algorithm,
        pepper: config.pepper.expose(),
        len: config.output_hex_len,
        issued: HashMap::new(),
        collision: None,
    };
    let mut report = AnonymizeReport::default();
    let all = Filter::all();
    for table in Table::ALL {
        let source_rows = src.count(table, &all)?;
        let mut offset = 0u64;
        let mut copied = 0u64;
        loop {
            let rows = src.query_rows_paged(table, &all, Some((config.chunk_rows as u64, offset)))?;
            if rows.is_empty() {
                break;
            }
            offset += rows.len() as u64;
            let mut records = Vec::with_capacity(rows.len());
            for row in rows {
                let row = transform_row(table, row, policy, &mut tok, &mut report.redactions);
                let record = Record::from_row(table, row).map_err(|reason| StoreError::CorruptRow { table, reason })?;
                records.push(record);
            }
            if let Some(token) = tok.collision.take() {
                return Err(AnonymizeError::Collision { token });
            }
            copied += dst.insert_batch(&records)?.get(table).inserted;
        }
        if copied != source_rows {
            return Err(AnonymizeError::RowCountMismatch { table, copied, source_rows });
        }
        tracing::info!(table = table.name(), rows = copied, "anonymized table");
        report.copied.insert(table, copied);
    }
    report.tokens_issued = tok.issued.len() as u64;
    dst.meta_set(META_STATUS, "complete")?;
    Ok(report)
}

/// The destination's completion marker, if any.
pub fn anonymize_status(store: &StoreHandle) -> Result<Option<String>, StoreError> {
    store.meta_get(META_STATUS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{AccountRecord, ActionRecord, ActionType, GeoPoint, PostRecord};
    use crate::Timestamp;

    fn h(v: &str) -> String {
        hash_value(v, Algorithm::Sha256, "pepper", 64).unwrap()
    }

    #[test]
    fn mention_redaction_strips_at_sign() {
        let policy = AnonymizePolicy::default_policy();
        let (text, counts) = anonymize_text("ping @u1", &policy, h);
        assert_eq!(text, format!("ping <MENTION:{}>", h("u1")));
        assert_eq!(counts[&EntityType::Mention], 1);
    }

    #[test]
    fn urls_and_hashtags_kept_by_default() {
        let policy = AnonymizePolicy::default_policy();
        let body = "#tag https://x.io/a?b=1 mail a@b.org";
        let (text, counts) = anonymize_text(body, &policy, h);
        assert_eq!(text, format!("#tag https://x.io/a?b=1 mail <EMAIL:{}>", h("a@b.org")));
        assert_eq!(counts.len(), 1);
    }

    #[test]
    fn empty_and_plain_text_unchanged() {
        let policy = AnonymizePolicy::default_policy();
        assert_eq!(anonymize_text("", &policy, h), (String::new(), BTreeMap::new()));
        let plain = "nothing to see here, ü";
        assert_eq!(anonymize_text(plain, &policy, h).0, plain);
    }

    fn seed(dir: &tempfile::TempDir) -> String {
        let name = dir.path().join("src").to_str().unwrap().to_string();
        let s = crate::init_store(&name, true).unwrap();
        let t = Timestamp::ymd_hms(2023, 5, 14, 0, 0, 0);
        let mut a = AccountRecord::new("u1", t);
        a.user_name = Some("anna".into());
        a.location = Some(GeoPoint { lat: 60.1, lon: 24.9 });
        let mut p = PostRecord::new("p1", "u1", "hi @anna", t, t);
        p.like_count = Some(3);
        let mention = crate::standardizer::post_entities(&p);
        s.insert_batch(&[
            a.into(),
            p.into(),
            mention[0].clone(),
            PostRecord::new("p2", "u2", "rt", t, t).into(),
            ActionRecord {
                originator_account_id: Some("u2".into()),
                originator_post_id: Some("p2".into()),
                target_account_id: Some("u1".into()),
                target_post_id: Some("p1".into()),
                action_type: ActionType::Share,
                created_at: t,
                retrieved_at: t,
            }
            .into(),
        ])
        .unwrap();
        name
    }

    #[test]
    fn copy_hashes_ids_and_handles_consistently() {
        let dir = tempfile::tempdir().unwrap();
        let src = seed(&dir);
        let dst = dir.path().join("dst").to_str().unwrap().to_string();
        let cfg = AnonymizeConfig::new(&src, &dst, Secret::new("pepper"));
        let report = run_anonymization(&cfg, &AnonymizePolicy::default_policy(), &mut |_| false).unwrap();
        assert_eq!(report.copied[&Table::Posts], 2);
        assert_eq!(report.redactions[&EntityType::Mention], 2);

        let out = StoreHandle::open_existing(&dst).unwrap();
        assert_eq!(anonymize_status(&out).unwrap().as_deref(), Some("complete"));
        let accounts = out.query_rows(Table::Accounts, &Filter::all()).unwrap();
        assert_eq!(accounts[0]["account_id"], h("u1"));
        assert_eq!(accounts[0]["user_name"], h("anna"));
        assert!(accounts[0]["location"].is_null());
        let post = out.query_rows(Table::Posts, &Filter::all().eq("post_id", h("p1"))).unwrap();
        assert_eq!(post[0]["body"], format!("hi <MENTION:{}>", h("anna")));
        assert_eq!(post[0]["like_count"], 3);
        let actions = out.query_rows(Table::Actions, &Filter::all()).unwrap();
        assert_eq!(actions[0]["target_account_id"], h("u1"));
        let entities = out.query_rows(Table::Entities, &Filter::all()).unwrap();
        assert_eq!(entities[0]["body"], format!("@{}", h("anna")));
        assert_eq!(entities[0]["entity_type"], "MENTION");
    }

    #[test]
    fn existing_destination_needs_confirmation() {
        let dir = tempfile::tempdir().unwrap();
        let src = seed(&dir);
        let dst = dir.path().join("dst").to_str().unwrap().to_string();
        crate::init_store(&dst, true).unwrap();
        let cfg = AnonymizeConfig::new(&src, &dst, Secret::new("pepper"));
        let err = run_anonymization(&cfg, &AnonymizePolicy::identity(), &mut |_| false).unwrap_err();
        assert!(matches!(err, AnonymizeError::DestinationExists(_)));
        run_anonymization(&cfg, &AnonymizePolicy::identity(), &mut |_| true).unwrap();
    }

    #[test]
    fn config_checks() {
        let mut cfg = AnonymizeConfig::new("a", "a", Secret::new("p"));
        assert!(cfg.validate().is_err());
        cfg.dst_db_name = "b".into();
        cfg.validate().unwrap();
        cfg.pepper = Secret::new("");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn short_tokens_collide_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let name = dir.path().join("src").to_str().unwrap().to_string();
        let s = crate::init_store(&name, true).unwrap();
        let t = Timestamp::ymd_hms(2023, 5, 14, 0, 0, 0);
        // 8 hex chars = 32 bits; ~2^16 values give a collision with high probability.
        let records: Vec<Record> = (0..200_000).map(|i| AccountRecord::new(format!("u{i}"), t).into()).collect();
        s.insert_batch(&records).unwrap();
        let mut cfg = AnonymizeConfig::new(&name, dir.path().join("dst").to_str().unwrap(), Secret::new("pepper"));
        cfg.output_hex_len = 8;
        let err = run_anonymization(&cfg, &AnonymizePolicy::default_policy(), &mut |_| true).unwrap_err();
        assert!(matches!(err, AnonymizeError::Collision { .. }), "{err}");
        let dst = StoreHandle::open_existing(&cfg.dst_db_name).unwrap();
        assert_eq!(anonymize_status(&dst).unwrap().as_deref(), Some("incomplete"));
    }
}
