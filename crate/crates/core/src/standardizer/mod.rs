//! Adapters from platform-specific raw records to schema records, and the
//! file-driven ingestion loop that feeds them into a store.

pub mod coerce;
mod entities;
pub mod forum;
pub mod identity;
pub mod microblog;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use coerce::FieldMapping;
pub use entities::{entity_spans, extract_entities, EntitySpan};
pub use forum::ForumAdapter;
pub use identity::IdentityAdapter;
pub use microblog::MicroblogAdapter;

use crate::store::{EntityRecord, InsertReport, PostRecord, Record, StoreError, StoreHandle};
use crate::timestamp::Timestamp;

/// Records per `insert_batch` call during ingestion.
pub const INGEST_CHUNK_SIZE: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Jsonl,
    Csv,
}

/// Where a raw record came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub dataset_name: String,
    pub platform: String,
    pub file_path: String,
    /// 0-based line (JSONL) or data row (CSV) index.
    pub record_index: u64,
    pub default_retrieved_at: Option<Timestamp>,
}

impl SourceInfo {
    pub fn new(dataset_name: &str, platform: &str, file_path: &str, record_index: u64) -> Self {
        SourceInfo {
            dataset_name: dataset_name.to_string(),
            platform: platform.to_string(),
            file_path: file_path.to_string(),
            record_index,
            default_retrieved_at: None,
        }
    }

    pub fn with_default_retrieved_at(mut self, t: Timestamp) -> Self {
        self.default_retrieved_at = Some(t);
        self
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum StandardizeError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("adapter `{adapter}` produced an invalid {table} record: {reason}")]
    InvalidOutput { adapter: String, table: String, reason: String },
}

/// Maps one raw record plus provenance to schema records. Implementations
/// must be pure: no shared mutable state, same input gives same output.
pub trait Adapter: Send + Sync {
    fn name(&self) -> &str;
    fn accepted_format(&self) -> SourceFormat;
    fn standardize(&self, raw: &Value, info: &SourceInfo) -> Result<Vec<Record>, StandardizeError>;
}

type MapFn = dyn Fn(&Value, &SourceInfo) -> Result<Vec<Record>, StandardizeError> + Send + Sync;

/// Adapter built from a plain mapping function.
pub struct FnAdapter {
    name: String,
    format: SourceFormat,
    mapping: Box<MapFn>,
}

impl FnAdapter {
    pub fn new<F>(name: impl Into<String>, format: SourceFormat, mapping: F) -> Self
    where
        F: Fn(&Value, &SourceInfo) -> Result<Vec<Record>, StandardizeError> + Send + Sync + 'static,
    {
        FnAdapter { name: name.into(), format, mapping: Box::new(mapping) }
    }
}

impl Adapter for FnAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn accepted_format(&self) -> SourceFormat {
        self.format
    }

    fn standardize(&self, raw: &Value, info: &SourceInfo) -> Result<Vec<Record>, StandardizeError> {
        (self.mapping)(raw, info)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum RegistryError {
    #[error("adapter `{0}` is already registered")]
    DuplicateName(String),
}

/// Name-keyed adapter lookup.
#[derive(Clone, Default)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Arc<dyn Adapter>>,
}

impl AdapterRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `generic_microblog`, `generic_forum` and `identity`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register_adapter(Arc::new(MicroblogAdapter::default())).expect("fresh registry");
        r.register_adapter(Arc::new(ForumAdapter::default())).expect("fresh registry");
        r.register_adapter(Arc::new(IdentityAdapter)).expect("fresh registry");
        r
    }

    pub fn register_adapter(&mut self, adapter: Arc<dyn Adapter>) -> Result<(), RegistryError> {
        let name = adapter.name().to_string();
        if self.adapters.contains_key(&name) {
            return Err(RegistryError::DuplicateName(name));
        }
        self.adapters.insert(name, adapter);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Adapter>> {
        self.adapters.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.adapters.keys().map(String::as_str).collect()
    }
}

impl std::fmt::Debug for AdapterRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdapterRegistry").field("adapters", &self.names()).finish()
    }
}

/// Entity rows for every entity found in a post body. Entities inherit the
/// post's `created_at` and `retrieved_at`.
pub fn post_entities(post: &PostRecord) -> Vec<Record> {
    extract_entities(&post.body)
        .into_iter()
        .map(|(entity_type, body)| {
            Record::Entity(EntityRecord {
                post_id: post.post_id.clone(),
                body,
                entity_type,
                created_at: post.created_at,
                retrieved_at: post.retrieved_at,
            })
        })
        .collect()
}

/// Runs an adapter and checks every produced record against the store
/// invariants, attributing violations to the adapter.
pub fn standardize_record(adapter: &dyn Adapter, raw: &Value, info: &SourceInfo) -> Result<Vec<Record>, StandardizeError> {
    let records = adapter.standardize(raw, info)?;
    for record in &records {
        record.validate().map_err(|reason| StandardizeError::InvalidOutput {
            adapter: adapter.name().to_string(),
            table: record.table().to_string(),
            reason,
        })?;
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestFailure {
    pub file_path: String,
    pub record_index: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files_processed: u64,
    pub records_read: u64,
    pub records_failed: u64,
    pub failures: Vec<IngestFailure>,
    pub insert_report: InsertReport,
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("unknown adapter `{0}`")]
    UnknownAdapter(String),
    #[error("{file_path}:{record_index}: {reason}")]
    Record { file_path: String, record_index: u64, reason: String },
    #[error("cannot read `{path}`: {source}")]
    Unreadable { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub fail_fast: bool,
    /// Used for records without their own retrieval time. When `None` the
    /// wall clock is read once at the start of the run.
    pub default_retrieved_at: Option<Timestamp>,
    pub dataset_name: Option<String>,
    pub chunk_size: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { fail_fast: false, default_retrieved_at: None, dataset_name: None, chunk_size: INGEST_CHUNK_SIZE }
    }
}

struct Ingestion<'a> {
    store: &'a StoreHandle,
    adapter: Arc<dyn Adapter>,
    opts: &'a IngestOptions,
    retrieved_at: Timestamp,
    dataset: String,
    pending: Vec<Record>,
    report: IngestReport,
}

impl Ingestion<'_> {
    fn fail(&mut self, file_path: &str, record_index: u64, reason: String) -> Result<(), IngestError> {
        tracing::debug!(file = file_path, index = record_index, %reason, "record failed");
        if self.opts.fail_fast {
            return Err(IngestError::Record { file_path: file_path.to_string(), record_index, reason });
        }
        self.report.records_failed += 1;
        self.report.failures.push(IngestFailure { file_path: file_path.to_string(), record_index, reason });
        Ok(())
    }

    fn handle(&mut self, file_path: &str, record_index: u64, raw: Result<Value, String>) -> Result<(), IngestError> {
        self.report.records_read += 1;
        let raw = match raw {
            Ok(raw) => raw,
            Err(reason) => return self.fail(file_path, record_index, reason),
        };
        let info = SourceInfo {
            dataset_name: self.dataset.clone(),
            platform: self.adapter.name().to_string(),
            file_path: file_path.to_string(),
            record_index,
            default_retrieved_at: Some(self.retrieved_at),
        };
        match standardize_record(self.adapter.as_ref(), &raw, &info) {
            Ok(records) => {
                self.pending.extend(records);
                if self.pending.len() >= self.opts.chunk_size.max(1) {
                    self.flush()?;
                }
                Ok(())
            }
            Err(e) => self.fail(file_path, record_index, e.to_string()),
        }
    }

    fn flush(&mut self) -> Result<(), IngestError> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let batch = std::mem::take(&mut self.pending);
        let r = self.store.insert_batch(&batch)?;
        self.report.insert_report.merge(&r);
        Ok(())
    }

    fn jsonl(&mut self, path: &Path, file: File) -> Result<(), IngestError> {
        let display = path.display().to_string();
        let mut reader = BufReader::new(file);
        let mut buf = Vec::new();
        let mut index: u64 = 0;
        loop {
            buf.clear();
            let n = reader
                .read_until(b'\n', &mut buf)
                .map_err(|source| IngestError::Unreadable { path: path.to_path_buf(), source })?;
            if n == 0 {
                break;
            }
            let line_index = index;
            index += 1;
            let parsed = match std::str::from_utf8(&buf) {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => serde_json::from_str::<Value>(line).map_err(|e| format!("invalid JSON: {e}")),
                Err(e) => Err(format!("invalid UTF-8: {e}")),
            };
            self.handle(&display, line_index, parsed)?;
        }
        Ok(())
    }

    fn csv(&mut self, path: &Path, file: File) -> Result<(), IngestError> {
        let display = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
        let headers = match reader.headers() {
            Ok(h) => h.clone(),
            Err(e) => return self.fail(&display, 0, format!("unreadable CSV header: {e}")),
        };
        for (i, row) in reader.records().enumerate() {
            let parsed = row.map_err(|e| format!("invalid CSV row: {e}")).map(|row| {
                let obj = headers
                    .iter()
                    .zip(row.iter())
                    .map(|(h, v)| (h.to_string(), Value::String(v.to_string())))
                    .collect();
                Value::Object(obj)
            });
            self.handle(&display, i as u64, parsed)?;
        }
        Ok(())
    }
}

/// Standardizes every record of every file and inserts the results in
/// chunks of `opts.chunk_size`. Bad records are reported with provenance
/// and skipped unless `fail_fast` is set.
pub fn run_ingestion(
    store: &StoreHandle,
    registry: &AdapterRegistry,
    adapter_name: &str,
    sources: &[PathBuf],
    opts: &IngestOptions,
) -> Result<IngestReport, IngestError> {
    let adapter = registry.get(adapter_name).ok_or_else(|| IngestError::UnknownAdapter(adapter_name.to_string()))?;
    let mut run = Ingestion {
        store,
        adapter,
        opts,
        retrieved_at: opts.default_retrieved_at.unwrap_or_else(Timestamp::now),
        dataset: opts.dataset_name.clone().unwrap_or_else(|| store.name().to_string()),
        pending: Vec::new(),
        report: IngestReport {
            files_processed: 0,
            records_read: 0,
            records_failed: 0,
            failures: Vec::new(),
            insert_report: InsertReport::default(),
        },
    };
    for path in sources {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(source) => {
                if opts.fail_fast {
                    return Err(IngestError::Unreadable { path: path.clone(), source });
                }
                let display = path.display().to_string();
                run.report.failures.push(IngestFailure {
                    file_path: display,
                    record_index: 0,
                    reason: format!("unreadable file: {source}"),
                });
                continue;
            }
        };
        match run.adapter.accepted_format() {
            SourceFormat::Jsonl => run.jsonl(path, file)?,
            SourceFormat::Csv => run.csv(path, file)?,
        }
        run.report.files_processed += 1;
    }
    run.flush()?;
    Ok(run.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Table;
    use std::io::Write;

    #[test]
    fn builtins_are_registered() {
        let r = AdapterRegistry::with_builtins();
        assert_eq!(r.names(), ["generic_forum", "generic_microblog", "identity"]);
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut r = AdapterRegistry::empty();
        r.register_adapter(Arc::new(MicroblogAdapter::default())).unwrap();
        assert!(r.get("generic_microblog").is_some());
        let err = r.register_adapter(Arc::new(MicroblogAdapter::default())).unwrap_err();
        assert!(matches!(err, RegistryError::DuplicateName(n) if n == "generic_microblog"));
    }

    #[test]
    fn invalid_adapter_output_names_the_adapter() {
        let bad = FnAdapter::new("broken", SourceFormat::Jsonl, |_, _| {
            let t = Timestamp::ymd_hms(2023, 1, 1, 0, 0, 0);
            Ok(vec![PostRecord::new("", "u", "", t, t).into()])
        });
        let info = SourceInfo::new("d", "p", "f", 0);
        match standardize_record(&bad, &Value::Null, &info) {
            Err(StandardizeError::InvalidOutput { adapter, .. }) => assert_eq!(adapter, "broken"),
            other => panic!("{other:?}"),
        }
    }

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn ingestion_reports_failures_with_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let store = crate::init_store(dir.path().join("s").to_str().unwrap(), true).unwrap();
        let file = write(
            &dir,
            "m.jsonl",
            concat!(
                r#"{"id":"1","user":{"id":"u1"},"text":"a #x","ts":"2023-05-14T01:00:00Z"}"#,
                "\n{not json\n",
                r#"{"id":"2","user":{"id":"u1"},"text":"b","ts":"2023-05-14T02:00:00Z"}"#,
                "\n"
            ),
        );
        let opts = IngestOptions {
            default_retrieved_at: Some(Timestamp::ymd_hms(2023, 5, 16, 0, 0, 0)),
            ..Default::default()
        };
        let reg = AdapterRegistry::with_builtins();
        let report = run_ingestion(&store, &reg, "generic_microblog", &[file.clone()], &opts).unwrap();
        assert_eq!(report.records_read, 3);
        assert_eq!(report.records_failed, 1);
        assert_eq!(report.failures[0].record_index, 1);
        assert_eq!(report.failures[0].file_path, file.display().to_string());
        assert_eq!(report.insert_report.get(Table::Posts).inserted, 2);
        assert_eq!(report.insert_report.get(Table::Accounts).inserted, 1);
        assert_eq!(report.insert_report.get(Table::Accounts).deduplicated, 1);

        let fast = IngestOptions { fail_fast: true, ..opts };
        assert!(matches!(
            run_ingestion(&store, &reg, "generic_microblog", &[file], &fast),
            Err(IngestError::Record { record_index: 1, .. })
        ));
    }

    #[test]
    fn empty_file_and_unknown_adapter() {
        let dir = tempfile::tempdir().unwrap();
        let store = crate::init_store(dir.path().join("s").to_str().unwrap(), true).unwrap();
        let file = write(&dir, "empty.jsonl", "");
        let reg = AdapterRegistry::with_builtins();
        let report = run_ingestion(&store, &reg, "identity", &[file.clone()], &IngestOptions::default()).unwrap();
        assert_eq!(report.records_read, 0);
        assert!(report.failures.is_empty());
        assert!(matches!(
            run_ingestion(&store, &reg, "nope", &[file], &IngestOptions::default()),
            Err(IngestError::UnknownAdapter(_))
        ));
    }

    #[test]
    fn unreadable_file_is_a_failure_unless_fail_fast() {
        let dir = tempfile::tempdir().unwrap();
        let store = crate::init_store(dir.path().join("s").to_str().unwrap(), true).unwrap();
        let reg = AdapterRegistry::with_builtins();
        let missing = dir.path().join("missing.jsonl");
        let report = run_ingestion(&store, &reg, "identity", &[missing.clone()], &IngestOptions::default()).unwrap();
        assert_eq!(report.files_processed, 0);
        assert_eq!(report.failures.len(), 1);
        let fast = IngestOptions { fail_fast: true, ..Default::default() };
        assert!(matches!(run_ingestion(&store, &reg, "identity", &[missing], &fast), Err(IngestError::Unreadable { .. })));
    }

    #[test]
    fn csv_rows_go_through_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let store = crate::init_store(dir.path().join("s").to_str().unwrap(), true).unwrap();
        let file = write(
            &dir,
            "t.csv",
            "tweet_id,author,content,posted,likes\n1,u1,hello @bob,2023-05-14T01:00:00Z,\"1,200\"\n2,u2,,2023-05-14T02:00:00Z,\n",
        );
        let mapping = FieldMapping::new()
            .with("id", "tweet_id")
            .with("user.id", "author")
            .with("text", "content")
            .with("ts", "posted")
            .with("like_count", "likes");
        let mut reg = AdapterRegistry::with_builtins();
        reg.register_adapter(Arc::new(MicroblogAdapter::with_mapping("tweets_csv", SourceFormat::Csv, mapping)))
            .unwrap();
        let opts = IngestOptions { default_retrieved_at: Some(Timestamp::ymd_hms(2023, 5, 16, 0, 0, 0)), ..Default::default() };
        let report = run_ingestion(&store, &reg, "tweets_csv", &[file], &opts).unwrap();
        assert_eq!(report.records_failed, 0, "{:?}", report.failures);
        assert_eq!(report.insert_report.get(Table::Posts).inserted, 2);
        assert_eq!(report.insert_report.get(Table::Entities).inserted, 1);
        let posts = store.query(Table::Posts, &crate::Filter::all().eq("post_id", "1")).unwrap();
        match &posts[0] {
            Record::Post(p) => assert_eq!(p.like_count, Some(1200)),
            other => panic!("{other:?}"),
        }
    }
}
