//! Relational persistence for the unified schema.
//!
//! A store is a single SQLite file holding the seven schema tables. Each table
//! carries a unique index over its deduplication key; inserts use
//! `INSERT OR IGNORE`, so the first record with a given key wins and later
//! ones are counted as deduplicated.

mod filter;
mod records;
mod schema;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rusqlite::types::Value as SqlValue;
use rusqlite::{params_from_iter, Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use filter::{Clause, Filter};
pub use records::{
    AccountRecord, ActionRecord, ActionType, CommunityRecord, CommunityType, EnrichmentRecord,
    EntityRecord, EntityType, GeoPoint, PostRecord, Record, TargetKind,
};
pub use schema::{FieldDef, FieldKind, Table};

use crate::timestamp::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store `{0}` already exists")]
    StoreExists(PathBuf),
    #[error("store `{0}` does not exist")]
    NotFound(PathBuf),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown field `{field}` in table `{table}`")]
    UnknownField { table: String, field: String },
    #[error("invalid filter on `{field}`: {reason}")]
    InvalidFilter { field: String, reason: String },
    #[error("malformed range: start {start} is after end {end}")]
    MalformedRange { start: Timestamp, end: Timestamp },
    #[error("record {index} rejected for table `{table}`: {reason}")]
    InvariantViolation { table: Table, index: usize, reason: String },
    #[error("corrupt row in `{table}`: {reason}")]
    CorruptRow { table: Table, reason: String },
    #[error(transparent)]
    Sqlite(#[from] rusqlite::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCounts {
    pub received: u64,
    pub inserted: u64,
    pub deduplicated: u64,
}

/// Per-table insertion accounting. Always lists all seven tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InsertReport {
    pub tables: BTreeMap<Table, TableCounts>,
}

impl Default for InsertReport {
    fn default() -> Self {
        InsertReport { tables: Table::ALL.into_iter().map(|t| (t, TableCounts::default())).collect() }
    }
}

impl InsertReport {
    pub fn get(&self, table: Table) -> TableCounts {
        self.tables.get(&table).copied().unwrap_or_default()
    }

    pub fn merge(&mut self, other: &InsertReport) {
        for (table, counts) in &other.tables {
            let entry = self.tables.entry(*table).or_default();
            entry.received += counts.received;
            entry.inserted += counts.inserted;
            entry.deduplicated += counts.deduplicated;
        }
    }

    pub fn total_inserted(&self) -> u64 {
        self.tables.values().map(|c| c.inserted).sum()
    }
}

/// Resolves a store name to its file. Bare names get a `.db` suffix.
pub fn store_path(name: &str) -> PathBuf {
    let path = PathBuf::from(name);
    if path.extension().is_none() {
        path.with_extension("db")
    } else {
        path
    }
}

/// Opens or creates a store; `overwrite` discards any existing contents.
pub fn init_store(name: &str, overwrite: bool) -> Result<StoreHandle, StoreError> {
    StoreHandle::init(name, overwrite)
}

/// Shared handle to one store. Clones refer to the same store; writes
/// serialize on an internal lock, reads use their own connections.
#[derive(Clone)]
pub struct StoreHandle {
    inner: Arc<Inner>,
}

struct Inner {
    name: String,
    path: PathBuf,
    writer: Mutex<Connection>,
}

impl std::fmt::Debug for StoreHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StoreHandle").field("path", &self.inner.path).finish()
    }
}

fn remove_store_files(path: &Path) -> std::io::Result<()> {
    for suffix in ["", "-wal", "-shm", "-journal"] {
        let mut p = path.as_os_str().to_owned();
        p.push(suffix);
        match std::fs::remove_file(PathBuf::from(p)) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

impl StoreHandle {
    pub fn init(name: &str, overwrite: bool) -> Result<Self, StoreError> {
        let path = store_path(name);
        if overwrite {
            remove_store_files(&path)?;
        }
        Self::open_at(path)
    }

    /// Creates a fresh store, failing with [`StoreError::StoreExists`] if the
    /// file is already present.
    pub fn create_new(name: &str) -> Result<Self, StoreError> {
        let path = store_path(name);
        if path.exists() {
            return Err(StoreError::StoreExists(path));
        }
        Self::open_at(path)
    }

    pub fn open_existing(name: &str) -> Result<Self, StoreError> {
        let path = store_path(name);
        if !path.exists() {
            return Err(StoreError::NotFound(path));
        }
        Self::open_at(path)
    }

    pub fn exists(name: &str) -> bool {
        store_path(name).exists()
    }

    /// Removes the store's files. Fails if other handles are still alive.
    pub fn destroy(name: &str) -> Result<(), StoreError> {
        remove_store_files(&store_path(name))?;
        Ok(())
    }

    fn open_at(path: PathBuf) -> Result<Self, StoreError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let conn = Connection::open(&path)?;
        conn.busy_timeout(std::time::Duration::from_secs(30))?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        create_schema(&conn)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Ok(StoreHandle { inner: Arc::new(Inner { name, path, writer: Mutex::new(conn) }) })
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn path(&self) -> &Path {
        &self.inner.path
    }

    pub(crate) fn reader(&self) -> Result<Connection, StoreError> {
        let conn = Connection::open_with_flags(
            &self.inner.path,
            OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
        )?;
        conn.busy_timeout(std::time::Duration::from_secs(30))?;
        Ok(conn)
    }

    fn writer(&self) -> std::sync::MutexGuard<'_, Connection> {
        self.inner.writer.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    /// Validates and inserts a batch atomically. Nothing is written when any
    /// record fails validation or the transaction fails.
    pub fn insert_batch(&self, records: &[Record]) -> Result<InsertReport, StoreError> {
        let mut rows = Vec::with_capacity(records.len());
        for (index, record) in records.iter().enumerate() {
            let table = record.table();
            record
                .validate()
                .map_err(|reason| StoreError::InvariantViolation { table, index, reason })?;
            let params = row_to_params(table, &record.to_row())
                .map_err(|reason| StoreError::InvariantViolation { table, index, reason })?;
            rows.push((table, params));
        }

        let mut report = InsertReport::default();
        let mut conn = self.writer();
        let tx = conn.transaction()?;
        {
            let mut statements = BTreeMap::new();
            for (table, params) in rows {
                let stmt = match statements.entry(table) {
                    std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                    std::collections::btree_map::Entry::Vacant(e) => e.insert(tx.prepare(&insert_sql(table))?),
                };
                let changed = stmt.execute(params_from_iter(params))?;
                let counts = report.tables.entry(table).or_default();
                counts.received += 1;
                if changed > 0 {
                    counts.inserted += 1;
                } else {
                    counts.deduplicated += 1;
                }
            }
        }
        tx.commit()?;
        Ok(report)
    }

    /// Rows matching `filter`, as Table 1 JSON objects, ordered by key.
    pub fn query_rows(&self, table: Table, filter: &Filter) -> Result<Vec<Map<String, Value>>, StoreError> {
        self.query_rows_paged(table, filter, None)
    }

    pub(crate) fn query_rows_paged(
        &self,
        table: Table,
        filter: &Filter,
        page: Option<(u64, u64)>,
    ) -> Result<Vec<Map<String, Value>>, StoreError> {
        let (where_sql, params) = filter.to_sql(table)?;
        let mut sql = format!("SELECT {} FROM {}{} ORDER BY {}", column_list(table), table.name(), where_sql, order_by(table));
        if let Some((limit, offset)) = page {
            sql.push_str(&format!(" LIMIT {limit} OFFSET {offset}"));
        }
        let conn = self.reader()?;
        let mut stmt = conn.prepare(&sql)?;
        let mut rows = stmt.query(params_from_iter(params))?;
        let mut out = Vec::new();
        while let Some(row) = rows.next()? {
            out.push(sql_row_to_json(table, row)?);
        }
        Ok(out)
    }

    pub fn query(&self, table: Table, filter: &Filter) -> Result<Vec<Record>, StoreError> {
        self.query_rows(table, filter)?
            .into_iter()
            .map(|row| Record::from_row(table, row).map_err(|reason| StoreError::CorruptRow { table, reason }))
            .collect()
    }

    pub fn count(&self, table: Table, filter: &Filter) -> Result<u64, StoreError> {
        let (where_sql, params) = filter.to_sql(table)?;
        let conn = self.reader()?;
        let n: i64 = conn.query_row(
            &format!("SELECT COUNT(*) FROM {}{}", table.name(), where_sql),
            params_from_iter(params),
            |r| r.get(0),
        )?;
        Ok(n as u64)
    }

    pub fn delete(&self, table: Table, filter: &Filter) -> Result<u64, StoreError> {
        let (where_sql, params) = filter.to_sql(table)?;
        let conn = self.writer();
        let n = conn.execute(&format!("DELETE FROM {}{}", table.name(), where_sql), params_from_iter(params))?;
        Ok(n as u64)
    }

    /// Writes one JSON object per line, in key order. Returns the line count.
    pub fn export_json(&self, table: Table, path: &Path) -> Result<u64, StoreError> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        let n = self.export_json_to(table, &mut out)?;
        out.flush()?;
        Ok(n)
    }

    pub fn export_json_to<W: Write>(&self, table: Table, out: &mut W) -> Result<u64, StoreError> {
        let mut n = 0;
        for row in self.query_rows(table, &Filter::all())? {
            serde_json::to_writer(&mut *out, &row)?;
            out.write_all(b"\n")?;
            n += 1;
        }
        Ok(n)
    }

    pub fn meta_get(&self, key: &str) -> Result<Option<String>, StoreError> {
        let conn = self.reader()?;
        let mut stmt = conn.prepare("SELECT value FROM smdt_meta WHERE key = ?1")?;
        let mut rows = stmt.query([key])?;
        Ok(match rows.next()? {
            Some(row) => Some(row.get(0)?),
            None => None,
        })
    }

    pub fn meta_set(&self, key: &str, value: &str) -> Result<(), StoreError> {
        self.writer().execute(
            "INSERT INTO smdt_meta (key, value) VALUES (?1, ?2) ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            [key, value],
        )?;
        Ok(())
    }
}

fn create_schema(conn: &Connection) -> Result<(), StoreError> {
    let mut ddl = String::from("CREATE TABLE IF NOT EXISTS smdt_meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);\n");
    for table in Table::ALL {
        let mut cols = Vec::new();
        for def in table.fields() {
            for col in def.columns() {
                let null = if def.required { " NOT NULL" } else { "" };
                cols.push(format!("{col} {}{null}", def.sql_type()));
            }
        }
        ddl.push_str(&format!("CREATE TABLE IF NOT EXISTS {} ({});\n", table.name(), cols.join(", ")));
        let key_exprs: Vec<String> = table
            .key_fields()
            .iter()
            .map(|k| {
                let def = table.field(k).expect("key fields are declared");
                if def.required {
                    def.name.to_string()
                } else {
                    format!("IFNULL({}, '')", def.name)
                }
            })
            .collect();
        ddl.push_str(&format!(
            "CREATE UNIQUE INDEX IF NOT EXISTS {0}_dedup ON {0} ({1});\n",
            table.name(),
            key_exprs.join(", ")
        ));
    }
    conn.execute_batch(&ddl)?;
    Ok(())
}

fn column_list(table: Table) -> String {
    table.fields().iter().flat_map(|f| f.columns()).collect::<Vec<_>>().join(", ")
}

fn order_by(table: Table) -> String {
    table.key_fields().join(", ")
}

fn insert_sql(table: Table) -> String {
    let cols: Vec<String> = table.fields().iter().flat_map(|f| f.columns()).collect();
    let placeholders = vec!["?"; cols.len()].join(", ");
    format!("INSERT OR IGNORE INTO {} ({}) VALUES ({})", table.name(), cols.join(", "), placeholders)
}

fn row_to_params(table: Table, row: &Map<String, Value>) -> Result<Vec<SqlValue>, String> {
    let mut params = Vec::new();
    for def in table.fields() {
        let value = row.get(def.name).unwrap_or(&Value::Null);
        if value.is_null() {
            if def.required {
                return Err(format!("{} is required", def.name));
            }
            params.extend(def.columns().iter().map(|_| SqlValue::Null));
            continue;
        }
        let bad = || format!("{} has an invalid value {}", def.name, value);
        match def.kind {
            FieldKind::Text | FieldKind::Enum => params.push(SqlValue::Text(value.as_str().ok_or_else(bad)?.to_string())),
            FieldKind::Count => {
                let n = value.as_u64().and_then(|n| i64::try_from(n).ok()).ok_or_else(bad)?;
                params.push(SqlValue::Integer(n));
            }
            FieldKind::Bool => params.push(SqlValue::Integer(value.as_bool().ok_or_else(bad)? as i64)),
            FieldKind::Time => {
                let t = value.as_str().and_then(|s| Timestamp::parse_iso(s).ok()).ok_or_else(bad)?;
                params.push(SqlValue::Integer(t.as_micros()));
            }
            FieldKind::Geo => {
                let lat = value.get("lat").and_then(Value::as_f64).ok_or_else(bad)?;
                let lon = value.get("lon").and_then(Value::as_f64).ok_or_else(bad)?;
                params.push(SqlValue::Real(lat));
                params.push(SqlValue::Real(lon));
            }
            FieldKind::Json => {
                if !value.is_object() {
                    return Err(format!("{} must be a JSON object", def.name));
                }
                params.push(SqlValue::Text(value.to_string()));
            }
        }
    }
    Ok(params)
}

fn sql_row_to_json(table: Table, row: &rusqlite::Row<'_>) -> Result<Map<String, Value>, StoreError> {
    let corrupt = |reason: String| StoreError::CorruptRow { table, reason };
    let mut out = Map::new();
    let mut idx = 0;
    for def in table.fields() {
        let value = match def.kind {
            FieldKind::Text | FieldKind::Enum => row.get::<_, Option<String>>(idx)?.map(Value::String).unwrap_or(Value::Null),
            FieldKind::Count => row.get::<_, Option<i64>>(idx)?.map(Value::from).unwrap_or(Value::Null),
            FieldKind::Bool => row.get::<_, Option<i64>>(idx)?.map(|b| Value::Bool(b != 0)).unwrap_or(Value::Null),
            FieldKind::Time => row
                .get::<_, Option<i64>>(idx)?
                .map(|m| Value::String(Timestamp::from_micros(m).to_iso()))
                .unwrap_or(Value::Null),
            FieldKind::Geo => {
                let lat: Option<f64> = row.get(idx)?;
                let lon: Option<f64> = row.get(idx + 1)?;
                idx += 1;
                match (lat, lon) {
                    (Some(lat), Some(lon)) => serde_json::json!({ "lat": lat, "lon": lon }),
                    _ => Value::Null,
                }
            }
            FieldKind::Json => match row.get::<_, Option<String>>(idx)? {
                Some(text) => serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?,
                None => Value::Null,
            },
        };
        idx += 1;
        out.insert(def.name.to_string(), value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: u32) -> Timestamp {
        Timestamp::ymd_hms(2023, 5, 14, h, 0, 0)
    }

    fn post(id: &str, body: &str) -> Record {
        PostRecord::new(id, "u1", body, t(1), t(5)).into()
    }

    fn temp_store(dir: &tempfile::TempDir, name: &str) -> StoreHandle {
        init_store(dir.path().join(name).to_str().unwrap(), true).unwrap()
    }

    #[test]
    fn fresh_store_has_seven_empty_tables() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db_a");
        for table in Table::ALL {
            assert_eq!(store.count(table, &Filter::all()).unwrap(), 0, "{table}");
        }
    }

    #[test]
    fn insert_three_distinct_posts() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let batch = vec![post("1", "a"), post("2", "b"), post("3", "c")];
        let r = store.insert_batch(&batch).unwrap();
        assert_eq!(r.get(Table::Posts), TableCounts { received: 3, inserted: 3, deduplicated: 0 });
        let again = store.insert_batch(&batch).unwrap();
        assert_eq!(again.get(Table::Posts), TableCounts { received: 3, inserted: 0, deduplicated: 3 });
    }

    #[test]
    fn first_record_wins_on_key_collision() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let r = store.insert_batch(&[post("1", "first"), post("1", "second")]).unwrap();
        assert_eq!(r.get(Table::Posts), TableCounts { received: 2, inserted: 1, deduplicated: 1 });
        let rows = store.query(Table::Posts, &Filter::all()).unwrap();
        assert_eq!(rows.len(), 1);
        match &rows[0] {
            Record::Post(p) => assert_eq!(p.body, "first"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshots_with_different_retrieval_coexist() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let a = PostRecord::new("1", "u1", "x", t(1), t(2));
        let b = PostRecord::new("1", "u1", "x", t(1), t(3));
        store.insert_batch(&[a.into(), b.into()]).unwrap();
        assert_eq!(store.count(Table::Posts, &Filter::all()).unwrap(), 2);
    }

    #[test]
    fn invalid_record_aborts_whole_batch() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let bad: Record = PostRecord::new("", "u1", "x", t(1), t(2)).into();
        let err = store.insert_batch(&[post("1", "ok"), bad]).unwrap_err();
        match err {
            StoreError::InvariantViolation { table, index, .. } => {
                assert_eq!(table, Table::Posts);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(store.count(Table::Posts, &Filter::all()).unwrap(), 0);
    }

    #[test]
    fn reopen_without_overwrite_keeps_rows_and_overwrite_clears() {
        let dir = tempfile::tempdir().unwrap();
        let name = dir.path().join("db_a");
        let name = name.to_str().unwrap();
        {
            let store = init_store(name, true).unwrap();
            let posts: Vec<Record> = (0..10).map(|i| post(&i.to_string(), "x")).collect();
            store.insert_batch(&posts).unwrap();
        }
        let reopened = init_store(name, false).unwrap();
        assert_eq!(reopened.count(Table::Posts, &Filter::all()).unwrap(), 10);
        drop(reopened);
        let cleared = init_store(name, true).unwrap();
        assert_eq!(cleared.count(Table::Posts, &Filter::all()).unwrap(), 0);
    }

    #[test]
    fn create_new_signals_existing_store() {
        let dir = tempfile::tempdir().unwrap();
        let name = dir.path().join("db");
        let name = name.to_str().unwrap();
        let _first = StoreHandle::create_new(name).unwrap();
        assert!(matches!(StoreHandle::create_new(name), Err(StoreError::StoreExists(_))));
        assert!(matches!(
            StoreHandle::open_existing(dir.path().join("missing").to_str().unwrap()),
            Err(StoreError::NotFound(_))
        ));
    }

    #[test]
    fn empty_export_writes_no_lines() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let out = dir.path().join("posts.jsonl");
        assert_eq!(store.export_json(Table::Posts, &out).unwrap(), 0);
        assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
    }

    #[test]
    fn export_uses_table_field_names_and_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let accounts: Vec<Record> = (0..5).map(|i| AccountRecord::new(format!("u{i}"), t(3)).into()).collect();
        store.insert_batch(&accounts).unwrap();
        let out = dir.path().join("accounts.jsonl");
        assert_eq!(store.export_json(Table::Accounts, &out).unwrap(), 5);
        let text = std::fs::read_to_string(&out).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(
            first,
            r#"{"account_id":"u0","user_name":null,"profile_name":null,"bio":null,"location":null,"post_count":null,"friend_count":null,"follower_count":null,"is_verified":null,"profile_image_url":null,"created_at":null,"retrieved_at":"2023-05-14T03:00:00Z"}"#
        );
        for line in text.lines() {
            let v: Value = serde_json::from_str(line).unwrap();
            assert!(v.get("account_id").is_some());
        }
    }

    #[test]
    fn unwritable_export_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let out = dir.path().join("no/such/dir/posts.jsonl");
        assert!(matches!(store.export_json(Table::Posts, &out), Err(StoreError::Io(_))));
    }

    #[test]
    fn query_empty_table_and_empty_range() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let f = Filter::all().eq("action_type", "SHARE");
        assert!(store.query(Table::Actions, &f).unwrap().is_empty());
        store.insert_batch(&[post("1", "x")]).unwrap();
        let f = Filter::all().range("created_at", t(1), t(1));
        assert!(store.query(Table::Posts, &f).unwrap().is_empty());
    }

    #[test]
    fn actions_with_absent_ids_still_deduplicate() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        let a: Record = ActionRecord {
            originator_account_id: Some("a".into()),
            originator_post_id: None,
            target_account_id: Some("b".into()),
            target_post_id: None,
            action_type: ActionType::Mention,
            created_at: t(1),
            retrieved_at: t(2),
        }
        .into();
        let r = store.insert_batch(&[a.clone(), a]).unwrap();
        assert_eq!(r.get(Table::Actions).inserted, 1);
        assert_eq!(r.get(Table::Actions).deduplicated, 1);
    }

    #[test]
    fn meta_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = temp_store(&dir, "db");
        assert_eq!(store.meta_get("k").unwrap(), None);
        store.meta_set("k", "v1").unwrap();
        store.meta_set("k", "v2").unwrap();
        assert_eq!(store.meta_get("k").unwrap().as_deref(), Some("v2"));
    }
}
