//! Per-field availability statistics and side-by-side store comparison.
//!
//! A field is *available* in a store when at least one row holds a non-null
//! value for it. Empty tables therefore report every field as absent, with a
//! null rate of 0.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::store::{FieldDef, FieldKind, StoreError, StoreHandle, Table};
use crate::timestamp::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub non_null_count: u64,
    pub row_count: u64,
    pub null_rate: f64,
    pub distinct_count: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_timestamp: Option<Timestamp>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_timestamp: Option<Timestamp>,
}

impl FieldStats {
    pub fn availability(&self) -> Availability {
        if self.non_null_count > 0 {
            Availability::Available
        } else {
            Availability::Absent
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Availability {
    Available,
    Absent,
}

impl Availability {
    pub fn glyph(self) -> char {
        match self {
            Availability::Available => '+',
            Availability::Absent => '-',
        }
    }
}

pub type TableStats = IndexMap<String, FieldStats>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaReport {
    pub store_name: String,
    pub tables: IndexMap<Table, TableStats>,
    pub availability: IndexMap<Table, IndexMap<String, Availability>>,
}

#[derive(Debug, thiserror::Error)]
pub enum InspectError {
    #[error("no reports to compare")]
    NoReports,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Exact statistics for every field of `table`.
pub fn table_stats(store: &StoreHandle, table: Table) -> Result<TableStats, StoreError> {
    let conn = store.reader()?;
    let name = table.name();
    let row_count: i64 = conn.query_row(&format!("SELECT COUNT(*) FROM {name}"), [], |r| r.get(0))?;
    let row_count = row_count as u64;
    let mut out = IndexMap::new();
    for def in table.fields() {
        let (non_null, distinct) = counts(&conn, name, def)?;
        let (min_timestamp, max_timestamp) = if def.kind == FieldKind::Time {
            let (lo, hi): (Option<i64>, Option<i64>) = conn.query_row(
                &format!("SELECT MIN({0}), MAX({0}) FROM {name}", def.name),
                [],
                |r| Ok((r.get(0)?, r.get(1)?)),
            )?;
            (lo.map(Timestamp::from_micros), hi.map(Timestamp::from_micros))
        } else {
            (None, None)
        };
        let null_rate = if row_count == 0 { 0.0 } else { 1.0 - non_null as f64 / row_count as f64 };
        out.insert(
            def.name.to_string(),
            FieldStats {
                non_null_count: non_null,
                row_count,
                null_rate,
                distinct_count: distinct,
                min_timestamp,
                max_timestamp,
            },
        );
    }
    Ok(out)
}

fn counts(conn: &rusqlite::Connection, table: &str, def: &FieldDef) -> Result<(u64, u64), StoreError> {
    let (non_null_sql, distinct_sql) = match def.kind {
        FieldKind::Geo => {
            let cols = def.columns();
            let present = format!("{} IS NOT NULL AND {} IS NOT NULL", cols[0], cols[1]);
            (
                format!("SELECT COUNT(*) FROM {table} WHERE {present}"),
                format!("SELECT COUNT(*) FROM (SELECT DISTINCT {}, {} FROM {table} WHERE {present})", cols[0], cols[1]),
            )
        }
        _ => (
            format!("SELECT COUNT({}) FROM {table}", def.name),
            format!("SELECT COUNT(DISTINCT {}) FROM {table}", def.name),
        ),
    };
    let non_null: i64 = conn.query_row(&non_null_sql, [], |r| r.get(0))?;
    let distinct: i64 = conn.query_row(&distinct_sql, [], |r| r.get(0))?;
    Ok((non_null as u64, distinct as u64))
}

/// Statistics for every schema table of one store.
pub fn inspect_store(store: &StoreHandle) -> Result<SchemaReport, StoreError> {
    let mut tables = IndexMap::new();
    let mut availability = IndexMap::new();
    for table in Table::ALL {
        let stats = table_stats(store, table)?;
        availability.insert(table, stats.iter().map(|(f, s)| (f.clone(), s.availability())).collect());
        tables.insert(table, stats);
    }
    Ok(SchemaReport { store_name: store.name().to_string(), tables, availability })
}

/// Parses a list of table names, rejecting anything outside the schema.
pub fn parse_tables<S: AsRef<str>>(names: &[S]) -> Result<Vec<Table>, StoreError> {
    names.iter().map(|n| n.as_ref().trim().parse::<Table>()).collect()
}

/// Renders reports side by side: one section per table, one row per field,
/// one column per report in input order. Cells hold the availability glyph
/// (`+` / `-`) and the non-null count.
pub fn report_schemas(reports: &[SchemaReport], only_tables: Option<&[Table]>) -> Result<String, InspectError> {
    if reports.is_empty() {
        return Err(InspectError::NoReports);
    }
    let tables: Vec<Table> = match only_tables {
        Some(only) => Table::ALL.into_iter().filter(|t| only.contains(t)).collect(),
        None => Table::ALL.to_vec(),
    };

    let field_width = tables
        .iter()
        .flat_map(|t| t.fields().iter().map(|f| f.name.len()))
        .chain(std::iter::once("field".len()))
        .max()
        .unwrap_or(5);

    let cell = |report: &SchemaReport, table: Table, field: &str| -> String {
        match report.tables.get(&table).and_then(|t| t.get(field)) {
            Some(stats) => format!("{} {}", stats.availability().glyph(), stats.non_null_count),
            None => "- 0".to_string(),
        }
    };

    let widths: Vec<usize> = reports
        .iter()
        .map(|r| {
            tables
                .iter()
                .flat_map(|t| t.fields().iter().map(move |f| (t, f)))
                .map(|(t, f)| cell(r, *t, f.name).len())
                .chain(std::iter::once(r.store_name.chars().count()))
                .max()
                .unwrap_or(1)
        })
        .collect();

    let mut out = String::new();
    let names: Vec<&str> = reports.iter().map(|r| r.store_name.as_str()).collect();
    writeln!(out, "stores: {}", names.join(", ")).unwrap();
    for table in tables {
        let rows: Vec<String> = reports
            .iter()
            .map(|r| {
                let n = r.tables.get(&table).and_then(|t| t.values().next()).map(|s| s.row_count).unwrap_or(0);
                format!("{}={}", r.store_name, n)
            })
            .collect();
        writeln!(out).unwrap();
        writeln!(out, "[{}] rows: {}", table.name(), rows.join(", ")).unwrap();

        let mut header = format!("{:<field_width$}", "field");
        let mut rule = "-".repeat(field_width);
        for (r, w) in reports.iter().zip(&widths) {
            let pad = w - r.store_name.chars().count();
            write!(header, " | {}{}", r.store_name, " ".repeat(pad)).unwrap();
            write!(rule, "-+-{}", "-".repeat(*w)).unwrap();
        }
        writeln!(out, "{}", header.trim_end()).unwrap();
        writeln!(out, "{rule}").unwrap();
        for def in table.fields() {
            let mut line = format!("{:<field_width$}", def.name);
            for (r, w) in reports.iter().zip(&widths) {
                write!(line, " | {:<w$}", cell(r, table, def.name), w = *w).unwrap();
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
    }
    Ok(out)
}
