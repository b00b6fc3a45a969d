//! Conjunctive row filters: equality, set membership and half-open time ranges.

use rusqlite::types::Value as SqlValue;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::schema::{FieldDef, FieldKind, Table};
use super::StoreError;
use crate::timestamp::Timestamp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Clause {
    /// `field = value`; a null value matches absent fields.
    Eq { field: String, value: Value },
    In { field: String, values: Vec<Value> },
    /// `start <= field < end`.
    Range { field: String, start: Timestamp, end: Timestamp },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Filter {
    pub clauses: Vec<Clause>,
}

impl Filter {
    pub fn all() -> Self {
        Filter::default()
    }

    pub fn eq(mut self, field: &str, value: impl Into<Value>) -> Self {
        self.clauses.push(Clause::Eq { field: field.into(), value: value.into() });
        self
    }

    pub fn is_in<V: Into<Value>>(mut self, field: &str, values: impl IntoIterator<Item = V>) -> Self {
        self.clauses.push(Clause::In {
            field: field.into(),
            values: values.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn range(mut self, field: &str, start: Timestamp, end: Timestamp) -> Self {
        self.clauses.push(Clause::Range { field: field.into(), start, end });
        self
    }

    pub fn and(mut self, other: Filter) -> Self {
        self.clauses.extend(other.clauses);
        self
    }

    /// Checks every clause against the table schema without running a query.
    pub fn validate(&self, table: Table) -> Result<(), StoreError> {
        self.to_sql(table).map(|_| ())
    }

    pub(crate) fn to_sql(&self, table: Table) -> Result<(String, Vec<SqlValue>), StoreError> {
        let mut parts = Vec::new();
        let mut params = Vec::new();
        for clause in &self.clauses {
            match clause {
                Clause::Eq { field, value } => {
                    let def = filterable(table, field)?;
                    if value.is_null() {
                        parts.push(format!("{} IS NULL", def.name));
                    } else {
                        parts.push(format!("{} = ?", def.name));
                        params.push(to_sql_value(def, value)?);
                    }
                }
                Clause::In { field, values } => {
                    let def = filterable(table, field)?;
                    if values.is_empty() {
                        parts.push("0".to_string());
                        continue;
                    }
                    let mut alternatives = Vec::new();
                    let mut placeholders = Vec::new();
                    for value in values {
                        if value.is_null() {
                            alternatives.push(format!("{} IS NULL", def.name));
                        } else {
                            placeholders.push("?");
                            params.push(to_sql_value(def, value)?);
                        }
                    }
                    if !placeholders.is_empty() {
                        alternatives.push(format!("{} IN ({})", def.name, placeholders.join(", ")));
                    }
                    parts.push(format!("({})", alternatives.join(" OR ")));
                }
                Clause::Range { field, start, end } => {
                    let def = filterable(table, field)?;
                    if def.kind != FieldKind::Time {
                        return Err(StoreError::InvalidFilter {
                            field: field.clone(),
                            reason: "range clauses apply to timestamp fields only".into(),
                        });
                    }
                    if start > end {
                        return Err(StoreError::MalformedRange { start: *start, end: *end });
                    }
                    parts.push(format!("({0} >= ? AND {0} < ?)", def.name));
                    params.push(SqlValue::Integer(start.as_micros()));
                    params.push(SqlValue::Integer(end.as_micros()));
                }
            }
        }
        let sql = if parts.is_empty() {
            String::new()
        } else {
            format!(" WHERE {}", parts.join(" AND "))
        };
        Ok((sql, params))
    }
}

fn filterable(table: Table, field: &str) -> Result<&'static FieldDef, StoreError> {
    let def = table.field(field)?;
    match def.kind {
        FieldKind::Geo | FieldKind::Json => Err(StoreError::InvalidFilter {
            field: field.to_string(),
            reason: "field cannot be filtered on".into(),
        }),
        _ => Ok(def),
    }
}

fn to_sql_value(def: &FieldDef, value: &Value) -> Result<SqlValue, StoreError> {
    let bad = |reason: &str| StoreError::InvalidFilter {
        field: def.name.to_string(),
        reason: format!("{reason}, got {value}"),
    };
    match def.kind {
        FieldKind::Text => value.as_str().map(|s| SqlValue::Text(s.to_string())).ok_or_else(|| bad("expected a string")),
        FieldKind::Enum => value
            .as_str()
            .map(|s| SqlValue::Text(s.to_ascii_uppercase()))
            .ok_or_else(|| bad("expected a string")),
        FieldKind::Count => value
            .as_u64()
            .and_then(|n| i64::try_from(n).ok())
            .map(SqlValue::Integer)
            .ok_or_else(|| bad("expected a nonnegative integer")),
        FieldKind::Bool => value.as_bool().map(|b| SqlValue::Integer(b as i64)).ok_or_else(|| bad("expected a boolean")),
        FieldKind::Time => value
            .as_str()
            .and_then(|s| Timestamp::parse_iso(s).ok())
            .map(|t| SqlValue::Integer(t.as_micros()))
            .ok_or_else(|| bad("expected an ISO-8601 timestamp")),
        FieldKind::Geo | FieldKind::Json => Err(bad("field cannot be filtered on")),
    }
}
