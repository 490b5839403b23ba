use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use rusqlite::types::{Value as SqlValue, ValueRef};
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown database {0:?}")]
    UnknownDatabase(String),
    #[error("execution failed: {0}")]
    Execution(String),
    #[error("invalid fixture: {0}")]
    Fixture(String),
}

/// A single cell value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
}

pub type Row = Vec<Value>;

/// Runs SQL against named databases.
pub trait ExecutionEngine: Send + Sync {
    fn execute(&self, sql: &str, db_id: &str) -> Result<Vec<Row>, EngineError>;
}

const FLOAT_TOLERANCE: f64 = 1e-9;

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::Integer(x), Value::Integer(y)) => x == y,
        (Value::Integer(_) | Value::Real(_), Value::Integer(_) | Value::Real(_)) => {
            (as_f64(a) - as_f64(b)).abs() <= FLOAT_TOLERANCE
        }
        _ => false,
    }
}

fn as_f64(v: &Value) -> f64 {
    match v {
        Value::Integer(i) => *i as f64,
        Value::Real(r) => *r,
        _ => f64::NAN,
    }
}

fn rows_equal(a: &Row, b: &Row) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| values_equal(x, y))
}

/// Multiset equality of rows. Column order matters; row order does not.
pub fn results_equal(a: &[Row], b: &[Row]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|row| {
        let hit = b
            .iter()
            .enumerate()
            .position(|(j, other)| !used[j] && rows_equal(row, other));
        match hit {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

#[derive(Debug, Deserialize)]
struct FixtureFile {
    databases: Vec<FixtureDb>,
}

#[derive(Debug, Deserialize)]
struct FixtureDb {
    db_id: String,
    tables: Vec<FixtureTable>,
}

#[derive(Debug, Deserialize)]
struct FixtureTable {
    name: String,
    columns: Vec<String>,
    #[serde(default)]
    rows: Vec<Vec<serde_json::Value>>,
}

/// In-memory SQLite databases loaded from a JSON fixture of the form
/// `{"databases": [{"db_id", "tables": [{"name", "columns", "rows"}]}]}`.
pub struct SqliteEngine {
    dbs: BTreeMap<String, Mutex<Connection>>,
}

fn quote_ident(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn json_to_sql(v: &serde_json::Value) -> Result<SqlValue, EngineError> {
    Ok(match v {
        serde_json::Value::Null => SqlValue::Null,
        serde_json::Value::Bool(b) => SqlValue::Integer(*b as i64),
        serde_json::Value::Number(n) => match n.as_i64() {
            Some(i) => SqlValue::Integer(i),
            None => SqlValue::Real(n.as_f64().unwrap_or(f64::NAN)),
        },
        serde_json::Value::String(s) => SqlValue::Text(s.clone()),
        other => return Err(EngineError::Fixture(format!("unsupported cell {other}"))),
    })
}

fn fixture_err(e: rusqlite::Error) -> EngineError {
    EngineError::Fixture(e.to_string())
}

impl SqliteEngine {
    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let file: FixtureFile =
            serde_json::from_str(text).map_err(|e| EngineError::Fixture(e.to_string()))?;
        let mut dbs = BTreeMap::new();
        for db in file.databases {
            let conn = Connection::open_in_memory().map_err(fixture_err)?;
            for t in &db.tables {
                let cols: Vec<String> = t.columns.iter().map(|c| quote_ident(c)).collect();
                conn.execute_batch(&format!(
                    "CREATE TABLE {} ({});",
                    quote_ident(&t.name),
                    cols.join(", ")
                ))
                .map_err(fixture_err)?;
                let marks = vec!["?"; cols.len()].join(", ");
                let mut stmt = conn
                    .prepare(&format!("INSERT INTO {} VALUES ({marks})", quote_ident(&t.name)))
                    .map_err(fixture_err)?;
                for row in &t.rows {
                    if row.len() != cols.len() {
                        return Err(EngineError::Fixture(format!(
                            "row width {} in table {} with {} columns",
                            row.len(),
                            t.name,
                            cols.len()
                        )));
                    }
                    let vals = row.iter().map(json_to_sql).collect::<Result<Vec<_>, _>>()?;
                    stmt.execute(rusqlite::params_from_iter(vals)).map_err(fixture_err)?;
                }
            }
            dbs.insert(db.db_id, Mutex::new(conn));
        }
        Ok(Self { dbs })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| EngineError::Fixture(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}

impl ExecutionEngine for SqliteEngine {
    fn execute(&self, sql: &str, db_id: &str) -> Result<Vec<Row>, EngineError> {
        let conn = self
            .dbs
            .get(db_id)
            .ok_or_else(|| EngineError::UnknownDatabase(db_id.to_string()))?
            .lock()
            .expect("engine lock");
        let exec = |e: rusqlite::Error| EngineError::Execution(e.to_string());
        let mut stmt = conn.prepare(sql).map_err(exec)?;
        if !stmt.readonly() {
            return Err(EngineError::Execution("only read-only queries are allowed".into()));
        }
        let width = stmt.column_count();
        let mut rows = stmt.query([]).map_err(exec)?;
        let mut out = Vec::new();
        while let Some(row) = rows.next().map_err(exec)? {
            let mut cells = Vec::with_capacity(width);
            for i in 0..width {
                cells.push(match row.get_ref(i).map_err(exec)? {
                    ValueRef::Null => Value::Null,
                    ValueRef::Integer(i) => Value::Integer(i),
                    ValueRef::Real(r) => Value::Real(r),
                    ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
                    ValueRef::Blob(b) => Value::Text(format!("<blob {} bytes>", b.len())),
                });
            }
            out.push(cells);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine() -> SqliteEngine {
        SqliteEngine::from_json(
            r#"{"databases":[{"db_id":"d","tables":[
                {"name":"t","columns":["a","b"],"rows":[[1,"x"],[2,"y"],[2,"y"],[3,null]]}
            ]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn executes_against_fixture() {
        let e = engine();
        let rows = e.execute("SELECT b FROM t WHERE a = 2", "d").unwrap();
        assert_eq!(rows, vec![vec![Value::Text("y".into())]; 2]);
        assert!(e.execute("SELECT a FROM t WHERE a > 9", "d").unwrap().is_empty());
        assert!(matches!(e.execute("SELECT 1", "nope"), Err(EngineError::UnknownDatabase(_))));
        assert!(matches!(e.execute("SELECT zz FROM t", "d"), Err(EngineError::Execution(_))));
        assert!(matches!(e.execute("DELETE FROM t", "d"), Err(EngineError::Execution(_))));
    }

    #[test]
    fn multiset_semantics() {
        let r = |v: &[i64]| v.iter().map(|&i| vec![Value::Integer(i)]).collect::<Vec<_>>();
        assert!(results_equal(&r(&[1, 2, 2]), &r(&[2, 1, 2])));
        assert!(!results_equal(&r(&[1, 2, 2]), &r(&[1, 1, 2])));
        assert!(!results_equal(&r(&[1, 2]), &r(&[1, 2, 2])));
        let swapped_a = vec![vec![Value::Integer(1), Value::Text("x".into())]];
        let swapped_b = vec![vec![Value::Text("x".into()), Value::Integer(1)]];
        assert!(!results_equal(&swapped_a, &swapped_b));
    }

    #[test]
    fn float_tolerance() {
        let a = vec![vec![Value::Real(0.1 + 0.2)]];
        assert!(results_equal(&a, &[vec![Value::Real(0.3)]]));
        assert!(results_equal(&[vec![Value::Integer(3)]], &[vec![Value::Real(3.0)]]));
        assert!(!results_equal(&a, &[vec![Value::Real(0.3 + 1e-6)]]));
        assert!(!results_equal(&[vec![Value::Null]], &[vec![Value::Integer(0)]]));
    }
}
