//! Database schema catalog: tables, described columns and foreign keys.

use std::collections::HashSet;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("duplicate table `{0}`")]
    DuplicateTable(String),
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("foreign key endpoint {table}.{column} does not exist")]
    DanglingForeignKey { table: String, column: String },
    #[error("reading schema {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid schema JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub value_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column(name).is_some()
    }
}

/// `(table, column)`; serialized as a two-element array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnAddr(pub String, pub String);

impl ColumnAddr {
    pub fn table(&self) -> &str {
        &self.0
    }

    pub fn column(&self) -> &str {
        &self.1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from: ColumnAddr,
    pub to: ColumnAddr,
}

impl ForeignKey {
    /// True when the key connects tables `a` and `b` in either direction.
    pub fn links(&self, a: &str, b: &str) -> bool {
        let (f, t) = (self.from.table(), self.to.table());
        (f.eq_ignore_ascii_case(a) && t.eq_ignore_ascii_case(b))
            || (f.eq_ignore_ascii_case(b) && t.eq_ignore_ascii_case(a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub db_id: String,
    pub tables: Vec<Table>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

impl SchemaCatalog {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let catalog: Self = serde_json::from_str(text)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let mut tables = HashSet::new();
        for t in &self.tables {
            if !tables.insert(t.name.to_lowercase()) {
                return Err(SchemaError::DuplicateTable(t.name.clone()));
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if !cols.insert(c.name.to_lowercase()) {
                    return Err(SchemaError::DuplicateColumn {
                        table: t.name.clone(),
                        column: c.name.clone(),
                    });
                }
            }
        }
        for fk in &self.foreign_keys {
            for end in [&fk.from, &fk.to] {
                let exists = self
                    .table(end.table())
                    .is_some_and(|t| t.has_column(end.column()));
                if !exists {
                    return Err(SchemaError::DanglingForeignKey {
                        table: end.0.clone(),
                        column: end.1.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Tables declaring a column called `column`, in declaration order.
    pub fn owners_of(&self, column: &str) -> Vec<&Table> {
        self.tables.iter().filter(|t| t.has_column(column)).collect()
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.tables.iter().any(|t| t.has_column(column))
    }

    /// Distinct column names across all tables, in declaration order.
    pub fn column_names(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in &self.tables {
            for c in &t.columns {
                if seen.insert(c.name.to_lowercase()) {
                    out.push(c.name.as_str());
                }
            }
        }
        out
    }

    pub fn max_columns(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).max().unwrap_or(0)
    }

    /// Foreign keys linking `a` and `b`, in declaration order.
    pub fn foreign_keys_between(&self, a: &str, b: &str) -> Vec<&ForeignKey> {
        self.foreign_keys.iter().filter(|fk| fk.links(a, b)).collect()
    }

    /// Text form used in prompts: every table and column followed by its
    /// description.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let _ = write!(out, "Table {}", t.name);
            if !t.description.is_empty() {
                let _ = write!(out, " ({})", t.description);
            }
            out.push_str(":\n");
            for c in &t.columns {
                let _ = write!(out, "  - {}", c.name);
                if !c.value_type.is_empty() {
                    let _ = write!(out, " [{}]", c.value_type);
                }
                if !c.description.is_empty() {
                    let _ = write!(out, ": {}", c.description);
                }
                out.push('\n');
            }
        }
        if !self.foreign_keys.is_empty() {
            out.push_str("Foreign keys:\n");
            for fk in &self.foreign_keys {
                let _ = writeln!(
                    out,
                    "  - {}.{} = {}.{}",
                    fk.from.0, fk.from.1, fk.to.0, fk.to.1
                );
            }
        }
        out
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn col(name: &str, description: &str) -> Column {
        Column {
            name: name.into(),
            description: description.into(),
            value_type: String::new(),
        }
    }

    pub fn table(name: &str, description: &str, cols: &[(&str, &str)]) -> Table {
        Table {
            name: name.into(),
            description: description.into(),
            columns: cols.iter().map(|(n, d)| col(n, d)).collect(),
        }
    }

    pub fn fk(from: (&str, &str), to: (&str, &str)) -> ForeignKey {
        ForeignKey {
            from: ColumnAddr(from.0.into(), from.1.into()),
            to: ColumnAddr(to.0.into(), to.1.into()),
        }
    }

    /// Two-table stock schema shaped after the misattribution examples.
    pub fn stock_schema() -> SchemaCatalog {
        SchemaCatalog {
            db_id: "stock".into(),
            tables: vec![
                table(
                    "lc_sharestru",
                    "share structure",
                    &[
                        ("companycode", "company code"),
                        ("chinameabbr", "abbreviated Chinese name"),
                        ("enddate", "end date"),
                        ("aquireramount", "acquirer amount"),
                    ],
                ),
                table(
                    "lc_exgindustry",
                    "exchange industry",
                    &[
                        ("companycode", "company code"),
                        ("firstindustryname", "first level industry name"),
                        ("infopubldate", "publication date"),
                    ],
                ),
            ],
            foreign_keys: vec![fk(
                ("lc_sharestru", "companycode"),
                ("lc_exgindustry", "companycode"),
            )],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn json_shape_round_trips() {
        let text = r#"{"db_id":"d","tables":[{"name":"t","description":"","columns":[
            {"name":"a","description":"x","value_type":"int"}]},
            {"name":"u","columns":[{"name":"b"}]}],
            "foreign_keys":[{"from":["t","a"],"to":["u","b"]}]}"#;
        let s = SchemaCatalog::from_json(text).unwrap();
        assert_eq!(s.foreign_keys[0].from, ColumnAddr("t".into(), "a".into()));
        let back = serde_json::to_string(&s).unwrap();
        assert!(back.contains(r#""from":["t","a"]"#));
    }

    #[test]
    fn invariants_are_checked() {
        let mut s = stock_schema();
        s.tables.push(s.tables[0].clone());
        assert!(matches!(s.validate(), Err(SchemaError::DuplicateTable(_))));

        let mut s = stock_schema();
        s.tables[0].columns.push(col("ENDDATE", ""));
        assert!(matches!(s.validate(), Err(SchemaError::DuplicateColumn { .. })));

        let mut s = stock_schema();
        s.foreign_keys.push(fk(("lc_sharestru", "nope"), ("lc_exgindustry", "companycode")));
        assert!(matches!(s.validate(), Err(SchemaError::DanglingForeignKey { .. })));
    }

    #[test]
    fn owners_and_lookup_are_case_insensitive() {
        let s = stock_schema();
        let owners: Vec<_> = s.owners_of("CompanyCode").iter().map(|t| t.name.as_str()).collect();
        assert_eq!(owners, ["lc_sharestru", "lc_exgindustry"]);
        assert!(s.table("LC_SHARESTRU").is_some());
        assert_eq!(s.foreign_keys_between("lc_exgindustry", "lc_sharestru").len(), 1);
    }

    #[test]
    fn prompt_text_carries_descriptions() {
        let text = stock_schema().prompt_text();
        assert!(text.contains("Table lc_sharestru (share structure):"));
        assert!(text.contains("  - chinameabbr: abbreviated Chinese name"));
        assert!(text.contains("lc_sharestru.companycode = lc_exgindustry.companycode"));
    }
}
