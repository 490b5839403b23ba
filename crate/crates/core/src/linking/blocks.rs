use serde::{Deserialize, Serialize};

use crate::schema::SchemaCatalog;

pub const DEFAULT_TOKEN_BUDGET: usize = 512;

/// Token count used for the block budget: whitespace-delimited words.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockColumn {
    pub name: String,
    pub description: String,
}

/// One table and its serialized column descriptors; the unit a scorer sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableBlock {
    pub table: String,
    pub description: String,
    /// Columns that fit in the budget, in declaration order.
    pub columns: Vec<BlockColumn>,
    /// Columns left out because the budget ran out; they score zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub omitted_columns: Vec<String>,
    pub text: String,
}

fn with_description(name: &str, description: &str) -> String {
    if description.is_empty() {
        name.to_string()
    } else {
        format!("{name} ({description})")
    }
}

pub fn build_table_blocks(schema: &SchemaCatalog, token_budget: usize) -> Vec<TableBlock> {
    schema
        .tables
        .iter()
        .map(|t| {
            let mut text = format!("{}:", with_description(&t.name, &t.description));
            let mut used = word_count(&text);
            let mut columns = Vec::new();
            let mut omitted_columns = Vec::new();
            for c in &t.columns {
                let entry = with_description(&c.name, &c.description);
                let cost = word_count(&entry);
                if omitted_columns.is_empty() && used + cost <= token_budget {
                    text.push_str(if columns.is_empty() { " " } else { ", " });
                    text.push_str(&entry);
                    used += cost;
                    columns.push(BlockColumn {
                        name: c.name.clone(),
                        description: c.description.clone(),
                    });
                } else {
                    omitted_columns.push(c.name.clone());
                }
            }
            TableBlock {
                table: t.name.clone(),
                description: t.description.clone(),
                columns,
                omitted_columns,
                text,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::*;

    #[test]
    fn one_block_per_table_with_descriptions() {
        let schema = SchemaCatalog {
            db_id: "d".into(),
            tables: vec![
                table("fund", "mutual funds", &[("code", "fund code"), ("size", "")]),
                table("manager", "", &[("name", "")]),
                table("nav", "net asset value", &[]),
            ],
            foreign_keys: vec![],
        };
        let blocks = build_table_blocks(&schema, DEFAULT_TOKEN_BUDGET);
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[0].text, "fund (mutual funds): code (fund code), size");
        assert_eq!(blocks[1].text, "manager: name");
        assert_eq!(blocks[2].text, "nav (net asset value):");
    }

    #[test]
    fn budget_truncates_columns() {
        let schema = SchemaCatalog {
            db_id: "d".into(),
            tables: vec![table(
                "t",
                "",
                &[("a", "one two"), ("b", "three"), ("c", "")],
            )],
            foreign_keys: vec![],
        };
        let blocks = build_table_blocks(&schema, 4);
        assert_eq!(blocks[0].columns.len(), 1);
        assert_eq!(blocks[0].omitted_columns, ["b", "c"]);
        assert!(word_count(&blocks[0].text) <= 4);
    }
}
