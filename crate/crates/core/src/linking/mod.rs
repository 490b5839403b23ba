//! Parallel schema linking: every table becomes one block, all blocks are
//! scored in a single batch, and the top tables and columns form a
//! sub-schema for the prompt.

pub mod blocks;
pub mod eval;
pub mod lexical;
pub mod remote;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{SchemaCatalog, Table};

pub use blocks::{build_table_blocks, word_count, BlockColumn, TableBlock, DEFAULT_TOKEN_BUDGET};
pub use eval::{eval_linking, roc_auc, EvalError, ItemMetrics, LinkingExample, LinkingMetrics};
pub use lexical::{lexical_score, LexicalScorer};
pub use remote::RemoteScorer;

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("invalid link configuration: {0}")]
    InvalidConfig(String),
    #[error("scorer failed: {0}")]
    ScorerFailure(String),
}

/// Scores of one block: the table and each column that made it into the
/// block text, in block order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockScore {
    pub table_score: f64,
    pub column_scores: Vec<f64>,
}

/// A relevance model over table blocks. Implementations must return one
/// score per block in input order, each within `[0, 1]`, and must be
/// deterministic for fixed inputs.
pub trait SchemaScorer: Send + Sync {
    fn score_batch(&self, question: &str, blocks: &[TableBlock]) -> Result<Vec<BlockScore>, LinkError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub k_tables: usize,
    pub m_columns: usize,
    pub token_budget: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            k_tables: 3,
            m_columns: 7,
            token_budget: DEFAULT_TOKEN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedColumns {
    pub table: String,
    /// Every column of the table, best first.
    pub columns: Vec<ScoredItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    /// Every table of the schema, best first.
    pub ranked_tables: Vec<ScoredItem>,
    /// One entry per retained table, in rank order.
    pub ranked_columns: Vec<RankedColumns>,
    pub sub_schema: SchemaCatalog,
}

impl LinkResult {
    /// Retained table names in rank order, best first.
    pub fn table_priority(&self) -> Vec<String> {
        self.ranked_columns.iter().map(|r| r.table.clone()).collect()
    }
}

fn by_score_then_name(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.name.cmp(&b.name))
}

fn check_score(value: f64, what: &str) -> Result<f64, LinkError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(LinkError::ScorerFailure(format!("{what} score {value} outside [0, 1]")))
    }
}

pub fn link(
    question: &str,
    schema: &SchemaCatalog,
    scorer: &dyn SchemaScorer,
    config: &LinkConfig,
) -> Result<LinkResult, LinkError> {
    if config.k_tables == 0 || config.m_columns == 0 {
        return Err(LinkError::InvalidConfig(
            "k_tables and m_columns must be at least 1".into(),
        ));
    }
    let blocks = build_table_blocks(schema, config.token_budget);
    let scores = scorer.score_batch(question, &blocks)?;
    if scores.len() != blocks.len() {
        return Err(LinkError::ScorerFailure(format!(
            "expected {} block scores, got {}",
            blocks.len(),
            scores.len()
        )));
    }

    let mut ranked_tables = Vec::with_capacity(blocks.len());
    let mut column_scores = Vec::with_capacity(blocks.len());
    for (block, score) in blocks.iter().zip(&scores) {
        if score.column_scores.len() != block.columns.len() {
            return Err(LinkError::ScorerFailure(format!(
                "table `{}`: expected {} column scores, got {}",
                block.table,
                block.columns.len(),
                score.column_scores.len()
            )));
        }
        ranked_tables.push(ScoredItem {
            name: block.table.clone(),
            score: check_score(score.table_score, &block.table)?,
        });
        let mut cols = Vec::with_capacity(block.columns.len() + block.omitted_columns.len());
        for (c, &s) in block.columns.iter().zip(&score.column_scores) {
            cols.push(ScoredItem {
                name: c.name.clone(),
                score: check_score(s, &c.name)?,
            });
        }
        cols.extend(block.omitted_columns.iter().map(|name| ScoredItem {
            name: name.clone(),
            score: 0.0,
        }));
        cols.sort_by(by_score_then_name);
        column_scores.push((block.table.clone(), cols));
    }
    ranked_tables.sort_by(by_score_then_name);

    let mut ranked_columns = Vec::new();
    let mut tables: Vec<Table> = Vec::new();
    for item in ranked_tables.iter().take(config.k_tables) {
        let (_, cols) = column_scores
            .iter()
            .find(|(t, _)| *t == item.name)
            .expect("every ranked table has scored columns");
        let source = schema.table(&item.name).expect("ranked tables come from the schema");
        let keep: Vec<&str> = cols.iter().take(config.m_columns).map(|c| c.name.as_str()).collect();
        tables.push(Table {
            name: source.name.clone(),
            description: source.description.clone(),
            columns: source
                .columns
                .iter()
                .filter(|c| keep.contains(&c.name.as_str()))
                .cloned()
                .collect(),
        });
        ranked_columns.push(RankedColumns {
            table: item.name.clone(),
            columns: cols.clone(),
        });
    }
    let retained = |t: &str, c: &str| {
        tables
            .iter()
            .any(|tb| tb.name.eq_ignore_ascii_case(t) && tb.has_column(c))
    };
    let foreign_keys = schema
        .foreign_keys
        .iter()
        .filter(|fk| retained(fk.from.table(), fk.from.column()) && retained(fk.to.table(), fk.to.column()))
        .cloned()
        .collect();
    let sub_schema = SchemaCatalog {
        db_id: schema.db_id.clone(),
        tables,
        foreign_keys,
    };

    Ok(LinkResult {
        ranked_tables,
        ranked_columns,
        sub_schema,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

    use proptest::prelude::*;

    use super::*;
    use crate::schema::fixtures::*;

    struct Counting {
        inner: LexicalScorer,
        calls: AtomicUsize,
    }

    impl SchemaScorer for Counting {
        fn score_batch(&self, q: &str, b: &[TableBlock]) -> Result<Vec<BlockScore>, LinkError> {
            self.calls.fetch_add(1, AtomicOrdering::SeqCst);
            self.inner.score_batch(q, b)
        }
    }

    struct Failing;

    impl SchemaScorer for Failing {
        fn score_batch(&self, _: &str, _: &[TableBlock]) -> Result<Vec<BlockScore>, LinkError> {
            Err(LinkError::ScorerFailure("down".into()))
        }
    }

    fn wide_schema(n_tables: usize, n_cols: usize) -> SchemaCatalog {
        let names: Vec<(String, String)> = (0..n_cols)
            .map(|i| (format!("col{i}"), format!("column number {i}")))
            .collect();
        let cols: Vec<(&str, &str)> = names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        SchemaCatalog {
            db_id: "wide".into(),
            tables: (0..n_tables)
                .map(|i| table(&format!("tab{i}"), "", &cols))
                .collect(),
            foreign_keys: (1..n_tables)
                .map(|i| fk((&format!("tab{i}"), "col0"), ("tab0", "col0")))
                .collect(),
        }
    }

    #[test]
    fn defaults_bound_the_sub_schema() {
        let schema = wide_schema(6, 10);
        let r = link("col3 of tab2", &schema, &LexicalScorer, &LinkConfig::default()).unwrap();
        assert!(r.sub_schema.tables.len() <= 3);
        assert!(r.sub_schema.tables.iter().all(|t| t.columns.len() <= 7));
        r.sub_schema.validate().unwrap();
        assert_eq!(r.ranked_tables.len(), 6);
        assert_eq!(r.ranked_tables[0].name, "tab2");
    }

    #[test]
    fn no_filtering_returns_the_input_schema() {
        let schema = stock_schema();
        let config = LinkConfig {
            k_tables: schema.tables.len(),
            m_columns: schema.max_columns(),
            ..LinkConfig::default()
        };
        let r = link("anything", &schema, &LexicalScorer, &config).unwrap();
        let mut got = r.sub_schema.clone();
        got.tables.sort_by(|a, b| a.name.cmp(&b.name));
        let mut want = schema.clone();
        want.tables.sort_by(|a, b| a.name.cmp(&b.name));
        assert_eq!(got, want);
    }

    #[test]
    fn verbatim_gold_table_survives_k1() {
        let schema = SchemaCatalog {
            db_id: "d".into(),
            tables: vec![
                table("macro_gdp", "", &[("gdp", "")]),
                table("fund_nav", "", &[("nav", "")]),
            ],
            foreign_keys: vec![],
        };
        let config = LinkConfig {
            k_tables: 1,
            ..LinkConfig::default()
        };
        let r = link("latest fund_nav value", &schema, &LexicalScorer, &config).unwrap();
        assert_eq!(r.sub_schema.tables[0].name, "fund_nav");
    }

    #[test]
    fn one_batch_call_per_link() {
        let scorer = Counting {
            inner: LexicalScorer,
            calls: AtomicUsize::new(0),
        };
        link("q", &wide_schema(31, 3), &scorer, &LinkConfig::default()).unwrap();
        assert_eq!(scorer.calls.load(AtomicOrdering::SeqCst), 1);
    }

    #[test]
    fn errors() {
        let schema = stock_schema();
        let bad = LinkConfig {
            k_tables: 0,
            ..LinkConfig::default()
        };
        assert!(matches!(
            link("q", &schema, &LexicalScorer, &bad),
            Err(LinkError::InvalidConfig(_))
        ));
        assert!(matches!(
            link("q", &schema, &Failing, &LinkConfig::default()),
            Err(LinkError::ScorerFailure(_))
        ));
    }

    #[test]
    fn fk_closure() {
        let schema = wide_schema(4, 3);
        let config = LinkConfig {
            k_tables: 2,
            m_columns: 3,
            ..LinkConfig::default()
        };
        let r = link("tab0 tab3", &schema, &LexicalScorer, &config).unwrap();
        let kept: Vec<_> = r.sub_schema.tables.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(kept, ["tab0", "tab3"]);
        assert_eq!(r.sub_schema.foreign_keys, vec![fk(("tab3", "col0"), ("tab0", "col0"))]);
    }

    proptest! {
        #[test]
        fn permutation_invariant(seed in any::<u64>(), question in "[a-z0-9 ]{0,30}") {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let schema = wide_schema(7, 4);
            let mut shuffled = schema.clone();
            shuffled.tables.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let config = LinkConfig::default();
            let a = link(&question, &schema, &LexicalScorer, &config).unwrap();
            let b = link(&question, &shuffled, &LexicalScorer, &config).unwrap();
            prop_assert_eq!(&a.ranked_tables, &b.ranked_tables);
            prop_assert_eq!(&a.ranked_columns, &b.ranked_columns);
            prop_assert_eq!(&a.sub_schema, &b.sub_schema);
        }

        #[test]
        fn scores_in_unit_interval(question in ".{0,40}") {
            let r = link(&question, &stock_schema(), &LexicalScorer, &LinkConfig::default()).unwrap();
            for t in &r.ranked_tables {
                prop_assert!((0.0..=1.0).contains(&t.score));
            }
            for c in r.ranked_columns.iter().flat_map(|rc| &rc.columns) {
                prop_assert!((0.0..=1.0).contains(&c.score));
            }
        }
    }
}
