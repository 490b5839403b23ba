//! Linking over the shipped fixtures: block budgets, recall shape and the
//! lexical baseline on questions that quote their gold tables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use finsql_core::linking::{
    build_table_blocks, eval_linking, link, BlockScore, LexicalScorer, LinkConfig, LinkError,
    LinkingExample, SchemaScorer, TableBlock, DEFAULT_TOKEN_BUDGET,
};
use finsql_core::schema::SchemaCatalog;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/linking")
}

fn load() -> (SchemaCatalog, Vec<LinkingExample>) {
    let schema = SchemaCatalog::load(fixtures().join("schema10.json")).unwrap();
    let text = std::fs::read_to_string(fixtures().join("questions10.json")).unwrap();
    (schema, serde_json::from_str(&text).unwrap())
}

/// Gives gold tables and columns 1 and everything else 0.
struct Oracle(BTreeMap<String, BTreeMap<String, Vec<String>>>);

impl SchemaScorer for Oracle {
    fn score_batch(&self, question: &str, blocks: &[TableBlock]) -> Result<Vec<BlockScore>, LinkError> {
        let gold = &self.0[question];
        Ok(blocks
            .iter()
            .map(|b| {
                let cols = gold.get(&b.table);
                BlockScore {
                    table_score: if cols.is_some() { 1.0 } else { 0.0 },
                    column_scores: b
                        .columns
                        .iter()
                        .map(|c| match cols {
                            Some(cs) if cs.contains(&c.name) => 1.0,
                            _ => 0.0,
                        })
                        .collect(),
                }
            })
            .collect())
    }
}

fn run(scorer: &dyn SchemaScorer, k: usize, ks: &[usize]) -> finsql_core::linking::LinkingMetrics {
    let (schema, examples) = load();
    let cfg = LinkConfig { k_tables: k, ..LinkConfig::default() };
    let results: Vec<_> = examples
        .iter()
        .map(|e| {
            let r = link(&e.question, &schema, scorer, &cfg).unwrap();
            (r, e.gold_schema(&schema).unwrap())
        })
        .collect();
    eval_linking(&results, ks).unwrap()
}

#[test]
fn wide_schema_blocks_fit_the_budget() {
    let schema = SchemaCatalog::load(fixtures().join("schema31.json")).unwrap();
    let blocks = build_table_blocks(&schema, DEFAULT_TOKEN_BUDGET);
    assert_eq!(blocks.len(), 31);
    for b in &blocks {
        assert!(b.text.split_whitespace().count() <= DEFAULT_TOKEN_BUDGET, "{}", b.table);
        assert!(b.omitted_columns.is_empty());
    }
}

#[test]
fn lexical_recall_at_three_is_perfect() {
    let m = run(&LexicalScorer, 3, &[1, 3]);
    assert_eq!(m.examples, 12);
    assert_eq!(m.tables.recall[&3], 1.0);
}

#[test]
fn recall_is_monotone_and_complete_at_table_count() {
    let ks: Vec<usize> = (1..=10).collect();
    let m = run(&LexicalScorer, 10, &ks);
    let r: Vec<f64> = ks.iter().map(|k| m.tables.recall[k]).collect();
    assert!(r.windows(2).all(|w| w[0] <= w[1]), "{r:?}");
    assert_eq!(r[9], 1.0);
}

#[test]
fn perfect_scorer_has_unit_auc() {
    let (_, examples) = load();
    let oracle = Oracle(examples.iter().map(|e| (e.question.clone(), e.gold.clone())).collect());
    let m = run(&oracle, 3, &[3]);
    assert_eq!(m.tables.auc, Some(1.0));
    assert_eq!(m.columns.auc, Some(1.0));
    assert_eq!(m.tables.recall[&3], 1.0);
}
