//! Recall@k and ROC AUC for linking results against gold sub-schemas.
//!
//! Table recall@k counts an example as a hit when every gold table ranks
//! within the first k. Column recall@k requires every gold column to rank
//! within the first k columns of its table, and that table to be retained.
//! AUC pools `(score, relevant)` pairs across examples; a gold column of a
//! table that was not retained joins the pool as a positive with score 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LinkResult, ScoredItem};
use crate::schema::{SchemaCatalog, Table};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("evaluation set is empty")]
    EmptyEvaluationSet,
    #[error("gold table `{0}` is not in the ranked catalog")]
    UnknownGoldTable(String),
    #[error("gold column `{table}.{column}` is not in the ranked catalog")]
    UnknownGoldColumn { table: String, column: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub recall: BTreeMap<usize, f64>,
    /// `None` when the pooled set lacks positives or negatives.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkingMetrics {
    pub examples: usize,
    pub tables: ItemMetrics,
    pub columns: ItemMetrics,
}

fn rank_of(items: &[ScoredItem], name: &str) -> Option<usize> {
    items.iter().position(|i| i.name.eq_ignore_ascii_case(name))
}

/// Mann-Whitney U statistic normalized to `[0, 1]`, ties counted half.
pub fn roc_auc(pairs: &[(f64, bool)]) -> Option<f64> {
    let n_pos = pairs.iter().filter(|p| p.1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mean_rank = (i + 1 + j) as f64 / 2.0;
        rank_sum += mean_rank * sorted[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// A question with its gold tables, each mapped to its gold columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkingExample {
    pub question: String,
    pub gold: BTreeMap<String, Vec<String>>,
}

impl LinkingExample {
    /// The gold sub-schema, with table and column records copied from
    /// `schema`.
    pub fn gold_schema(&self, schema: &SchemaCatalog) -> Result<SchemaCatalog, EvalError> {
        let mut tables = Vec::with_capacity(self.gold.len());
        for (name, cols) in &self.gold {
            let t = schema
                .table(name)
                .ok_or_else(|| EvalError::UnknownGoldTable(name.clone()))?;
            let columns = cols
                .iter()
                .map(|c| {
                    t.column(c).cloned().ok_or_else(|| EvalError::UnknownGoldColumn {
                        table: name.clone(),
                        column: c.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            tables.push(Table {
                name: t.name.clone(),
                description: t.description.clone(),
                columns,
            });
        }
        Ok(SchemaCatalog {
            db_id: schema.db_id.clone(),
            tables,
            foreign_keys: Vec::new(),
        })
    }
}

pub fn eval_linking(
    results: &[(LinkResult, SchemaCatalog)],
    ks: &[usize],
) -> Result<LinkingMetrics, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyEvaluationSet);
    }
    let mut table_hits: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
    let mut column_hits = table_hits.clone();
    let mut table_pairs = Vec::new();
    let mut column_pairs = Vec::new();

    for (result, gold) in results {
        let mut table_ranks = Vec::new();
        let mut column_ranks = Vec::new();
        for gt in &gold.tables {
            let rank = rank_of(&result.ranked_tables, &gt.name)
                .ok_or_else(|| EvalError::UnknownGoldTable(gt.name.clone()))?;
            table_ranks.push(rank);
            let retained = result
                .ranked_columns
                .iter()
                .find(|rc| rc.table.eq_ignore_ascii_case(&gt.name));
            for gc in &gt.columns {
                match retained {
                    Some(rc) => {
                        let r = rank_of(&rc.columns, &gc.name).ok_or_else(|| {
                            EvalError::UnknownGoldColumn {
                                table: gt.name.clone(),
                                column: gc.name.clone(),
                            }
                        })?;
                        column_ranks.push(Some(r));
                    }
                    None => {
                        column_ranks.push(None);
                        column_pairs.push((0.0, true));
                    }
                }
            }
        }
        for (k, hits) in table_hits.iter_mut() {
            if table_ranks.iter().all(|&r| r < *k) {
                *hits += 1;
            }
        }
        for (k, hits) in column_hits.iter_mut() {
            if column_ranks.iter().all(|r| r.is_some_and(|r| r < *k)) {
                *hits += 1;
            }
        }

        let gold_table = |name: &str| gold.table(name);
        for t in &result.ranked_tables {
            table_pairs.push((t.score, gold_table(&t.name).is_some()));
        }
        for rc in &result.ranked_columns {
            let gt = gold_table(&rc.table);
            for c in &rc.columns {
                column_pairs.push((c.score, gt.is_some_and(|t| t.has_column(&c.name))));
            }
        }
    }

    let n = results.len() as f64;
    let recall = |hits: BTreeMap<usize, usize>| hits.into_iter().map(|(k, h)| (k, h as f64 / n)).collect();
    Ok(LinkingMetrics {
        examples: results.len(),
        tables: ItemMetrics {
            recall: recall(table_hits),
            auc: roc_auc(&table_pairs),
        },
        columns: ItemMetrics {
            recall: recall(column_hits),
            auc: roc_auc(&column_pairs),
        },
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::linking::{link, LexicalScorer, LinkConfig, RankedColumns};
    use crate::schema::fixtures::*;

    /// Independent oracle: fraction of positive/negative pairs ordered
    /// correctly, ties half.
    fn pairwise_auc(pairs: &[(f64, bool)]) -> f64 {
        let pos: Vec<f64> = pairs.iter().filter(|p| p.1).map(|p| p.0).collect();
        let neg: Vec<f64> = pairs.iter().filter(|p| !p.1).map(|p| p.0).collect();
        let mut wins = 0.0;
        for p in &pos {
            for q in &neg {
                if p > q {
                    wins += 1.0;
                } else if p == q {
                    wins += 0.5;
                }
            }
        }
        wins / (pos.len() * neg.len()) as f64
    }

    fn item(name: &str, score: f64) -> ScoredItem {
        ScoredItem {
            name: name.into(),
            score,
        }
    }

    fn result(tables: &[(&str, f64)]) -> LinkResult {
        LinkResult {
            ranked_tables: tables.iter().map(|(n, s)| item(n, *s)).collect(),
            ranked_columns: vec![],
            sub_schema: SchemaCatalog {
                db_id: "d".into(),
                tables: vec![],
                foreign_keys: vec![],
            },
        }
    }

    fn gold(tables: &[&str]) -> SchemaCatalog {
        SchemaCatalog {
            db_id: "d".into(),
            tables: tables.iter().map(|t| table(t, "", &[])).collect(),
            foreign_keys: vec![],
        }
    }

    #[test]
    fn hand_built_three_examples() {
        // ex1: gold a at rank 0. ex2: gold b at rank 1. ex3: gold {a, c} at
        // ranks 0 and 2.
        let set = vec![
            (result(&[("a", 0.9), ("b", 0.4), ("c", 0.1)]), gold(&["a"])),
            (result(&[("a", 0.7), ("b", 0.6), ("c", 0.2)]), gold(&["b"])),
            (result(&[("a", 0.8), ("b", 0.5), ("c", 0.5)]), gold(&["a", "c"])),
        ];
        let m = eval_linking(&set, &[1, 2, 3]).unwrap();
        assert_eq!(m.tables.recall[&1], 1.0 / 3.0);
        assert_eq!(m.tables.recall[&2], 2.0 / 3.0);
        assert_eq!(m.tables.recall[&3], 1.0);
        // Positives 0.9, 0.6, 0.8, 0.5; negatives 0.4, 0.1, 0.7, 0.2, 0.5.
        // Pairs won: 0.9→5, 0.6→4, 0.8→5, 0.5→3.5 (tie with 0.5); 17.5 / 20.
        assert_eq!(m.tables.auc, Some(17.5 / 20.0));
        let pairs: Vec<(f64, bool)> = set
            .iter()
            .flat_map(|(r, g)| {
                r.ranked_tables
                    .iter()
                    .map(|t| (t.score, g.table(&t.name).is_some()))
                    .collect::<Vec<_>>()
            })
            .collect();
        assert_eq!(m.tables.auc, Some(pairwise_auc(&pairs)));
    }

    #[test]
    fn perfect_scorer_auc_is_one() {
        let set = vec![
            (result(&[("a", 1.0), ("b", 0.0), ("c", 0.0)]), gold(&["a"])),
            (result(&[("b", 1.0), ("c", 1.0), ("a", 0.0)]), gold(&["b", "c"])),
        ];
        assert_eq!(eval_linking(&set, &[1]).unwrap().tables.auc, Some(1.0));
    }

    #[test]
    fn column_metrics_and_unretained_gold_columns() {
        let mut r = result(&[("t", 0.9), ("u", 0.1)]);
        r.ranked_columns = vec![RankedColumns {
            table: "t".into(),
            columns: vec![item("x", 0.8), item("y", 0.3)],
        }];
        let g = SchemaCatalog {
            db_id: "d".into(),
            tables: vec![table("t", "", &[("x", "")]), table("u", "", &[("z", "")])],
            foreign_keys: vec![],
        };
        let m = eval_linking(&[(r.clone(), g)], &[1, 2]).unwrap();
        // u.z is gold but u was not retained: recall misses at every k.
        assert_eq!(m.columns.recall[&2], 0.0);
        // positives 0.8 and 0 (u.z); negative 0.3: 1 + 0 of 2 pairs.
        assert_eq!(m.columns.auc, Some(0.5));

        let g = SchemaCatalog {
            db_id: "d".into(),
            tables: vec![table("t", "", &[("y", "")])],
            foreign_keys: vec![],
        };
        let m = eval_linking(&[(r, g)], &[1, 2]).unwrap();
        assert_eq!(m.columns.recall[&1], 0.0);
        assert_eq!(m.columns.recall[&2], 1.0);
    }

    #[test]
    fn errors() {
        assert_eq!(eval_linking(&[], &[1]), Err(EvalError::EmptyEvaluationSet));
        let set = vec![(result(&[("a", 1.0)]), gold(&["zz"]))];
        assert_eq!(
            eval_linking(&set, &[1]),
            Err(EvalError::UnknownGoldTable("zz".into()))
        );
    }

    #[test]
    fn full_k_gives_full_table_recall() {
        let schema = stock_schema();
        let config = LinkConfig::default();
        let r = link("unrelated words", &schema, &LexicalScorer, &config).unwrap();
        let m = eval_linking(&[(r, gold(&["lc_exgindustry"]))], &[schema.tables.len()]).unwrap();
        assert_eq!(m.tables.recall[&2], 1.0);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise_oracle(
            pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..40)
        ) {
            let pairs: Vec<(f64, bool)> = pairs.into_iter().map(|(s, g)| (s as f64 / 5.0, g)).collect();
            let pos = pairs.iter().filter(|p| p.1).count();
            match roc_auc(&pairs) {
                None => prop_assert!(pos == 0 || pos == pairs.len()),
                Some(a) => prop_assert!((a - pairwise_auc(&pairs)).abs() < 1e-12),
            }
        }

        #[test]
        fn recall_nondecreasing_in_k(
            examples in prop::collection::vec(
                (prop::collection::vec(0u8..10, 5), prop::collection::btree_set(0usize..5, 1..4)),
                1..8,
            )
        ) {
            let names = ["a", "b", "c", "d", "e"];
            let set: Vec<_> = examples
                .iter()
                .map(|(scores, gold_idx)| {
                    let mut items: Vec<ScoredItem> = names
                        .iter()
                        .zip(scores)
                        .map(|(n, s)| item(n, *s as f64 / 9.0))
                        .collect();
                    items.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.name.cmp(&b.name)));
                    let mut r = result(&[]);
                    r.ranked_tables = items;
                    let g: Vec<&str> = gold_idx.iter().map(|&i| names[i]).collect();
                    (r, gold(&g))
                })
                .collect();
            let ks: Vec<usize> = (1..=5).collect();
            let m = eval_linking(&set, &ks).unwrap();
            for w in ks.windows(2) {
                prop_assert!(m.tables.recall[&w[0]] <= m.tables.recall[&w[1]]);
            }
            prop_assert_eq!(m.tables.recall[&5], 1.0);
        }
    }
}
