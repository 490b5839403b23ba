//! Training-data augmentation: reasoning traces kept only when their SQL
//! executes to the golden result, paraphrased questions, and rule-based
//! skeleton-then-SQL targets, mixed with a seeded shuffle.

mod cot;
mod engine;
mod extract;
mod synonym;

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{run_bounded, CompletionBackend, LlmError};
use crate::sql::{skeleton_of, SqlError};

pub use cot::{
    build_cot_prompt, generate_cot, CotOutcome, GenerationErrorKind, RejectReason, SkipReason,
    COT_GENERATOR,
};
pub use engine::{results_equal, EngineError, ExecutionEngine, Row, SqliteEngine, Value};
pub use extract::{extract_sql, reasoning_before_sql};
pub use synonym::{
    generate_synonyms, normalize_question, parse_synonyms, synonym_examples, synonym_prompt,
    DEFAULT_SYNONYM_COUNT, SYNONYM_GENERATOR,
};

pub const SKELETON_GENERATOR: &str = "skeleton-rule";

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("count must be at least 1")]
    InvalidCount,
    #[error("model response yielded no usable lines")]
    EmptyGeneration,
    #[error("generation failed: {0}")]
    Generation(#[from] LlmError),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("golden SQL of example {id:?} failed: {source}")]
    GoldenExecution { id: String, source: EngineError },
    #[error("line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A source record: question, golden SQL and database id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    #[serde(default)]
    pub id: String,
    pub question: String,
    pub sql: String,
    pub db_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Cot,
    Synonym,
    Skeleton,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Cot => "cot",
            Variant::Synonym => "synonym",
            Variant::Skeleton => "skeleton",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub variant: Variant,
    pub question: String,
    pub target: String,
    pub db_id: String,
    pub provenance: Provenance,
}

/// Skeleton line followed by the original SQL. No model involved.
pub fn make_skeleton_example(example: &Example) -> Result<AugmentedExample, AugmentError> {
    let sql = example.sql.trim();
    let skeleton = skeleton_of(sql)?;
    Ok(AugmentedExample {
        variant: Variant::Skeleton,
        question: example.question.clone(),
        target: format!("{skeleton}\n{sql}"),
        db_id: example.db_id.clone(),
        provenance: Provenance {
            source_id: example.id.clone(),
            generator: SKELETON_GENERATOR.into(),
        },
    })
}

/// Concatenates every dataset and applies a seeded shuffle.
pub fn mix_tasks(datasets: Vec<Vec<AugmentedExample>>, seed: u64) -> Vec<AugmentedExample> {
    let mut all: Vec<AugmentedExample> = datasets.into_iter().flatten().collect();
    all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    all
}

/// CoT outcome rates in percent, rounded to two decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationStats {
    pub total: usize,
    pub success: f64,
    pub failure: f64,
    pub empty: f64,
}

fn percent(count: usize, total: usize) -> f64 {
    (count as f64 * 10_000.0 / total as f64).round() / 100.0
}

/// Rejected and generation errors both count as failure.
pub fn augmentation_stats(outcomes: &[CotOutcome]) -> AugmentationStats {
    let total = outcomes.len();
    if total == 0 {
        return AugmentationStats { total, success: 0.0, failure: 0.0, empty: 0.0 };
    }
    let (mut success, mut empty) = (0, 0);
    for o in outcomes {
        match o {
            CotOutcome::Success { .. } => success += 1,
            CotOutcome::Skipped { .. } => empty += 1,
            CotOutcome::Rejected { .. } | CotOutcome::GenerationError { .. } => {}
        }
    }
    AugmentationStats {
        total,
        success: percent(success, total),
        failure: percent(total - success - empty, total),
        empty: percent(empty, total),
    }
}

/// Runs CoT generation over `examples` with at most the backend's
/// in-flight bound active, returning outcomes in input order.
pub fn generate_cot_batch(
    examples: &[Example],
    schema_text: &(dyn Fn(&str) -> String + Sync),
    one_shot: &str,
    llm: &dyn CompletionBackend,
    engine: &dyn ExecutionEngine,
) -> Vec<Result<CotOutcome, AugmentError>> {
    run_bounded(examples, llm.max_in_flight(), |ex| {
        generate_cot(ex, &schema_text(&ex.db_id), one_shot, llm, engine)
    })
}

/// Reads a JSON-lines file of examples. Blank lines are skipped; a missing
/// id becomes `line-<n>`.
pub fn read_examples(path: impl AsRef<Path>) -> Result<Vec<Example>, AugmentError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut ex: Example = serde_json::from_str(&line).map_err(|e| AugmentError::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        if ex.id.is_empty() {
            ex.id = format!("line-{}", i + 1);
        }
        out.push(ex);
    }
    Ok(out)
}

/// Writes one JSON record per line.
pub fn write_jsonl<T: Serialize>(mut w: impl Write, records: &[T]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str, sql: &str) -> Example {
        Example {
            id: id.into(),
            question: format!("question {id}"),
            sql: sql.into(),
            db_id: "d".into(),
        }
    }

    fn aug(variant: Variant, i: usize) -> AugmentedExample {
        AugmentedExample {
            variant,
            question: format!("q{i}"),
            target: format!("t{i}"),
            db_id: "d".into(),
            provenance: Provenance { source_id: i.to_string(), generator: "g".into() },
        }
    }

    #[test]
    fn skeleton_target() {
        let a = make_skeleton_example(&ex("1", "SELECT a FROM t")).unwrap();
        assert_eq!(a.target, "select _ from _\nSELECT a FROM t");
        assert_eq!(a.variant, Variant::Skeleton);
        let nested = "SELECT a FROM t WHERE b > (SELECT AVG(b) FROM t)";
        let a = make_skeleton_example(&ex("2", nested)).unwrap();
        assert_eq!(a.target, format!("{}\n{nested}", skeleton_of(nested).unwrap()));
        assert!(make_skeleton_example(&ex("3", "SELEC a")).is_err());
    }

    #[test]
    fn mix_preserves_counts_and_is_seeded() {
        let sets = vec![
            (0..10).map(|i| aug(Variant::Cot, i)).collect::<Vec<_>>(),
            (0..20).map(|i| aug(Variant::Synonym, i)).collect(),
            (0..30).map(|i| aug(Variant::Skeleton, i)).collect(),
        ];
        let a = mix_tasks(sets.clone(), 7);
        assert_eq!(a.len(), 60);
        for (v, n) in [(Variant::Cot, 10), (Variant::Synonym, 20), (Variant::Skeleton, 30)] {
            assert_eq!(a.iter().filter(|x| x.variant == v).count(), n);
        }
        assert_eq!(a, mix_tasks(sets.clone(), 7));
        let b = mix_tasks(sets.clone(), 8);
        assert_ne!(a, b);
        let (mut sa, mut sb) = (a.clone(), b.clone());
        sa.sort();
        sb.sort();
        assert_eq!(sa, sb);
    }

    #[test]
    fn stats_by_direct_count() {
        let success = CotOutcome::Success { example: aug(Variant::Cot, 0) };
        let rejected = CotOutcome::Rejected {
            generated_sql: "SELECT 1".into(),
            reason: RejectReason::ExecutionMismatch,
        };
        let skipped = CotOutcome::Skipped { reason: SkipReason::EmptyExecution };
        let mut outcomes = vec![success.clone(); 69];
        outcomes.extend(vec![rejected; 18]);
        outcomes.extend(vec![skipped; 13]);
        let s = augmentation_stats(&outcomes);
        assert_eq!((s.success, s.failure, s.empty), (69.0, 18.0, 13.0));
        let s = augmentation_stats(&[success.clone(), success]);
        assert_eq!((s.success, s.failure, s.empty), (100.0, 0.0, 0.0));
        let err = CotOutcome::GenerationError {
            kind: GenerationErrorKind::Transport,
            message: String::new(),
        };
        assert_eq!(augmentation_stats(&[err]).failure, 100.0);
    }

    #[test]
    fn stats_keep_two_decimals() {
        let success = CotOutcome::Success { example: aug(Variant::Cot, 0) };
        let skipped = CotOutcome::Skipped { reason: SkipReason::EmptyExecution };
        let outcomes = vec![success, skipped.clone(), skipped];
        let s = augmentation_stats(&outcomes);
        assert_eq!((s.success, s.empty), (33.33, 66.67));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ex.jsonl");
        std::fs::write(
            &path,
            "{\"question\":\"q\",\"sql\":\"SELECT 1\",\"db_id\":\"d\"}\n\n{\"id\":\"x\",\"question\":\"r\",\"sql\":\"SELECT 2\",\"db_id\":\"d\"}\n",
        )
        .unwrap();
        let got = read_examples(&path).unwrap();
        assert_eq!(got[0].id, "line-1");
        assert_eq!(got[1].id, "x");
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[aug(Variant::Skeleton, 1)]).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert!(line.starts_with("{\"variant\":\"skeleton\""));
        assert!(line.ends_with("}\n"));
    }
}
