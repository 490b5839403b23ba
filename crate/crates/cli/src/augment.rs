use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use finsql_core::augment::{
    augmentation_stats, generate_cot_batch, generate_synonyms, make_skeleton_example, mix_tasks,
    read_examples, synonym_examples, write_jsonl, AugmentError, AugmentationStats, AugmentedExample,
    CotOutcome, SqliteEngine, DEFAULT_SYNONYM_COUNT,
};
use finsql_core::llm::RemoteConfig;
use finsql_core::pipeline::LlmSpec;
use finsql_core::prompt::COT_ONE_SHOT;
use finsql_core::schema::SchemaCatalog;
use finsql_core::sql::parse_sql;
use serde::Serialize;

use crate::output::{print_json, to_json, write_atomic};

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Cot,
    Synonym,
    Skeleton,
}

#[derive(Args)]
pub struct AugmentArgs {
    /// JSON-lines file of `{id?, question, sql, db_id}` records.
    #[arg(long)]
    input: PathBuf,
    /// Schema catalog shown to the model in reasoning prompts.
    #[arg(long)]
    schema: PathBuf,
    /// Fixture database used by the execution self-check.
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "cot,synonym,skeleton")]
    tasks: Vec<Task>,
    /// `mock:<script>` or `remote:<url>`.
    #[arg(long)]
    llm: Option<LlmSpec>,
    /// Seed of the final task-mixing shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Paraphrases requested per question.
    #[arg(long, default_value_t = DEFAULT_SYNONYM_COUNT)]
    synonyms: usize,
    /// Replacement one-shot exemplar for reasoning prompts.
    #[arg(long)]
    one_shot: Option<PathBuf>,
    /// Directory receiving the per-task files, `mixed.jsonl` and `stats.json`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Serialize)]
struct Report {
    examples: usize,
    cot: Option<AugmentationStats>,
    counts: BTreeMap<&'static str, usize>,
    synonym_failures: usize,
}

pub fn run(args: AugmentArgs) -> anyhow::Result<()> {
    let examples = read_examples(&args.input)?;
    for ex in &examples {
        parse_sql(&ex.sql).with_context(|| format!("example {:?} has invalid SQL", ex.id))?;
    }
    let schema = SchemaCatalog::load(&args.schema)?;
    let needs_llm = args.tasks.iter().any(|t| matches!(t, Task::Cot | Task::Synonym));
    let llm = match (&args.llm, needs_llm) {
        (Some(spec), true) => Some(spec.build(&RemoteConfig::default())?),
        (None, true) => bail!("--llm is required for the cot and synonym tasks"),
        _ => None,
    };

    let mut datasets: BTreeMap<&'static str, Vec<AugmentedExample>> = BTreeMap::new();
    let mut outcomes: Vec<CotOutcome> = Vec::new();
    let mut synonym_failures = 0;

    if args.tasks.contains(&Task::Cot) {
        let db = args.db.as_ref().context("--db is required for the cot task")?;
        let engine = SqliteEngine::load(db)?;
        let one_shot = match &args.one_shot {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => COT_ONE_SHOT.to_string(),
        };
        let schema_text = schema.prompt_text();
        let llm = llm.as_deref().expect("llm built above");
        for result in generate_cot_batch(&examples, &|_| schema_text.clone(), &one_shot, llm, &engine) {
            outcomes.push(result?);
        }
        let successes = outcomes.iter().filter_map(|o| match o {
            CotOutcome::Success { example } => Some(example.clone()),
            _ => None,
        });
        datasets.insert("cot", successes.collect());
    }

    if args.tasks.contains(&Task::Synonym) {
        let llm = llm.as_deref().expect("llm built above");
        let mut out = Vec::new();
        for ex in &examples {
            match generate_synonyms(&ex.question, llm, args.synonyms) {
                Ok(qs) => out.extend(synonym_examples(ex, &qs)),
                Err(e @ (AugmentError::EmptyGeneration | AugmentError::Generation(_))) => {
                    tracing::warn!(id = %ex.id, "no synonyms: {e}");
                    synonym_failures += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        datasets.insert("synonym", out);
    }

    if args.tasks.contains(&Task::Skeleton) {
        let out = examples
            .iter()
            .map(make_skeleton_example)
            .collect::<Result<Vec<_>, _>>()?;
        datasets.insert("skeleton", out);
    }

    let report = Report {
        examples: examples.len(),
        cot: args.tasks.contains(&Task::Cot).then(|| augmentation_stats(&outcomes)),
        counts: datasets.iter().map(|(k, v)| (*k, v.len())).collect(),
        synonym_failures,
    };
    let mixed = mix_tasks(datasets.values().cloned().collect(), args.seed);

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let jsonl = |records: &[AugmentedExample]| -> anyhow::Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, records)?;
        Ok(buf)
    };
    for (name, records) in &datasets {
        write_atomic(&args.out_dir.join(format!("{name}.jsonl")), &jsonl(records)?)?;
    }
    if !outcomes.is_empty() {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &outcomes)?;
        write_atomic(&args.out_dir.join("cot_outcomes.jsonl"), &buf)?;
    }
    write_atomic(&args.out_dir.join("mixed.jsonl"), &jsonl(&mixed)?)?;
    write_atomic(&args.out_dir.join("stats.json"), to_json(&report)?.as_bytes())?;
    print_json(&report)
}
