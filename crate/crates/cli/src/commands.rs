use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use finsql_core::calibration::{calibrate as run_calibration, CandidateSet};
use finsql_core::linking::{self, LinkConfig, LinkingExample, DEFAULT_TOKEN_BUDGET};
use finsql_core::pipeline::{self, InferParams, LlmSpec, PipelineConfig, ScorerSpec};
use finsql_core::schema::SchemaCatalog;
use finsql_core::sql::skeleton_of;
use serde::Deserialize;

use crate::output::{print_json, read_json, to_json, write_atomic};

#[derive(Args)]
pub struct InferArgs {
    /// Pipeline configuration file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Natural-language question.
    #[arg(long)]
    question: String,
    /// Schema catalog; overrides the config.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// `mock:<script>` or `remote:<url>`; overrides the config.
    #[arg(long)]
    llm: Option<String>,
    /// `lexical` or `remote:<url>`; overrides the config.
    #[arg(long)]
    scorer: Option<String>,
    /// Tables kept after linking.
    #[arg(long)]
    k_tables: Option<usize>,
    /// Columns kept per retained table.
    #[arg(long)]
    m_columns: Option<usize>,
    /// Number of sampled candidates.
    #[arg(short = 'n', long)]
    samples: Option<u32>,
    /// Recorded in logs; sampling randomness belongs to the model backend.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn infer_config(args: &InferArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let (Some(schema), Some(llm)) = (&args.schema, &args.llm) else {
                bail!("either --config or both --schema and --llm are required");
            };
            serde_json::from_value(serde_json::json!({
                "schema": schema,
                "llm": llm,
            }))?
        }
    };
    if let Some(s) = &args.schema {
        cfg.schema = s.clone();
    }
    if let Some(l) = &args.llm {
        cfg.llm = l.clone();
    }
    if let Some(s) = &args.scorer {
        cfg.scorer = s.clone();
    }
    cfg.k_tables = args.k_tables.unwrap_or(cfg.k_tables);
    cfg.m_columns = args.m_columns.unwrap_or(cfg.m_columns);
    cfg.n = args.samples.unwrap_or(cfg.n);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    if args.out.is_some() {
        cfg.output = args.out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn infer(args: InferArgs) -> anyhow::Result<()> {
    let cfg = infer_config(&args)?;
    let schema = SchemaCatalog::load(&cfg.schema)?;
    let scorer = cfg.scorer.parse::<ScorerSpec>().map_err(anyhow::Error::msg)?.build();
    let llm = cfg
        .llm
        .parse::<LlmSpec>()
        .map_err(anyhow::Error::msg)?
        .build(&cfg.remote)?;
    let params = InferParams {
        link: LinkConfig {
            k_tables: cfg.k_tables,
            m_columns: cfg.m_columns,
            token_budget: DEFAULT_TOKEN_BUDGET,
        },
        n: cfg.n,
        temperature: cfg.temperature,
    };
    tracing::info!(seed = cfg.seed, n = cfg.n, "running inference");
    let report = pipeline::infer(&args.question, &schema, scorer.as_ref(), llm.as_ref(), &params)?;
    let text = to_json(&report)?;
    if let Some(out) = &cfg.output {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// JSON document `{schema_ref, candidates, table_priority?}`.
    #[arg(long)]
    input: PathBuf,
    /// Schema catalog; overrides `schema_ref`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct CalibrateInput {
    #[serde(default)]
    schema_ref: Option<PathBuf>,
    candidates: Vec<String>,
    #[serde(default)]
    table_priority: Option<Vec<String>>,
}

fn relative_to(file: &Path, target: &Path) -> PathBuf {
    file.parent().unwrap_or(Path::new(".")).join(target)
}

pub fn calibrate(args: CalibrateArgs) -> anyhow::Result<()> {
    let input: CalibrateInput = read_json(&args.input)?;
    let schema_path = match (&args.schema, &input.schema_ref) {
        (Some(s), _) => s.clone(),
        (None, Some(r)) => relative_to(&args.input, r),
        (None, None) => bail!("no schema: pass --schema or set schema_ref"),
    };
    let schema = SchemaCatalog::load(&schema_path)?;
    let report = run_calibration(&CandidateSet {
        candidates: input.candidates,
        schema,
        table_priority: input.table_priority,
    })?;
    let text = to_json(&report)?;
    if let Some(out) = &args.out {
        write_atomic(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

pub fn skeleton(sql: &str) -> anyhow::Result<()> {
    let skel = skeleton_of(sql)?;
    print_json(&serde_json::json!({ "skeleton": skel.as_str() }))
}

#[derive(Args)]
pub struct LinkArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    question: String,
    #[arg(long, default_value_t = 3)]
    k_tables: usize,
    #[arg(long, default_value_t = 7)]
    m_columns: usize,
    /// Word budget per table block.
    #[arg(long, default_value_t = DEFAULT_TOKEN_BUDGET)]
    token_budget: usize,
    /// `lexical` or `remote:<url>`.
    #[arg(long, default_value = "lexical")]
    scorer: ScorerSpec,
}

pub fn link(args: LinkArgs) -> anyhow::Result<()> {
    let schema = SchemaCatalog::load(&args.schema)?;
    let cfg = LinkConfig {
        k_tables: args.k_tables,
        m_columns: args.m_columns,
        token_budget: args.token_budget,
    };
    let result = linking::link(&args.question, &schema, args.scorer.build().as_ref(), &cfg)?;
    print_json(&result)
}

#[derive(Args)]
pub struct EvalLinkingArgs {
    #[arg(long)]
    schema: PathBuf,
    /// JSON list of `{question, gold: {table: [columns]}}`.
    #[arg(long)]
    examples: PathBuf,
    #[arg(long, default_value_t = 3)]
    k_tables: usize,
    #[arg(long, default_value_t = 7)]
    m_columns: usize,
    /// Cutoffs at which recall is reported.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    ks: Vec<usize>,
    #[arg(long, default_value = "lexical")]
    scorer: ScorerSpec,
}

pub fn eval_linking(args: EvalLinkingArgs) -> anyhow::Result<()> {
    let schema = SchemaCatalog::load(&args.schema)?;
    let examples: Vec<LinkingExample> = read_json(&args.examples)?;
    let scorer = args.scorer.build();
    let cfg = LinkConfig {
        k_tables: args.k_tables,
        m_columns: args.m_columns,
        token_budget: DEFAULT_TOKEN_BUDGET,
    };
    let mut results = Vec::with_capacity(examples.len());
    for ex in &examples {
        let linked = linking::link(&ex.question, &schema, scorer.as_ref(), &cfg)
            .with_context(|| format!("linking {:?}", ex.question))?;
        results.push((linked, ex.gold_schema(&schema)?));
    }
    print_json(&linking::eval_linking(&results, &args.ks)?)
}
