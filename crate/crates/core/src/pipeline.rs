//! End-to-end inference: link the schema, build the prompt from the linked
//! sub-schema, sample candidates and calibrate them.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{calibrate, CalibrationError, CalibrationReport, CandidateSet};
use crate::linking::{link, LexicalScorer, LinkConfig, LinkError, RemoteScorer, SchemaScorer};
use crate::llm::{
    sample_candidates, CompletionBackend, CompletionRequest, LlmError, MockBackend, RemoteBackend,
    RemoteConfig,
};
use crate::prompt::infer_prompt;
use crate::schema::SchemaCatalog;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// `lexical` or `remote:<url>`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ScorerSpec {
    #[default]
    Lexical,
    Remote(String),
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            _ if s == "lexical" => Ok(Self::Lexical),
            Some(("remote", url)) if !url.is_empty() => Ok(Self::Remote(url.to_string())),
            _ => Err(format!("scorer must be `lexical` or `remote:<url>`, got {s:?}")),
        }
    }
}

impl ScorerSpec {
    pub fn build(&self) -> Box<dyn SchemaScorer> {
        match self {
            Self::Lexical => Box::new(LexicalScorer),
            Self::Remote(url) => Box::new(RemoteScorer::new(url.clone())),
        }
    }
}

/// `mock:<script path>` or `remote:<url>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LlmSpec {
    Mock(PathBuf),
    Remote(String),
}

impl FromStr for LlmSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            Some(("mock", path)) if !path.is_empty() => Ok(Self::Mock(PathBuf::from(path))),
            Some(("remote", url)) if !url.is_empty() => Ok(Self::Remote(url.to_string())),
            _ => Err(format!("llm must be `mock:<script>` or `remote:<url>`, got {s:?}")),
        }
    }
}

impl LlmSpec {
    /// Relative mock script paths are taken relative to `base`.
    pub fn resolve(self, base: &Path) -> Self {
        match self {
            Self::Mock(p) if p.is_relative() => Self::Mock(base.join(p)),
            other => other,
        }
    }

    /// Builds the backend. `remote` supplies everything but the endpoint.
    pub fn build(&self, remote: &RemoteConfig) -> Result<Box<dyn CompletionBackend>, PipelineError> {
        match self {
            Self::Mock(path) => MockBackend::load(path)
                .map(|m| Box::new(m) as Box<dyn CompletionBackend>)
                .map_err(|e| PipelineError::Config(format!("mock script {}: {e}", path.display()))),
            Self::Remote(url) => Ok(Box::new(RemoteBackend::new(RemoteConfig {
                endpoint: url.clone(),
                ..remote.clone()
            }))),
        }
    }
}

fn default_k() -> usize {
    3
}

fn default_m() -> usize {
    7
}

fn default_n() -> u32 {
    5
}

fn default_temperature() -> f64 {
    0.8
}

/// JSON configuration for `infer`. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema: PathBuf,
    #[serde(default = "lexical")]
    pub scorer: String,
    #[serde(default = "default_k")]
    pub k_tables: usize,
    #[serde(default = "default_m")]
    pub m_columns: usize,
    pub llm: String,
    #[serde(default)]
    pub remote: RemoteConfig,
    #[serde(default = "default_n")]
    pub n: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn lexical() -> String {
    "lexical".into()
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.schema = base.join(&cfg.schema);
        cfg.output = cfg.output.map(|o| base.join(o));
        if let Ok(LlmSpec::Mock(p)) = cfg.llm.parse::<LlmSpec>() {
            if p.is_relative() {
                cfg.llm = format!("mock:{}", base.join(p).display());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.n == 0 {
            return Err(PipelineError::Config("n must be at least 1".into()));
        }
        if self.k_tables == 0 || self.m_columns == 0 {
            return Err(PipelineError::Config("k_tables and m_columns must be at least 1".into()));
        }
        self.scorer.parse::<ScorerSpec>().map_err(PipelineError::Config)?;
        self.llm.parse::<LlmSpec>().map_err(PipelineError::Config)?;
        Ok(())
    }
}

/// Parameters of one inference run.
#[derive(Debug, Clone)]
pub struct InferParams {
    pub link: LinkConfig,
    pub n: u32,
    pub temperature: f64,
}

impl Default for InferParams {
    fn default() -> Self {
        Self {
            link: LinkConfig::default(),
            n: 5,
            temperature: 0.8,
        }
    }
}

/// Runs link, prompt, sample and calibrate for one question.
pub fn infer(
    question: &str,
    schema: &SchemaCatalog,
    scorer: &dyn SchemaScorer,
    llm: &dyn CompletionBackend,
    params: &InferParams,
) -> Result<CalibrationReport, PipelineError> {
    let linked = link(question, schema, scorer, &params.link)?;
    let prompt = infer_prompt(&linked.sub_schema.prompt_text(), question);
    let mut request = CompletionRequest::new(prompt, params.n);
    request.temperature = params.temperature;
    let candidates = sample_candidates(llm, &request)?;
    tracing::debug!(n = candidates.len(), "sampled candidates");
    let set = CandidateSet {
        candidates,
        schema: schema.clone(),
        table_priority: Some(linked.table_priority()),
    };
    Ok(calibrate(&set)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptEntry;
    use crate::schema::fixtures::stock_schema;

    #[test]
    fn specs_parse() {
        assert_eq!("lexical".parse(), Ok(ScorerSpec::Lexical));
        assert_eq!("remote:http://x".parse(), Ok(ScorerSpec::Remote("http://x".into())));
        assert!("cross".parse::<ScorerSpec>().is_err());
        assert_eq!("mock:a.json".parse(), Ok(LlmSpec::Mock("a.json".into())));
        assert!("remote:".parse::<LlmSpec>().is_err());
    }

    #[test]
    fn three_compatible_samples_form_one_cluster() {
        let mock = MockBackend::new(vec![
            ScriptEntry::text("SQL: SELECT chinameabbr FROM lc_sharestru WHERE companycode = 1"),
            ScriptEntry::text("```sql\nSELECT chinameabbr FROM lc_sharestru WHERE companycode == 1;\n```"),
            ScriptEntry::text("SELECT chinameabbr FROM lc_sharestru WHERE companycode = 1"),
        ]);
        let params = InferParams { n: 3, ..Default::default() };
        let report = infer("company abbreviation", &stock_schema(), &LexicalScorer, &mock, &params).unwrap();
        assert_eq!(report.clusters.len(), 1);
        assert_eq!(report.clusters[0].members, [0, 1, 2]);
        assert_eq!(report.final_sql, "SELECT chinameabbr FROM lc_sharestru WHERE companycode = 1");
    }

    #[test]
    fn transport_failure_surfaces() {
        let mock = MockBackend::new(vec![ScriptEntry::error("timeout")]);
        let params = InferParams { n: 1, ..Default::default() };
        let err = infer("q", &stock_schema(), &LexicalScorer, &mock, &params).unwrap_err();
        assert!(matches!(err, PipelineError::Llm(LlmError::Timeout { .. })));
    }

    #[test]
    fn all_rejected_surfaces() {
        let mock = MockBackend::new(vec![ScriptEntry::text("no sql")]);
        let params = InferParams { n: 1, ..Default::default() };
        let err = infer("q", &stock_schema(), &LexicalScorer, &mock, &params).unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Calibration(CalibrationError::AllCandidatesRejected { .. })
        ));
    }
}
