use serde::{Deserialize, Serialize};

use super::engine::{results_equal, ExecutionEngine};
use super::{extract_sql, reasoning_before_sql, AugmentError, AugmentedExample, Example, Provenance, Variant};
use crate::llm::{CompletionBackend, CompletionRequest};
use crate::prompt::{render_template, COT_TEMPLATE};

pub const COT_GENERATOR: &str = "cot-self-check";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    ExecutionMismatch,
    GeneratedExecutionError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    EmptyExecution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationErrorKind {
    Transport,
    Extraction,
}

/// Result of one CoT attempt. Exactly one per input example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CotOutcome {
    Success { example: AugmentedExample },
    Rejected { generated_sql: String, reason: RejectReason },
    Skipped { reason: SkipReason },
    GenerationError { kind: GenerationErrorKind, message: String },
}

/// The CoT prompt: one-shot exemplar, schema, question and golden SQL, in
/// that order.
pub fn build_cot_prompt(
    example: &Example,
    schema_text: &str,
    one_shot: &str,
) -> Result<String, AugmentError> {
    for (name, value) in [
        ("one_shot", one_shot),
        ("schema", schema_text),
        ("question", example.question.as_str()),
        ("sql", example.sql.as_str()),
    ] {
        if value.trim().is_empty() {
            return Err(AugmentError::MissingField(name));
        }
    }
    Ok(render_template(
        COT_TEMPLATE,
        &[
            ("one_shot", one_shot.trim()),
            ("schema", schema_text.trim_end()),
            ("question", example.question.trim()),
            ("golden_sql", example.sql.trim()),
        ],
    ))
}

/// Executes the golden SQL first; an empty result skips the example
/// without consulting the model. Otherwise the model's SQL is executed and
/// kept only when its rows match the golden rows.
pub fn generate_cot(
    example: &Example,
    schema_text: &str,
    one_shot: &str,
    llm: &dyn CompletionBackend,
    engine: &dyn ExecutionEngine,
) -> Result<CotOutcome, AugmentError> {
    let golden = engine
        .execute(&example.sql, &example.db_id)
        .map_err(|source| AugmentError::GoldenExecution {
            id: example.id.clone(),
            source,
        })?;
    if golden.is_empty() {
        return Ok(CotOutcome::Skipped {
            reason: SkipReason::EmptyExecution,
        });
    }
    let prompt = build_cot_prompt(example, schema_text, one_shot)?;
    let mut request = CompletionRequest::new(prompt, 1);
    request.max_tokens = 1024;
    let response = match llm.complete(&request) {
        Ok(r) => r,
        Err(e) => {
            return Ok(CotOutcome::GenerationError {
                kind: GenerationErrorKind::Transport,
                message: e.to_string(),
            })
        }
    };
    let Some(text) = response.samples.first() else {
        return Ok(CotOutcome::GenerationError {
            kind: GenerationErrorKind::Transport,
            message: "no samples returned".into(),
        });
    };
    let Some(generated) = extract_sql(text) else {
        return Ok(CotOutcome::GenerationError {
            kind: GenerationErrorKind::Extraction,
            message: "no SQL found in response".into(),
        });
    };
    let rows = match engine.execute(&generated, &example.db_id) {
        Ok(rows) => rows,
        Err(_) => {
            return Ok(CotOutcome::Rejected {
                generated_sql: generated,
                reason: RejectReason::GeneratedExecutionError,
            })
        }
    };
    if !results_equal(&golden, &rows) {
        return Ok(CotOutcome::Rejected {
            generated_sql: generated,
            reason: RejectReason::ExecutionMismatch,
        });
    }
    let reasoning = reasoning_before_sql(text);
    let target = if reasoning.is_empty() {
        example.sql.trim().to_string()
    } else {
        format!("{reasoning}\n{}", example.sql.trim())
    };
    Ok(CotOutcome::Success {
        example: AugmentedExample {
            variant: Variant::Cot,
            question: example.question.clone(),
            target,
            db_id: example.db_id.clone(),
            provenance: Provenance {
                source_id: example.id.clone(),
                generator: COT_GENERATOR.into(),
            },
        },
    })
}
