use std::collections::HashSet;

use super::{AugmentError, AugmentedExample, Example, Provenance, Variant};
use crate::llm::{CompletionBackend, CompletionRequest};
use crate::prompt::{render_template, SYNONYM_TEMPLATE};

pub const SYNONYM_GENERATOR: &str = "synonym-few-shot";
pub const DEFAULT_SYNONYM_COUNT: usize = 3;

/// Lowercased with whitespace runs collapsed, for identity checks.
pub fn normalize_question(q: &str) -> String {
    q.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Strips list markers such as `1.`, `2)`, `-` or `*` from a line.
fn strip_marker(line: &str) -> &str {
    let line = line.trim();
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    let rest = if digits > 0 {
        line[digits..].strip_prefix(['.', ')', ':']).unwrap_or(&line[digits..])
    } else {
        line.strip_prefix(['-', '*', '•']).unwrap_or(line)
    };
    rest.trim()
}

pub fn synonym_prompt(question: &str, count: usize) -> String {
    render_template(
        SYNONYM_TEMPLATE,
        &[("question", question.trim()), ("count", &count.to_string())],
    )
}

/// Parses a model response into at most `count` distinct rewrites, none
/// equal to `question` after normalization.
pub fn parse_synonyms(question: &str, response: &str, count: usize) -> Vec<String> {
    let mut seen: HashSet<String> = HashSet::from([normalize_question(question)]);
    let mut out = Vec::new();
    for line in response.lines() {
        if out.len() == count {
            break;
        }
        let text = strip_marker(line);
        if text.is_empty() || text.ends_with(':') {
            continue;
        }
        if seen.insert(normalize_question(text)) {
            out.push(text.to_string());
        }
    }
    out
}

pub fn generate_synonyms(
    question: &str,
    llm: &dyn CompletionBackend,
    count: usize,
) -> Result<Vec<String>, AugmentError> {
    if count == 0 {
        return Err(AugmentError::InvalidCount);
    }
    if question.trim().is_empty() {
        return Err(AugmentError::MissingField("question"));
    }
    let response = llm.complete(&CompletionRequest::new(synonym_prompt(question, count), 1))?;
    let text = response.samples.first().map(String::as_str).unwrap_or("");
    let found = parse_synonyms(question, text, count);
    if found.is_empty() {
        return Err(AugmentError::EmptyGeneration);
    }
    Ok(found)
}

/// Synonym records for one example: each rewrite paired with the original SQL.
pub fn synonym_examples(example: &Example, questions: &[String]) -> Vec<AugmentedExample> {
    questions
        .iter()
        .map(|q| AugmentedExample {
            variant: Variant::Synonym,
            question: q.clone(),
            target: example.sql.trim().to_string(),
            db_id: example.db_id.clone(),
            provenance: Provenance {
                source_id: example.id.clone(),
                generator: SYNONYM_GENERATOR.into(),
            },
        })
        .collect()
}
