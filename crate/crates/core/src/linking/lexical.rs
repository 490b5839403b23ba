//! Character-trigram baseline scorer.
//!
//! Text is lowercased and split into tokens of letters, digits and `_`; each
//! token is padded with `#` on both sides and cut into character trigrams.
//! An item's score is the mean of two containments, `|Q ∩ N| / |N|` over
//! the name trigrams and `|Q ∩ F| / |F|` over the name plus description.

use std::collections::HashSet;

use rayon::prelude::*;

use super::blocks::TableBlock;
use super::{BlockScore, LinkError, SchemaScorer};

pub fn trigrams(text: &str) -> HashSet<String> {
    let lower = text.to_lowercase();
    let mut out = HashSet::new();
    for token in lower
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
    {
        let padded: Vec<char> = std::iter::once('#')
            .chain(token.chars())
            .chain(std::iter::once('#'))
            .collect();
        for w in padded.windows(3) {
            out.insert(w.iter().collect());
        }
    }
    out
}

fn containment(question: &HashSet<String>, item: &HashSet<String>) -> f64 {
    if item.is_empty() {
        return 0.0;
    }
    let shared = item.iter().filter(|t| question.contains(*t)).count();
    shared as f64 / item.len() as f64
}

pub fn item_score(question: &HashSet<String>, name: &str, description: &str) -> f64 {
    let name_tri = trigrams(name);
    let full_tri = trigrams(&format!("{name} {description}"));
    0.5 * containment(question, &name_tri) + 0.5 * containment(question, &full_tri)
}

pub fn lexical_score(question: &str, block: &TableBlock) -> BlockScore {
    let q = trigrams(question);
    score_with(&q, block)
}

fn score_with(q: &HashSet<String>, block: &TableBlock) -> BlockScore {
    BlockScore {
        table_score: item_score(q, &block.table, &block.description),
        column_scores: block
            .columns
            .iter()
            .map(|c| item_score(q, &c.name, &c.description))
            .collect(),
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct LexicalScorer;

impl SchemaScorer for LexicalScorer {
    fn score_batch(&self, question: &str, blocks: &[TableBlock]) -> Result<Vec<BlockScore>, LinkError> {
        let q = trigrams(question);
        Ok(blocks.par_iter().map(|b| score_with(&q, b)).collect())
    }
}
