//! Edit-distance matching of unknown column names against the schema.
//!
//! Distance counts single-character insertions and deletions, so a
//! substitution costs two. Normalizing by the combined length of both names
//! keeps the measure in `[0, 1]`, with 1 meaning no character in common.

use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::schema::SchemaCatalog;

/// Replacement is allowed only at or below this normalized distance.
pub const FUZZY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyMatch {
    pub column: String,
    pub distance: usize,
    /// `distance / (len(name) + len(column))`, in characters.
    pub normalized: f64,
}

impl FuzzyMatch {
    pub fn acceptable(&self) -> bool {
        self.normalized <= FUZZY_THRESHOLD
    }
}

/// Insert/delete edit distance over lowercased characters.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.to_lowercase().chars().collect();
    let b: Vec<char> = b.to_lowercase().chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j]
            } else {
                (prev[j + 1] + 1).min(cur[j] + 1)
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// The schema column closest to `name`; ties go to the lexicographically
/// smaller (lowercased) column name.
pub fn fuzzy_match_column(name: &str, schema: &SchemaCatalog) -> Result<FuzzyMatch, CalibrationError> {
    let mut best: Option<(usize, String, &str)> = None;
    for column in schema.column_names() {
        let d = edit_distance(name, column);
        let key = column.to_lowercase();
        let better = match &best {
            None => true,
            Some((bd, bkey, _)) => d < *bd || (d == *bd && key < *bkey),
        };
        if better {
            best = Some((d, key, column));
        }
    }
    let (distance, _, column) = best.ok_or(CalibrationError::EmptySchema)?;
    let total = (name.chars().count() + column.chars().count()).max(1);
    Ok(FuzzyMatch {
        column: column.to_string(),
        distance,
        normalized: distance as f64 / total as f64,
    })
}
