//! Low-rank adapter plugins: storage, a plugin hub, weighted factor merging
//! and forward-delta verification.
//!
//! Factor shapes follow `A: d×r` and `B: r×k` with `x` a row vector of
//! length `d`, so the adapter delta is `(x·A)·B`, a vector of length `k`.
//! This is the transpose of the column-vector form `B(Ax)` and yields the
//! same numbers.

mod format;
mod hub;
mod ops;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{decode_plugin, encode_plugin, FORMAT_VERSION, MAGIC};
pub use hub::{IndexEntry, PluginHub};
pub use ops::{delta_forward, merge, merge_plugins, merged_forward, MergeEntry, MergeSpec};

#[derive(Debug, Error)]
pub enum LoraError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("base model mismatch: expected `{expected}`, found `{found}`")]
    BaseModelMismatch { expected: String, found: String },
    #[error("rank mismatch: expected {expected}, found {found}")]
    RankMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("invalid plugin: {0}")]
    ShapeViolation(String),
    #[error("unknown plugin `{0}`")]
    UnknownPlugin(String),
    #[error("unknown layer `{0}`")]
    UnknownLayer(String),
    #[error("merge spec has no entries")]
    EmptyMerge,
    #[error("malformed plugin file: {0}")]
    Format(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LoraError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Dense row-major `f32` matrix. Serializes as a list of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, LoraError> {
        if data.len() != rows * cols {
            return Err(LoraError::ShapeViolation(format!(
                "{rows}×{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, LoraError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LoraError::ShapeViolation("ragged matrix rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        if self.cols == 0 {
            return vec![Vec::new(); self.rows];
        }
        self.data.chunks(self.cols).map(<[f32]>::to_vec).collect()
    }

    /// Row vector times matrix, accumulated in `f64`.
    pub fn left_mul(&self, x: &[f64]) -> Result<Vec<f64>, LoraError> {
        if x.len() != self.rows {
            return Err(LoraError::DimensionMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        let mut out = vec![0.0f64; self.cols];
        for (i, xi) in x.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += xi * f64::from(*a);
            }
        }
        Ok(out)
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f32>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFactors {
    pub a: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub plugin_id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraPlugin {
    pub plugin_id: String,
    pub base_model_id: String,
    pub domain: String,
    pub rank: usize,
    /// Keyed by layer name; iteration order is the file manifest order.
    pub layers: BTreeMap<String, LayerFactors>,
    /// Source plugins and weights when this plugin is a merge result.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<ProvenanceEntry>,
}

impl LoraPlugin {
    pub fn validate(&self) -> Result<(), LoraError> {
        if self.plugin_id.is_empty() {
            return Err(LoraError::ShapeViolation("empty plugin id".into()));
        }
        if self.rank == 0 {
            return Err(LoraError::ShapeViolation("rank must be positive".into()));
        }
        for (name, f) in &self.layers {
            if f.a.cols() != self.rank || f.b.rows() != self.rank {
                return Err(LoraError::ShapeViolation(format!(
                    "layer `{name}`: A is {}×{}, B is {}×{}, declared rank {}",
                    f.a.rows(),
                    f.a.cols(),
                    f.b.rows(),
                    f.b.cols(),
                    self.rank
                )));
            }
            if f.a.data().iter().chain(f.b.data()).any(|v| !v.is_finite()) {
                return Err(LoraError::ShapeViolation(format!("layer `{name}` has non-finite entries")));
            }
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Result<&LayerFactors, LoraError> {
        self.layers
            .get(name)
            .ok_or_else(|| LoraError::UnknownLayer(name.to_string()))
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use rand::Rng;

    use super::*;

    pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    pub fn random_plugin(rng: &mut impl Rng, id: &str, layers: &[(&str, usize, usize)], rank: usize) -> LoraPlugin {
        LoraPlugin {
            plugin_id: id.into(),
            base_model_id: "base".into(),
            domain: "fund".into(),
            rank,
            layers: layers
                .iter()
                .map(|(name, d, k)| {
                    (
                        name.to_string(),
                        LayerFactors {
                            a: random_matrix(rng, *d, rank),
                            b: random_matrix(rng, rank, *k),
                        },
                    )
                })
                .collect(),
            provenance: Vec::new(),
        }
    }
}
