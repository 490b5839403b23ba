//! Weighted factor merging and forward deltas.
//!
//! Merging scales both factors: `Â = Σ ωᵢAᵢ`, `B̂ = Σ ωᵢBᵢ`. The merged
//! delta `x·Â·B̂` is therefore quadratic in the weights and in general
//! differs from `Σ ωᵢ x·Aᵢ·Bᵢ`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::hub::PluginHub;
use super::{LayerFactors, LoraError, LoraPlugin, Matrix, ProvenanceEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEntry {
    pub plugin_id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeSpec {
    pub entries: Vec<MergeEntry>,
    /// Id of the merged plugin; defaults to `merged`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_id: Option<String>,
}

impl MergeSpec {
    /// Replaces every weight with `1/n`.
    pub fn averaged(mut self) -> Self {
        let w = 1.0 / self.entries.len().max(1) as f64;
        for e in &mut self.entries {
            e.weight = w;
        }
        self
    }
}

pub fn merge(spec: &MergeSpec, hub: &PluginHub) -> Result<LoraPlugin, LoraError> {
    let plugins = spec
        .entries
        .iter()
        .map(|e| hub.load(&e.plugin_id))
        .collect::<Result<Vec<_>, _>>()?;
    let entries: Vec<(&LoraPlugin, f64)> = plugins
        .iter()
        .zip(&spec.entries)
        .map(|(p, e)| (p, e.weight))
        .collect();
    merge_plugins(&entries, spec.output_id.as_deref().unwrap_or("merged"))
}

fn check_compatible(first: &LoraPlugin, other: &LoraPlugin) -> Result<(), LoraError> {
    if other.base_model_id != first.base_model_id {
        return Err(LoraError::BaseModelMismatch {
            expected: first.base_model_id.clone(),
            found: other.base_model_id.clone(),
        });
    }
    if other.rank != first.rank {
        return Err(LoraError::RankMismatch {
            expected: first.rank,
            found: other.rank,
        });
    }
    if !other.layers.keys().eq(first.layers.keys()) {
        return Err(LoraError::ShapeMismatch(format!(
            "`{}` and `{}` have different layer sets",
            first.plugin_id, other.plugin_id
        )));
    }
    for (name, f) in &first.layers {
        let g = &other.layers[name];
        if f.a.shape() != g.a.shape() || f.b.shape() != g.b.shape() {
            return Err(LoraError::ShapeMismatch(format!(
                "layer `{name}` differs between `{}` and `{}`",
                first.plugin_id, other.plugin_id
            )));
        }
    }
    Ok(())
}

fn weighted_sum(terms: &[(&Matrix, f64)]) -> Matrix {
    let (first, w0) = terms[0];
    // Start from the first term rather than zero so that a single entry
    // with weight 1 reproduces its input bit for bit, signed zeros included.
    let mut acc: Vec<f64> = first.data().iter().map(|&v| w0 * f64::from(v)).collect();
    for (m, w) in &terms[1..] {
        for (a, &v) in acc.iter_mut().zip(m.data()) {
            *a += w * f64::from(v);
        }
    }
    Matrix::from_vec(first.rows(), first.cols(), acc.into_iter().map(|v| v as f32).collect())
        .expect("shape preserved")
}

/// Merges already loaded plugins. Entries are summed in a canonical order
/// (plugin id, then weight) so the result does not depend on entry order.
pub fn merge_plugins(entries: &[(&LoraPlugin, f64)], output_id: &str) -> Result<LoraPlugin, LoraError> {
    let Some(&(first, _)) = entries.first() else {
        return Err(LoraError::EmptyMerge);
    };
    for (p, _) in &entries[1..] {
        check_compatible(first, p)?;
    }
    let mut sorted = entries.to_vec();
    sorted.sort_by(|a, b| {
        a.0.plugin_id
            .cmp(&b.0.plugin_id)
            .then_with(|| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal))
    });

    let mut layers = BTreeMap::new();
    for name in first.layers.keys() {
        let a: Vec<(&Matrix, f64)> = sorted.iter().map(|(p, w)| (&p.layers[name].a, *w)).collect();
        let b: Vec<(&Matrix, f64)> = sorted.iter().map(|(p, w)| (&p.layers[name].b, *w)).collect();
        layers.insert(
            name.clone(),
            LayerFactors {
                a: weighted_sum(&a),
                b: weighted_sum(&b),
            },
        );
    }
    let domain = if sorted.iter().all(|(p, _)| p.domain == first.domain) {
        first.domain.clone()
    } else {
        "mixed".to_string()
    };
    let merged = LoraPlugin {
        plugin_id: output_id.to_string(),
        base_model_id: first.base_model_id.clone(),
        domain,
        rank: first.rank,
        layers,
        provenance: sorted
            .iter()
            .map(|(p, w)| ProvenanceEntry {
                plugin_id: p.plugin_id.clone(),
                weight: *w,
            })
            .collect(),
    };
    merged.validate()?;
    Ok(merged)
}

fn delta64(f: &LayerFactors, x: &[f64]) -> Result<Vec<f64>, LoraError> {
    f.b.left_mul(&f.a.left_mul(x)?)
}

fn widen(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| f64::from(v)).collect()
}

/// Adapter delta `(x·A)·B` for one layer; `x` has length `d`, the result
/// length `k`.
pub fn delta_forward(plugin: &LoraPlugin, layer: &str, x: &[f32]) -> Result<Vec<f32>, LoraError> {
    let f = plugin.layer(layer)?;
    Ok(delta64(f, &widen(x))?.into_iter().map(|v| v as f32).collect())
}

/// `x·W0 + x·Â·B̂ + x·A_k·B_k` with `W0` of shape `d×k`.
pub fn merged_forward(
    w0: &Matrix,
    merged: &LoraPlugin,
    extra: &LoraPlugin,
    layer: &str,
    x: &[f32],
) -> Result<Vec<f32>, LoraError> {
    let x = widen(x);
    let mut h = w0.left_mul(&x)?;
    for plugin in [merged, extra] {
        let d = delta64(plugin.layer(layer)?, &x)?;
        if d.len() != h.len() {
            return Err(LoraError::DimensionMismatch {
                expected: h.len(),
                found: d.len(),
            });
        }
        for (o, v) in h.iter_mut().zip(d) {
            *o += v;
        }
    }
    Ok(h.into_iter().map(|v| v as f32).collect())
}
