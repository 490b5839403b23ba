use serde::{Deserialize, Serialize};

use crate::sql::{components_compatible, SqlComponents};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Candidate indices in original order; the first is the representative.
    pub members: Vec<usize>,
}

/// First-fit clustering: each candidate joins the first cluster whose first
/// member it is compatible with, or opens a new one. Clusters are then
/// stably sorted by size, largest first.
pub fn cluster_candidates(components: &[(usize, SqlComponents)]) -> Vec<Cluster> {
    let mut clusters: Vec<(usize, Cluster)> = Vec::new();
    for (pos, (index, comp)) in components.iter().enumerate() {
        let home = clusters
            .iter_mut()
            .find(|(first, _)| components_compatible(&components[*first].1, comp));
        match home {
            Some((_, c)) => c.members.push(*index),
            None => clusters.push((pos, Cluster {
                members: vec![*index],
            })),
        }
    }
    let mut out: Vec<Cluster> = clusters.into_iter().map(|(_, c)| c).collect();
    out.sort_by_key(|c| std::cmp::Reverse(c.members.len()));
    out
}
