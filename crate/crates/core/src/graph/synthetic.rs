//! Planted-partition graphs with class-dependent features.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Graph, GraphError};

/// Nodes are split round-robin into `communities` blocks; each pair is
/// linked with probability `p_in` inside a block and `p_out` across.
/// Features are unit-variance Gaussians around `separation` times the
/// block's one-hot direction (cycled when `feature_dim < communities`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedPartition {
    pub nodes: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_feature_dim() -> usize {
    8
}

fn default_separation() -> f64 {
    4.0
}

impl PlantedPartition {
    pub fn generate(&self, name: &str) -> Result<Graph, GraphError> {
        if self.communities == 0 || self.communities > self.nodes {
            return Err(GraphError::Validation(format!(
                "{} communities cannot be planted in {} nodes",
                self.communities, self.nodes
            )));
        }
        for p in [self.p_in, self.p_out] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GraphError::Validation(format!("edge probability {p} outside [0, 1]")));
            }
        }
        if self.feature_dim == 0 {
            return Err(GraphError::Validation("feature_dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let labels: Vec<usize> = (0..self.nodes).map(|i| i % self.communities).collect();
        let mut edges = Vec::new();
        for u in 0..self.nodes {
            for v in (u + 1)..self.nodes {
                let p = if labels[u] == labels[v] { self.p_in } else { self.p_out };
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let mut data = Vec::with_capacity(self.nodes * self.feature_dim);
        for &c in &labels {
            for j in 0..self.feature_dim {
                let centre = if j == c % self.feature_dim { self.separation } else { 0.0 };
                data.push(centre + noise.sample(&mut rng));
            }
        }
        Graph::builder(self.nodes)
            .name(name)
            .unit_edges(edges)
            .features(FeatureMatrix::new(self.nodes, self.feature_dim, data)?)
            .labels(labels)
            .num_classes(self.communities)
            .build()
    }
}
