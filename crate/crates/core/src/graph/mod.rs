//! Attributed, weighted, undirected graphs with optional ground truth.
//!
//! A [`Graph`] is immutable after construction. All ingestion goes through
//! [`GraphBuilder`], which normalises the edge list to a simple weighted
//! adjacency: self-loops are dropped, duplicate undirected edges are merged
//! keeping the maximum weight, and every weight must lie in `(0, 1]`.

mod bundle;
mod split;
mod stats;
mod synthetic;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bundle::{load_dataset, write_bundle, BundleContents, BundleFormat, FEATURE_MAGIC};
pub use split::{split_nodes, NodeSplits};
pub use synthetic::PlantedPartition;
pub use stats::{
    avg_clustering_coefficient, dataset_summary, dataset_summary_with, mean_closeness_centrality,
    mean_closeness_centrality_with, ClosenessConvention, DatasetSummary,
};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid graph: {0}")]
    Validation(String),
    #[error("cannot split {nodes} nodes: {reason}")]
    Split { nodes: usize, reason: String },
    #[error("undefined for {0}")]
    UndefinedInput(&'static str),
}

/// One undirected edge, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// How the `edges` column of a dataset summary counts edges.
///
/// Published dataset tables disagree: some count each undirected edge once,
/// some count both directions of a symmetric adjacency (plus self-loops), and
/// some report the raw number of lines in the distributed edge file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeConvention {
    #[default]
    Undirected,
    /// Nonzero entries of the symmetric adjacency matrix, self-loops included.
    Directed,
    /// Raw entry count of the source edge file.
    Entries,
}

impl EdgeConvention {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "undirected" => Some(Self::Undirected),
            "directed" => Some(Self::Directed),
            "entries" => Some(Self::Entries),
            _ => None,
        }
    }
}

/// What ingestion changed while normalising the raw edge list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub raw_entries: usize,
    pub self_loops_dropped: usize,
    pub duplicates_merged: usize,
}

/// Dense row-major `N x d` feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GraphError> {
        if data.len() != rows * cols {
            return Err(GraphError::Shape(format!(
                "feature buffer has {} values, expected {rows} x {cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, GraphError> {
        let cols = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(GraphError::Shape(format!(
                    "feature row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self {
            rows: n,
            cols,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    name: String,
    node_count: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adjacency: Vec<(usize, f64)>,
    degrees: Vec<f64>,
    total_weight: f64,
    features: FeatureMatrix,
    labels: Option<Vec<usize>>,
    num_classes: usize,
    k: usize,
    edge_convention: EdgeConvention,
    ingest: IngestReport,
}

impl Graph {
    pub fn builder(node_count: usize) -> GraphBuilder {
        GraphBuilder::new(node_count)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbours of `v` with edge weights, sorted by neighbour id.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Sum of incident edge weights.
    pub fn weighted_degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    /// Sum of all undirected edge weights (`m`).
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Target cluster count handed to every algorithm.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn edge_convention(&self) -> EdgeConvention {
        self.edge_convention
    }

    pub fn ingest_report(&self) -> &IngestReport {
        &self.ingest
    }

    /// Edge count under the given convention.
    pub fn edge_count_as(&self, convention: EdgeConvention) -> usize {
        match convention {
            EdgeConvention::Undirected => self.edges.len(),
            EdgeConvention::Directed => 2 * self.edges.len() + self.ingest.self_loops_dropped,
            EdgeConvention::Entries => self.ingest.raw_entries,
        }
    }

    /// Copy of this graph with node ids permuted: node `i` becomes `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Graph, GraphError> {
        let n = self.node_count;
        if perm.len() != n {
            return Err(GraphError::Shape(format!(
                "permutation has {} entries for {n} nodes",
                perm.len()
            )));
        }
        let mut inverse = vec![usize::MAX; n];
        for (i, &p) in perm.iter().enumerate() {
            if p >= n || inverse[p] != usize::MAX {
                return Err(GraphError::Validation("not a permutation".into()));
            }
            inverse[p] = i;
        }
        let d = self.features.cols();
        let mut data = Vec::with_capacity(n * d);
        for &old in &inverse {
            data.extend_from_slice(self.features.row(old));
        }
        let mut builder = GraphBuilder::new(n)
            .name(self.name.clone())
            .features(FeatureMatrix::new(n, d, data)?)
            .k(self.k)
            .num_classes(self.num_classes)
            .edge_convention(self.edge_convention);
        if let Some(labels) = &self.labels {
            builder = builder.labels(inverse.iter().map(|&old| labels[old]).collect());
        }
        for e in &self.edges {
            builder = builder.edge(perm[e.u], perm[e.v], e.weight);
        }
        builder.build()
    }
}

/// Collects raw ingestion data and validates it into a [`Graph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    name: String,
    node_count: usize,
    raw_edges: Vec<(usize, usize, f64)>,
    features: Option<FeatureMatrix>,
    labels: Option<Vec<usize>>,
    num_classes: Option<usize>,
    k: Option<usize>,
    edge_convention: EdgeConvention,
}

impl GraphBuilder {
    pub fn new(node_count: usize) -> Self {
        Self {
            name: String::from("unnamed"),
            node_count,
            raw_edges: Vec::new(),
            features: None,
            labels: None,
            num_classes: None,
            k: None,
            edge_convention: EdgeConvention::default(),
        }
    }

    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn edge(mut self, u: usize, v: usize, weight: f64) -> Self {
        self.raw_edges.push((u, v, weight));
        self
    }

    pub fn edges<I: IntoIterator<Item = (usize, usize, f64)>>(mut self, edges: I) -> Self {
        self.raw_edges.extend(edges);
        self
    }

    pub fn unit_edges<I: IntoIterator<Item = (usize, usize)>>(mut self, edges: I) -> Self {
        self.raw_edges
            .extend(edges.into_iter().map(|(u, v)| (u, v, 1.0)));
        self
    }

    pub fn features(mut self, features: FeatureMatrix) -> Self {
        self.features = Some(features);
        self
    }

    pub fn labels(mut self, labels: Vec<usize>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn num_classes(mut self, classes: usize) -> Self {
        self.num_classes = Some(classes);
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    pub fn edge_convention(mut self, convention: EdgeConvention) -> Self {
        self.edge_convention = convention;
        self
    }

    pub fn build(self) -> Result<Graph, GraphError> {
        let n = self.node_count;
        let mut ingest = IngestReport {
            raw_entries: self.raw_edges.len(),
            ..IngestReport::default()
        };

        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in self.raw_edges {
            if u >= n || v >= n {
                return Err(GraphError::Validation(format!(
                    "edge ({u}, {v}) has an endpoint outside [0, {n})"
                )));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(GraphError::Validation(format!(
                    "edge ({u}, {v}) has weight {w} outside (0, 1]"
                )));
            }
            if u == v {
                ingest.self_loops_dropped += 1;
                continue;
            }
            let key = (u.min(v), u.max(v));
            match merged.get_mut(&key) {
                Some(existing) => {
                    ingest.duplicates_merged += 1;
                    *existing = existing.max(w);
                }
                None => {
                    merged.insert(key, w);
                }
            }
        }
        if ingest.self_loops_dropped > 0 {
            log::warn!(
                "{}: dropped {} self-loop(s)",
                self.name,
                ingest.self_loops_dropped
            );
        }

        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v), weight)| Edge { u, v, weight })
            .collect();

        let mut buckets: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in &edges {
            buckets[e.u].push((e.v, e.weight));
            buckets[e.v].push((e.u, e.weight));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adjacency = Vec::with_capacity(2 * edges.len());
        let mut degrees = Vec::with_capacity(n);
        offsets.push(0);
        for mut bucket in buckets {
            bucket.sort_by_key(|&(v, _)| v);
            degrees.push(bucket.iter().map(|&(_, w)| w).sum());
            adjacency.extend(bucket);
            offsets.push(adjacency.len());
        }
        let total_weight = edges.iter().map(|e| e.weight).sum();

        let features = match self.features {
            Some(f) if f.rows() != n => {
                return Err(GraphError::Shape(format!(
                    "feature matrix has {} rows for {n} nodes",
                    f.rows()
                )))
            }
            Some(f) => f,
            None => FeatureMatrix::zeros(n, 0),
        };

        let num_classes = match (&self.labels, self.num_classes) {
            (Some(labels), declared) => {
                if labels.len() != n {
                    return Err(GraphError::Shape(format!(
                        "{} labels for {n} nodes",
                        labels.len()
                    )));
                }
                let observed = labels.iter().max().map_or(0, |&m| m + 1);
                let classes = declared.unwrap_or(observed);
                if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
                    return Err(GraphError::Validation(format!(
                        "label {bad} outside [0, {classes})"
                    )));
                }
                classes
            }
            (None, declared) => declared.unwrap_or(0),
        };

        let k = self.k.unwrap_or(num_classes.max(1));
        if k == 0 {
            return Err(GraphError::Validation("k must be at least 1".into()));
        }

        Ok(Graph {
            name: self.name,
            node_count: n,
            edges,
            offsets,
            adjacency,
            degrees,
            total_weight,
            features,
            labels: self.labels,
            num_classes,
            k,
            edge_convention: self.edge_convention,
            ingest,
        })
    }
}
