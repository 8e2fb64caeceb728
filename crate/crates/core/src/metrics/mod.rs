//! The four performance metrics: macro-F1, NMI, modularity and conductance.
//!
//! Supervised metrics (F1, NMI) compare a hard partition with ground-truth
//! labels on a node subset. Unsupervised metrics (modularity, conductance)
//! use the weighted adjacency of the whole graph and never see labels.

mod assignment;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

pub use assignment::max_weight_assignment;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("{0} needs ground-truth labels")]
    UnsupportedMetric(Metric),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    F1,
    Nmi,
    Modularity,
    Conductance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Supervision {
    Supervised,
    Unsupervised,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::F1, Metric::Nmi, Metric::Modularity, Metric::Conductance];

    pub fn name(self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::Nmi => "nmi",
            Metric::Modularity => "modularity",
            Metric::Conductance => "conductance",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Metric::Conductance => Orientation::LowerBetter,
            _ => Orientation::HigherBetter,
        }
    }

    pub fn supervision(self) -> Supervision {
        match self {
            Metric::F1 | Metric::Nmi => Supervision::Supervised,
            Metric::Modularity | Metric::Conductance => Supervision::Unsupervised,
        }
    }

    /// Maps a raw value so that larger is always better.
    pub fn oriented(self, value: f64) -> f64 {
        match self.orientation() {
            Orientation::HigherBetter => value,
            Orientation::LowerBetter => -value,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Metric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "f1" | "macro_f1" | "macro-f1" => Ok(Metric::F1),
            "nmi" => Ok(Metric::Nmi),
            "modularity" => Ok(Metric::Modularity),
            "conductance" => Ok(Metric::Conductance),
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }
}

/// A hard clustering: exactly one cluster id in `[0, k)` per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self, MetricError> {
        if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
            return Err(MetricError::InvalidPartition(format!(
                "cluster id {bad} outside [0, {k})"
            )));
        }
        Ok(Self { assignment, k })
    }

    /// Uses `max id + 1` as `k`.
    pub fn from_assignment(assignment: Vec<usize>) -> Self {
        let k = assignment.iter().max().map_or(1, |&m| m + 1);
        Self { assignment, k }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricStatus {
    Ok,
    UndefinedDegenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    pub status: MetricStatus,
}

impl MetricValue {
    pub fn ok(value: f64) -> Self {
        Self {
            value,
            status: MetricStatus::Ok,
        }
    }

    pub fn degenerate(value: f64) -> Self {
        Self {
            value,
            status: MetricStatus::UndefinedDegenerate,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == MetricStatus::Ok
    }
}

/// How per-cluster conductances are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConductanceAggregation {
    /// Unweighted mean over clusters with positive volume.
    #[default]
    Mean,
    /// Total cut over total volume.
    VolumeWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductanceBreakdown {
    pub value: MetricValue,
    /// `(cluster id, cut, volume)` for every cluster with positive volume.
    pub clusters: Vec<(usize, f64, f64)>,
    /// Non-empty clusters skipped because their volume is zero.
    pub skipped_zero_volume: Vec<usize>,
}

fn check_lengths(pred: &Partition, labels: &[usize]) -> Result<(), MetricError> {
    if pred.len() != labels.len() {
        return Err(MetricError::Shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn check_subset(subset: &[usize], n: usize) -> Result<(), MetricError> {
    if let Some(&bad) = subset.iter().find(|&&i| i >= n) {
        return Err(MetricError::Shape(format!("subset node {bad} outside [0, {n})")));
    }
    Ok(())
}

/// Sparse contingency table over a node subset, with compacted ids.
struct Contingency {
    counts: Vec<Vec<usize>>, // [class][cluster]
    class_sizes: Vec<usize>,
    cluster_sizes: Vec<usize>,
    total: usize,
}

impl Contingency {
    fn new(pred: &[usize], labels: &[usize], subset: &[usize]) -> Self {
        let mut class_ids = HashMap::new();
        let mut cluster_ids = HashMap::new();
        let mut pairs = Vec::with_capacity(subset.len());
        for &i in subset {
            let next = class_ids.len();
            let c = *class_ids.entry(labels[i]).or_insert(next);
            let next = cluster_ids.len();
            let m = *cluster_ids.entry(pred[i]).or_insert(next);
            pairs.push((c, m));
        }
        let mut counts = vec![vec![0usize; cluster_ids.len()]; class_ids.len()];
        let mut class_sizes = vec![0; class_ids.len()];
        let mut cluster_sizes = vec![0; cluster_ids.len()];
        for (c, m) in pairs {
            counts[c][m] += 1;
            class_sizes[c] += 1;
            cluster_sizes[m] += 1;
        }
        Self {
            counts,
            class_sizes,
            cluster_sizes,
            total: subset.len(),
        }
    }
}

/// Macro-averaged F1 after aligning clusters to classes.
///
/// Alignment maximises the total overlap of the contingency table; among
/// equal-overlap alignments the one with the larger macro-F1 is taken.
/// Classes left without a cluster score zero.
pub fn macro_f1(
    pred: &Partition,
    labels: &[usize],
    subset: &[usize],
) -> Result<MetricValue, MetricError> {
    check_lengths(pred, labels)?;
    check_subset(subset, labels.len())?;
    if subset.is_empty() {
        return Ok(MetricValue::degenerate(0.0));
    }
    let table = Contingency::new(pred.assignment(), labels, subset);
    let classes = table.class_sizes.len();
    let f1 = |c: usize, m: usize| {
        2.0 * table.counts[c][m] as f64 / (table.class_sizes[c] + table.cluster_sizes[m]) as f64
    };
    // overlap dominates; the F1 term (total < classes + 1) only breaks ties
    let scale = (classes + 1) as f64;
    let weights: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            (0..table.cluster_sizes.len())
                .map(|m| table.counts[c][m] as f64 * scale + f1(c, m))
                .collect()
        })
        .collect();
    let matching = max_weight_assignment(&weights);
    let sum: f64 = matching
        .iter()
        .enumerate()
        .filter_map(|(c, m)| m.map(|m| f1(c, m)))
        .sum();
    Ok(MetricValue::ok(sum / classes as f64))
}

fn entropy(sizes: &[usize], total: usize) -> f64 {
    let n = total as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalised by the arithmetic mean of both entropies.
pub fn nmi(pred: &Partition, labels: &[usize], subset: &[usize]) -> Result<MetricValue, MetricError> {
    check_lengths(pred, labels)?;
    check_subset(subset, labels.len())?;
    if subset.is_empty() {
        return Ok(MetricValue::degenerate(0.0));
    }
    let table = Contingency::new(pred.assignment(), labels, subset);
    let h_class = entropy(&table.class_sizes, table.total);
    let h_cluster = entropy(&table.cluster_sizes, table.total);
    if table.class_sizes.len() == 1 && table.cluster_sizes.len() == 1 {
        return Ok(MetricValue::ok(1.0));
    }
    if table.class_sizes.len() == 1 || table.cluster_sizes.len() == 1 {
        return Ok(MetricValue::degenerate(0.0));
    }
    let n = table.total as f64;
    let mut mi = 0.0;
    for (c, row) in table.counts.iter().enumerate() {
        for (m, &count) in row.iter().enumerate() {
            if count > 0 {
                let joint = count as f64;
                mi += joint / n
                    * (n * joint / (table.class_sizes[c] as f64 * table.cluster_sizes[m] as f64))
                        .ln();
            }
        }
    }
    let value = (mi / ((h_class + h_cluster) / 2.0)).clamp(0.0, 1.0);
    Ok(MetricValue::ok(value))
}

fn check_partition(g: &Graph, pred: &Partition) -> Result<(), MetricError> {
    if pred.len() != g.node_count() {
        return Err(MetricError::Shape(format!(
            "partition has {} entries for {} nodes",
            pred.len(),
            g.node_count()
        )));
    }
    Ok(())
}

/// `Q = sum_c [ L_c / m - (D_c / 2m)^2 ]` over weighted intra-cluster
/// weight `L_c`, cluster degree sum `D_c` and total weight `m`.
pub fn modularity(g: &Graph, pred: &Partition) -> Result<MetricValue, MetricError> {
    check_partition(g, pred)?;
    let m = g.total_weight();
    if g.edge_count() == 0 || m <= 0.0 {
        return Ok(MetricValue::degenerate(0.0));
    }
    let assignment = pred.assignment();
    let mut internal: HashMap<usize, f64> = HashMap::new();
    let mut degree: HashMap<usize, f64> = HashMap::new();
    for e in g.edges() {
        if assignment[e.u] == assignment[e.v] {
            *internal.entry(assignment[e.u]).or_default() += e.weight;
        }
    }
    for (v, &c) in assignment.iter().enumerate() {
        *degree.entry(c).or_default() += g.weighted_degree(v);
    }
    let mut clusters: Vec<usize> = degree.keys().copied().collect();
    clusters.sort_unstable();
    let q = clusters
        .iter()
        .map(|c| {
            let l = internal.get(c).copied().unwrap_or(0.0);
            let d = degree[c];
            l / m - (d / (2.0 * m)).powi(2)
        })
        .sum();
    Ok(MetricValue::ok(q))
}

pub fn conductance(g: &Graph, pred: &Partition) -> Result<MetricValue, MetricError> {
    Ok(conductance_with(g, pred, ConductanceAggregation::Mean)?.value)
}

/// Per-cluster `cut(C, V \ C) / vol(C)` with weighted volumes.
pub fn conductance_with(
    g: &Graph,
    pred: &Partition,
    aggregation: ConductanceAggregation,
) -> Result<ConductanceBreakdown, MetricError> {
    check_partition(g, pred)?;
    if g.edge_count() == 0 {
        return Ok(ConductanceBreakdown {
            value: MetricValue::degenerate(0.0),
            clusters: Vec::new(),
            skipped_zero_volume: Vec::new(),
        });
    }
    let assignment = pred.assignment();
    let mut cut: BTreeMap<usize, f64> = BTreeMap::new();
    let mut volume: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, &c) in assignment.iter().enumerate() {
        *volume.entry(c).or_default() += g.weighted_degree(v);
        cut.entry(c).or_default();
    }
    for e in g.edges() {
        let (a, b) = (assignment[e.u], assignment[e.v]);
        if a != b {
            *cut.get_mut(&a).unwrap() += e.weight;
            *cut.get_mut(&b).unwrap() += e.weight;
        }
    }
    let mut clusters = Vec::new();
    let mut skipped = Vec::new();
    for (&c, &vol) in &volume {
        if vol > 0.0 {
            clusters.push((c, cut[&c], vol));
        } else {
            skipped.push(c);
        }
    }
    let value = match aggregation {
        ConductanceAggregation::Mean => {
            clusters.iter().map(|&(_, cut, vol)| cut / vol).sum::<f64>() / clusters.len() as f64
        }
        ConductanceAggregation::VolumeWeighted => {
            let total_cut: f64 = clusters.iter().map(|c| c.1).sum();
            let total_vol: f64 = clusters.iter().map(|c| c.2).sum();
            total_cut / total_vol
        }
    };
    Ok(ConductanceBreakdown {
        value: MetricValue::ok(value),
        clusters,
        skipped_zero_volume: skipped,
    })
}

/// Evaluates each requested metric independently; one failing metric does
/// not prevent the others. Supervised metrics use `subset`, unsupervised
/// metrics the whole graph.
pub fn evaluate_all(
    g: &Graph,
    pred: &Partition,
    labels: Option<&[usize]>,
    subset: &[usize],
    which: &[Metric],
) -> BTreeMap<Metric, Result<MetricValue, MetricError>> {
    which
        .iter()
        .map(|&metric| {
            let value = match (metric, labels) {
                (Metric::F1, Some(l)) => macro_f1(pred, l, subset),
                (Metric::Nmi, Some(l)) => nmi(pred, l, subset),
                (Metric::F1 | Metric::Nmi, None) => Err(MetricError::UnsupportedMetric(metric)),
                (Metric::Modularity, _) => modularity(g, pred),
                (Metric::Conductance, _) => conductance(g, pred),
            };
            (metric, value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    fn p(a: &[usize]) -> Partition {
        Partition::from_assignment(a.to_vec())
    }

    fn bridged_triangles() -> Graph {
        Graph::builder(6)
            .unit_edges([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])
            .labels(vec![0, 0, 0, 1, 1, 1])
            .build()
            .unwrap()
    }

    #[test]
    fn f1_examples() {
        let labels = [0, 0, 1, 1];
        assert_eq!(macro_f1(&p(&[1, 1, 0, 0]), &labels, &all(4)).unwrap().value, 1.0);
        assert_eq!(macro_f1(&p(&[0, 1, 0, 1]), &labels, &all(4)).unwrap().value, 0.5);
        let v = macro_f1(&p(&[0, 0, 0, 0]), &labels, &all(4)).unwrap().value;
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_uses_subset_only() {
        let labels = [0, 0, 1, 1];
        let v = macro_f1(&p(&[0, 1, 1, 1]), &labels, &[0, 2, 3]).unwrap();
        assert_eq!(v.value, 1.0);
    }

    #[test]
    fn empty_subset_is_degenerate() {
        let v = macro_f1(&p(&[0, 1]), &[0, 1], &[]).unwrap();
        assert_eq!(v.status, MetricStatus::UndefinedDegenerate);
        assert_eq!(nmi(&p(&[0, 1]), &[0, 1], &[]).unwrap().status, MetricStatus::UndefinedDegenerate);
    }

    #[test]
    fn nmi_examples() {
        let labels = [0, 0, 1, 1];
        assert!((nmi(&p(&[1, 1, 0, 0]), &labels, &all(4)).unwrap().value - 1.0).abs() < 1e-15);
        let single = nmi(&p(&[0, 0, 0, 0]), &labels, &all(4)).unwrap();
        assert_eq!(single, MetricValue::degenerate(0.0));
        assert!(nmi(&p(&[0, 1, 0, 1]), &labels, &all(4)).unwrap().value.abs() < 1e-15);
        assert_eq!(nmi(&p(&[2, 2]), &[0, 0], &all(2)).unwrap(), MetricValue::ok(1.0));
    }

    #[test]
    fn modularity_examples() {
        let g = bridged_triangles();
        let q = modularity(&g, &p(&[0, 0, 0, 1, 1, 1])).unwrap().value;
        assert!((q - 5.0 / 14.0).abs() < 1e-15);
        assert!(modularity(&g, &p(&[0; 6])).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn conductance_examples() {
        let g = bridged_triangles();
        let c = conductance(&g, &p(&[0, 0, 0, 1, 1, 1])).unwrap().value;
        assert!((c - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(conductance(&g, &p(&[0; 6])).unwrap().value, 0.0);
        let k3 = Graph::builder(3).unit_edges([(0, 1), (1, 2), (0, 2)]).build().unwrap();
        assert_eq!(conductance(&k3, &p(&[0, 1, 2])).unwrap().value, 1.0);
    }

    #[test]
    fn conductance_skips_isolated_clusters() {
        let g = Graph::builder(4).unit_edges([(0, 1), (1, 2)]).build().unwrap();
        let b = conductance_with(&g, &p(&[0, 0, 1, 2]), ConductanceAggregation::Mean).unwrap();
        assert_eq!(b.skipped_zero_volume, vec![2]);
        // cluster 0: cut 1, vol 3; cluster 1: cut 1, vol 1
        assert!((b.value.value - (1.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        let w = conductance_with(&g, &p(&[0, 0, 1, 2]), ConductanceAggregation::VolumeWeighted)
            .unwrap();
        assert!((w.value.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_edge_graph_is_degenerate() {
        let g = Graph::builder(2).build().unwrap();
        assert_eq!(modularity(&g, &p(&[0, 1])).unwrap().status, MetricStatus::UndefinedDegenerate);
        assert_eq!(conductance(&g, &p(&[0, 1])).unwrap().status, MetricStatus::UndefinedDegenerate);
    }

    #[test]
    fn evaluate_all_collects_errors() {
        let g = bridged_triangles();
        let pred = p(&[0, 0, 0, 1, 1, 1]);
        let res = evaluate_all(&g, &pred, None, &all(6), &[Metric::Nmi, Metric::Modularity]);
        assert_eq!(res[&Metric::Nmi], Err(MetricError::UnsupportedMetric(Metric::Nmi)));
        assert!(res[&Metric::Modularity].is_ok());
        assert!(evaluate_all(&g, &pred, None, &all(6), &[]).is_empty());

        let res = evaluate_all(&g, &pred, g.labels(), &all(6), &Metric::ALL);
        assert_eq!(res[&Metric::F1].as_ref().unwrap().value, 1.0);
        assert!((res[&Metric::Nmi].as_ref().unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partition_rejects_out_of_range() {
        assert!(Partition::new(vec![0, 3], 3).is_err());
        assert!(Partition::new(vec![0, 2], 3).is_ok());
    }

    #[test]
    fn metric_orientation() {
        assert_eq!(Metric::Conductance.orientation(), Orientation::LowerBetter);
        for m in [Metric::F1, Metric::Nmi, Metric::Modularity] {
            assert_eq!(m.orientation(), Orientation::HigherBetter);
        }
        assert_eq!("NMI".parse::<Metric>().unwrap(), Metric::Nmi);
    }
}
