use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError};

/// How closeness handles nodes that cannot reach the whole graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosenessConvention {
    /// `((r-1)/(N-1)) * ((r-1)/sum_d)` with `r` the reachable node count
    /// (Wasserman and Faust).
    #[default]
    ComponentScaled,
    /// `(r-1)/sum_d`, ignoring the unreachable part of the graph.
    ReachableOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub nodes: usize,
    pub edges: usize,
    pub features: usize,
    pub classes: usize,
    pub avg_clustering_coefficient: f64,
    pub mean_closeness_centrality: f64,
}

/// Mean local clustering coefficient, edges taken as unweighted.
/// Nodes of degree below two contribute zero.
pub fn avg_clustering_coefficient(g: &Graph) -> Result<f64, GraphError> {
    let n = g.node_count();
    if n == 0 {
        return Err(GraphError::UndefinedInput("an empty graph"));
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|v| {
            let deg = g.degree(v);
            if deg < 2 {
                return 0.0;
            }
            let links: usize = g
                .neighbors(v)
                .iter()
                .map(|&(u, _)| sorted_intersection(g.neighbors(v), g.neighbors(u)))
                .sum();
            // every link between two neighbours is seen from both ends
            links as f64 / (deg * (deg - 1)) as f64
        })
        .sum();
    Ok(total / n as f64)
}

fn sorted_intersection(a: &[(usize, f64)], b: &[(usize, f64)]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

pub fn mean_closeness_centrality(g: &Graph) -> Result<f64, GraphError> {
    mean_closeness_centrality_with(g, ClosenessConvention::default())
}

/// Mean closeness over all nodes using unweighted shortest paths.
pub fn mean_closeness_centrality_with(
    g: &Graph,
    convention: ClosenessConvention,
) -> Result<f64, GraphError> {
    let n = g.node_count();
    if n == 0 {
        return Err(GraphError::UndefinedInput("an empty graph"));
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![usize::MAX; n], VecDeque::new()),
            |(dist, queue), source| node_closeness(g, source, dist, queue, convention),
        )
        .sum();
    Ok(total / n as f64)
}

fn node_closeness(
    g: &Graph,
    source: usize,
    dist: &mut [usize],
    queue: &mut VecDeque<usize>,
    convention: ClosenessConvention,
) -> f64 {
    dist.fill(usize::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push_back(source);
    let (mut reached, mut dist_sum) = (0usize, 0usize);
    while let Some(v) = queue.pop_front() {
        reached += 1;
        dist_sum += dist[v];
        for &(u, _) in g.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if dist_sum == 0 {
        return 0.0;
    }
    let others = (reached - 1) as f64;
    let closeness = others / dist_sum as f64;
    match convention {
        ClosenessConvention::ReachableOnly => closeness,
        ClosenessConvention::ComponentScaled => closeness * others / (g.node_count() - 1) as f64,
    }
}

pub fn dataset_summary(g: &Graph) -> Result<DatasetSummary, GraphError> {
    dataset_summary_with(g, ClosenessConvention::default())
}

/// Counts plus both structural statistics. The edge count follows the
/// graph's recorded [`super::EdgeConvention`].
pub fn dataset_summary_with(
    g: &Graph,
    convention: ClosenessConvention,
) -> Result<DatasetSummary, GraphError> {
    Ok(DatasetSummary {
        name: g.name().to_string(),
        nodes: g.node_count(),
        edges: g.edge_count_as(g.edge_convention()),
        features: g.features().cols(),
        classes: g.num_classes(),
        avg_clustering_coefficient: avg_clustering_coefficient(g)?,
        mean_closeness_centrality: mean_closeness_centrality_with(g, convention)?,
    })
}
