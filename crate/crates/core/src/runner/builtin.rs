//! In-process baseline clusterers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::protocol::TrainRequest;
use crate::graph::{FeatureMatrix, Graph};
use crate::hpo::{Dimension, ParamValue, Params, SearchSpace};

/// Parameter name reserved for the early-stopping budget; it travels in
/// [`TrainRequest::patience`] and is accepted but ignored inside `params`.
pub const PATIENCE_PARAM: &str = "patience";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Kmeans,
    LabelPropagation,
    GreedyModularity,
    Random,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [
        Builtin::Kmeans,
        Builtin::LabelPropagation,
        Builtin::GreedyModularity,
        Builtin::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Kmeans => "kmeans",
            Builtin::LabelPropagation => "label-propagation",
            Builtin::GreedyModularity => "greedy-modularity",
            Builtin::Random => "random",
        }
    }

    pub fn search_space(self) -> SearchSpace {
        let dims = match self {
            Builtin::Kmeans => vec![
                Dimension::int_uniform("init_restarts", 1, 10),
                Dimension::int_uniform("max_iter", 5, 300),
            ],
            Builtin::LabelPropagation => vec![Dimension::int_uniform("max_rounds", 1, 100)],
            Builtin::GreedyModularity | Builtin::Random => vec![],
        };
        SearchSpace::new(dims).expect("builtin spaces are valid")
    }

    pub fn defaults(self) -> Params {
        let mut p = Params::new();
        match self {
            Builtin::Kmeans => {
                p.insert("init_restarts".into(), ParamValue::Int(3));
                p.insert("max_iter".into(), ParamValue::Int(100));
            }
            Builtin::LabelPropagation => {
                p.insert("max_rounds".into(), ParamValue::Int(30));
            }
            Builtin::GreedyModularity | Builtin::Random => {}
        }
        p
    }

    /// Runs the baseline and returns `(assignment, epochs_used)`.
    pub fn train(self, graph: &Graph, req: &TrainRequest) -> Result<(Vec<usize>, u64), String> {
        let params = self.resolve_params(&req.params)?;
        if req.k == 0 {
            return Err("k must be positive".into());
        }
        let int = |name: &str| params[name].as_i64().expect("validated integer") as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let patience = req.patience;
        match self {
            Builtin::Kmeans => {
                let iters = int("max_iter").min(req.max_epochs.max(1));
                kmeans(graph.features(), req.k, int("init_restarts") as usize, iters, patience, &mut rng)
            }
            Builtin::LabelPropagation => {
                let rounds = int("max_rounds").min(req.max_epochs.max(1));
                let (labels, used) = label_propagation(graph, rounds, patience, &mut rng);
                let (merged, _) = agglomerate(graph, labels, req.k);
                Ok((merged, used))
            }
            Builtin::GreedyModularity => {
                let (merged, merges) = agglomerate(graph, (0..graph.node_count()).collect(), req.k);
                Ok((merged, merges))
            }
            Builtin::Random => Ok(((0..graph.node_count()).map(|_| rng.random_range(0..req.k)).collect(), 0)),
        }
    }

    /// Fills defaults and rejects unknown or out-of-domain parameters.
    pub fn resolve_params(self, given: &Params) -> Result<Params, String> {
        let space = self.search_space();
        let mut params = self.defaults();
        for (key, value) in given {
            if key == PATIENCE_PARAM {
                continue;
            }
            let dim = space
                .get(key)
                .ok_or_else(|| format!("{} has no parameter `{key}`", self.name()))?;
            if !dim.contains(value) {
                return Err(format!("`{key}` = {value} outside its domain"));
            }
            params.insert(key.clone(), value.clone());
        }
        Ok(params)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown builtin `{s}`"))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations; the restart with the
/// lowest inertia wins. A restart stops once assignments are stable or
/// inertia has not improved for `patience` iterations (0 disables).
pub fn kmeans(
    x: &FeatureMatrix,
    k: usize,
    restarts: usize,
    max_iter: u64,
    patience: u64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, u64), String> {
    let n = x.rows();
    let d = x.cols();
    if d == 0 {
        return Err("kmeans needs node features".into());
    }
    if k > n {
        return Err(format!("k = {k} exceeds {n} nodes"));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut total_iters = 0u64;
    for _ in 0..restarts.max(1) {
        let mut centers = kmeans_pp(x, k, rng);
        let mut assign = vec![usize::MAX; n];
        let mut best_inertia = f64::INFINITY;
        let mut stale = 0u64;
        let mut inertia = f64::INFINITY;
        for _ in 0..max_iter {
            total_iters += 1;
            let mut changed = false;
            inertia = 0.0;
            for i in 0..n {
                let (c, dist) = nearest(x.row(i), &centers);
                inertia += dist;
                if assign[i] != c {
                    assign[i] = c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            if inertia < best_inertia - 1e-12 {
                best_inertia = inertia;
                stale = 0;
            } else {
                stale += 1;
                if patience > 0 && stale >= patience {
                    break;
                }
            }
            let mut sums = vec![0.0; k * d];
            let mut counts = vec![0usize; k];
            for i in 0..n {
                counts[assign[i]] += 1;
                for (s, v) in sums[assign[i] * d..(assign[i] + 1) * d].iter_mut().zip(x.row(i)) {
                    *s += v;
                }
            }
            for c in 0..k {
                if counts[c] == 0 {
                    // reseed an empty cluster at the point farthest from its centre
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            let da = sq_dist(x.row(a), &centers[assign[a]]);
                            let db = sq_dist(x.row(b), &centers[assign[b]]);
                            da.total_cmp(&db).then(b.cmp(&a))
                        })
                        .expect("n > 0");
                    centers[c] = x.row(far).to_vec();
                } else {
                    for (j, s) in sums[c * d..(c + 1) * d].iter().enumerate() {
                        centers[c][j] = s / counts[c] as f64;
                    }
                }
            }
        }
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, assign));
        }
    }
    let (_, assign) = best.expect("at least one restart");
    Ok((assign, total_iters))
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let dist = sq_dist(point, center);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn kmeans_pp(x: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centers = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    chosen = i;
                    break;
                }
                u -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = x.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Asynchronous label propagation in a seeded random order. Ties keep the
/// current label when it is among the heaviest, otherwise one of them is
/// drawn. Stops when a round changes nothing or the number of changes has
/// not dropped for `patience` rounds (0 disables).
pub fn label_propagation(graph: &Graph, max_rounds: u64, patience: u64, rng: &mut ChaCha8Rng) -> (Vec<usize>, u64) {
    let n = graph.node_count();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut fewest = usize::MAX;
    let mut stale = 0u64;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        order.shuffle(rng);
        let mut changes = 0;
        for &v in &order {
            let neigh = graph.neighbors(v);
            if neigh.is_empty() {
                continue;
            }
            let mut tally: BTreeMap<usize, f64> = BTreeMap::new();
            for &(u, w) in neigh {
                *tally.entry(labels[u]).or_default() += w;
            }
            let top = tally.values().copied().fold(f64::NEG_INFINITY, f64::max);
            let heaviest: Vec<usize> = tally
                .iter()
                .filter(|(_, &w)| w >= top - 1e-12)
                .map(|(&l, _)| l)
                .collect();
            if !heaviest.contains(&labels[v]) {
                labels[v] = heaviest[rng.random_range(0..heaviest.len())];
                changes += 1;
            }
        }
        if changes == 0 {
            break;
        }
        if changes < fewest {
            fewest = changes;
            stale = 0;
        } else {
            stale += 1;
            if patience > 0 && stale >= patience {
                break;
            }
        }
    }
    (canonical(&labels), rounds)
}

/// Greedy modularity agglomeration from an initial clustering down to at
/// most `k` clusters. Each step merges the pair with the largest modularity
/// gain, merging unconnected clusters once no linked pair remains. Returns
/// the clustering and the number of merges.
pub fn agglomerate(graph: &Graph, initial: Vec<usize>, k: usize) -> (Vec<usize>, u64) {
    let initial = canonical(&initial);
    let c = initial.iter().max().map_or(0, |&m| m + 1);
    let two_m = 2.0 * graph.total_weight();
    let mut vol = vec![0.0; c];
    let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); c];
    for v in 0..graph.node_count() {
        vol[initial[v]] += graph.weighted_degree(v);
    }
    for e in graph.edges() {
        let (a, b) = (initial[e.u], initial[e.v]);
        if a != b {
            *links[a].entry(b).or_default() += e.weight;
            *links[b].entry(a).or_default() += e.weight;
        }
    }
    let mut alive: Vec<bool> = vec![true; c];
    let mut parent: Vec<usize> = (0..c).collect();
    let mut remaining = c;
    let mut merges = 0;
    let gain = |w: f64, va: f64, vb: f64| {
        if two_m > 0.0 {
            2.0 * (w / two_m - va * vb / (two_m * two_m))
        } else {
            0.0
        }
    };
    while remaining > k {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in (0..c).filter(|&a| alive[a]) {
            for (&b, &w) in links[a].range(a + 1..) {
                let g = gain(w, vol[a], vol[b]);
                if best.is_none_or(|(bg, _, _)| g > bg) {
                    best = Some((g, a, b));
                }
            }
        }
        // the two lightest clusters, for when an unlinked merge is no worse
        let mut light: Vec<usize> = (0..c).filter(|&a| alive[a]).collect();
        light.sort_by(|&x, &y| vol[x].total_cmp(&vol[y]).then(x.cmp(&y)));
        let (x, y) = (light[0].min(light[1]), light[0].max(light[1]));
        if !links[x].contains_key(&y) {
            let g = gain(0.0, vol[x], vol[y]);
            if best.is_none_or(|(bg, _, _)| g > bg) {
                best = Some((g, x, y));
            }
        }
        let (_, a, b) = best.expect("at least two clusters alive");

        let moved = std::mem::take(&mut links[b]);
        for (other, w) in moved {
            links[other].remove(&b);
            if other != a {
                *links[other].entry(a).or_default() += w;
                *links[a].entry(other).or_default() += w;
            }
        }
        links[a].remove(&b);
        vol[a] += vol[b];
        alive[b] = false;
        parent[b] = a;
        remaining -= 1;
        merges += 1;
    }
    let root = |mut x: usize| {
        while parent[x] != x {
            x = parent[x];
        }
        x
    };
    let merged: Vec<usize> = initial.iter().map(|&l| root(l)).collect();
    (canonical(&merged), merges)
}

/// Relabels clusters `0..` in order of first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{macro_f1, nmi, Partition};

    fn request(k: usize, seed: u64) -> TrainRequest {
        TrainRequest {
            dataset_path: String::new(),
            params: Params::new(),
            seed,
            max_epochs: 5000,
            patience: 20,
            k,
            train_nodes: vec![],
            val_nodes: vec![],
        }
    }

    fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in (i + 1)..5 {
                    edges.push((base + i, base + j));
                }
            }
        }
        edges.push((4, 5));
        Graph::builder(10)
            .unit_edges(edges)
            .features(FeatureMatrix::zeros(10, 1))
            .build()
            .unwrap()
    }

    #[test]
    fn random_partition_in_range_and_deterministic() {
        let g = Graph::builder(9).build().unwrap();
        let (a, _) = Builtin::Random.train(&g, &request(3, 7)).unwrap();
        assert_eq!(a.len(), 9);
        assert!(a.iter().all(|&c| c < 3));
        assert_eq!(a, Builtin::Random.train(&g, &request(3, 7)).unwrap().0);
    }

    #[test]
    fn kmeans_separates_blobs() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let off = if i < 10 { 0.0 } else { 10.0 };
                vec![off + (i % 3) as f64 * 0.1, off - (i % 4) as f64 * 0.1]
            })
            .collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let g = Graph::builder(20)
            .features(FeatureMatrix::from_rows(rows).unwrap())
            .labels(labels.clone())
            .build()
            .unwrap();
        for seed in 0..5 {
            let (a, _) = Builtin::Kmeans.train(&g, &request(2, seed)).unwrap();
            let p = Partition::new(a, 2).unwrap();
            let all: Vec<usize> = (0..20).collect();
            assert_eq!(macro_f1(&p, &labels, &all).unwrap().value, 1.0);
        }
    }

    #[test]
    fn kmeans_without_features_errors() {
        let g = Graph::builder(3).build().unwrap();
        assert!(Builtin::Kmeans.train(&g, &request(2, 0)).is_err());
    }

    #[test]
    fn label_propagation_recovers_cliques() {
        let g = two_cliques();
        for seed in 0..10 {
            let (a, _) = Builtin::LabelPropagation.train(&g, &request(2, seed)).unwrap();
            assert!(a[..5].iter().all(|&c| c == a[0]), "{a:?}");
            assert!(a[5..].iter().all(|&c| c == a[5]), "{a:?}");
            assert_ne!(a[0], a[5]);
        }
    }

    #[test]
    fn greedy_modularity_recovers_cliques() {
        let (a, merges) = Builtin::GreedyModularity.train(&two_cliques(), &request(2, 0)).unwrap();
        assert_eq!(a, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(merges, 8);
    }

    #[test]
    fn agglomerate_handles_isolated_nodes() {
        let g = Graph::builder(5).unit_edges([(0, 1)]).build().unwrap();
        let (a, _) = agglomerate(&g, (0..5).collect(), 2);
        assert_eq!(a.iter().max(), Some(&1));
        assert_eq!(a[0], a[1]);
    }

    #[test]
    fn random_partition_nmi_near_zero() {
        let g = Graph::builder(200).build().unwrap();
        let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let all: Vec<usize> = (0..200).collect();
        let mean = (0..50)
            .map(|s| {
                let (a, _) = Builtin::Random.train(&g, &request(4, s)).unwrap();
                nmi(&Partition::new(a, 4).unwrap(), &labels, &all).unwrap().value
            })
            .sum::<f64>()
            / 50.0;
        assert!(mean < 0.05, "{mean}");
    }

    #[test]
    fn params_are_checked() {
        let mut p = Params::new();
        p.insert("max_rounds".into(), ParamValue::Int(0));
        assert!(Builtin::LabelPropagation.resolve_params(&p).is_err());
        p.insert("max_rounds".into(), ParamValue::Int(5));
        p.insert("patience".into(), ParamValue::Int(5));
        assert_eq!(Builtin::LabelPropagation.resolve_params(&p).unwrap()["max_rounds"], ParamValue::Int(5));
        p.insert("bogus".into(), ParamValue::Int(1));
        assert!(Builtin::LabelPropagation.resolve_params(&p).is_err());
    }
}
