//! Independent reference implementations shared by the integration tests.
//! They follow the textbook formulas directly and share no code with the
//! library beyond its data types.

#![allow(dead_code)]

use std::collections::BTreeMap;

use commbench::concordance::{Cell, ResultsCube};
use commbench::graph::Graph;
use commbench::metrics::Orientation;

/// Rank of each entry, 1 = best; ties and failures share average ranks and
/// failures come after every value.
pub fn naive_ranks(row: &[Option<f64>], orientation: Orientation) -> Vec<f64> {
    let better = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(a), Some(b)) => match orientation {
            Orientation::HigherBetter => a > b,
            Orientation::LowerBetter => a < b,
        },
        (Some(_), None) => true,
        _ => false,
    };
    let same = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(a), Some(b)) => a == b,
        (None, None) => true,
        _ => false,
    };
    (0..row.len())
        .map(|i| {
            let ahead = (0..row.len()).filter(|&j| better(row[j], row[i])).count() as f64;
            let tied = (0..row.len()).filter(|&j| j != i && same(row[j], row[i])).count() as f64;
            1.0 + ahead + tied / 2.0
        })
        .collect()
}

/// Kendall's W for an `n x a` rank matrix, straight from the definition.
pub fn naive_w(ranks: &[Vec<f64>]) -> f64 {
    let n = ranks.len() as f64;
    let a = ranks[0].len();
    let totals: Vec<f64> = (0..a).map(|j| ranks.iter().map(|r| r[j]).sum()).collect();
    let mean = totals.iter().sum::<f64>() / a as f64;
    let s: f64 = totals.iter().map(|t| (t - mean) * (t - mean)).sum();
    let a = a as f64;
    12.0 * s / (n * n * (a * a * a - a))
}

pub fn naive_w_randomness(cube: &ResultsCube) -> f64 {
    let mut total = 0.0;
    for (t, test) in cube.tests().iter().enumerate() {
        let ranks: Vec<Vec<f64>> = (0..cube.seeds().len())
            .map(|s| {
                let row: Vec<Option<f64>> = (0..cube.algorithms().len()).map(|a| cube.get(a, s, t).value()).collect();
                naive_ranks(&row, test.metric.orientation())
            })
            .collect();
        total += naive_w(&ranks);
    }
    1.0 - total / cube.tests().len() as f64
}

/// `Q = 1/2m sum_ij [A_ij - k_i k_j / 2m] delta(c_i, c_j)` over all ordered
/// node pairs.
pub fn brute_modularity(g: &Graph, assignment: &[usize]) -> f64 {
    let n = g.node_count();
    let mut adj = vec![vec![0.0; n]; n];
    for e in g.edges() {
        adj[e.u][e.v] += e.weight;
        adj[e.v][e.u] += e.weight;
    }
    let k: Vec<f64> = adj.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if assignment[i] == assignment[j] {
                q += adj[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Macro-F1 by trying every one-to-one assignment of clusters to classes:
/// the largest total overlap wins, then the largest macro-F1.
pub fn brute_macro_f1(pred: &[usize], labels: &[usize], subset: &[usize]) -> f64 {
    let mut classes: Vec<usize> = subset.iter().map(|&i| labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut clusters: Vec<usize> = subset.iter().map(|&i| pred[i]).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let mut overlap: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &i in subset {
        *overlap.entry((labels[i], pred[i])).or_default() += 1.0;
    }
    let class_size = |c: usize| subset.iter().filter(|&&i| labels[i] == c).count() as f64;
    let cluster_size = |m: usize| subset.iter().filter(|&&i| pred[i] == m).count() as f64;
    let f1 = |c: usize, m: usize| {
        2.0 * overlap.get(&(c, m)).copied().unwrap_or(0.0) / (class_size(c) + cluster_size(m))
    };

    // each class picks a distinct cluster or none
    fn search(
        c: usize,
        classes: &[usize],
        clusters: &[usize],
        used: &mut Vec<bool>,
        acc: (f64, f64),
        best: &mut (f64, f64),
        score: &dyn Fn(usize, usize) -> (f64, f64),
    ) {
        if c == classes.len() {
            if acc.0 > best.0 || (acc.0 == best.0 && acc.1 > best.1) {
                *best = acc;
            }
            return;
        }
        search(c + 1, classes, clusters, used, acc, best, score);
        for m in 0..clusters.len() {
            if !used[m] {
                used[m] = true;
                let (o, f) = score(classes[c], clusters[m]);
                search(c + 1, classes, clusters, used, (acc.0 + o, acc.1 + f), best, score);
                used[m] = false;
            }
        }
    }
    let score = |c: usize, m: usize| (overlap.get(&(c, m)).copied().unwrap_or(0.0), f1(c, m));
    let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    search(0, &classes, &clusters, &mut vec![false; clusters.len()], (0.0, 0.0), &mut best, &score);
    best.1 / classes.len() as f64
}

pub fn cells_of(cube: &ResultsCube, algorithm: usize) -> Vec<Cell> {
    (0..cube.seeds().len())
        .flat_map(|s| (0..cube.tests().len()).map(move |t| (s, t)))
        .map(|(s, t)| cube.get(algorithm, s, t))
        .collect()
}

/// Random cube with up to `max_alg` algorithms, 10 seeds and 8 tests. Values
/// come from a coarse grid so ties are common; roughly one cell in ten fails.
pub fn random_cube(seed: u64, max_alg: usize) -> ResultsCube {
    use commbench::concordance::{FailureReason, TestPoint};
    use commbench::metrics::Metric;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random_range(2..=max_alg);
    let n = rng.random_range(2..=10);
    let t = rng.random_range(1..=8);
    let algorithms = (0..a).map(|i| format!("alg{i}")).collect();
    let seeds = (0..n as u64).collect();
    let tests = (0..t)
        .map(|i| TestPoint::new(format!("d{}", i / 4), Metric::ALL[i % 4]))
        .collect();
    let mut b = ResultsCube::builder(algorithms, seeds, tests);
    for ai in 0..a {
        for s in 0..n {
            for ti in 0..t {
                let cell = if rng.random_bool(0.1) {
                    Cell::Failed(FailureReason::Crash)
                } else {
                    Cell::Value(rng.random_range(0..6) as f64 / 5.0)
                };
                b.set(ai, s, ti, cell);
            }
        }
    }
    b.build().unwrap()
}

/// Per-arm rewards of the deceptive bandit: most arms are poor, one decoy
/// scores 0.8 and a single arm scores 1.0, in a shuffled order so arm
/// indices carry no information.
pub fn bandit_rewards() -> Vec<Vec<f64>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    (0..4u64)
        .map(|d| {
            let mut r = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.8, 1.0];
            r.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(100 + d));
            r
        })
        .collect()
}

pub fn bandit_space() -> commbench::hpo::SearchSpace {
    use commbench::hpo::Dimension;
    let dims = (0..4)
        .map(|d| Dimension::categorical(&format!("arm{d}"), (0..8i64).map(Into::into).collect()))
        .collect();
    commbench::hpo::SearchSpace::new(dims).unwrap()
}

pub fn bandit_reward(rewards: &[Vec<f64>], arms: &[usize]) -> f64 {
    arms.iter().enumerate().map(|(d, &a)| rewards[d][a]).sum()
}

/// Best bandit reward found by a TPE study.
pub fn bandit_tpe(trials: usize, seed: u64) -> f64 {
    use commbench::hpo::{run_study, StudyConfig};
    let rewards = bandit_rewards();
    let objective = |p: &commbench::hpo::Params| {
        let arms: Vec<usize> = (0..4).map(|d| p[&format!("arm{d}")].as_i64().unwrap() as usize).collect();
        Ok(vec![bandit_reward(&rewards, &arms)])
    };
    let config = StudyConfig {
        max_trials: trials,
        ..StudyConfig::default()
    };
    let study = run_study(objective, bandit_space(), config, seed).unwrap();
    commbench::hpo::select_best(study.history(), 0).unwrap().objectives[0]
}

/// Best bandit reward found by uniform random search.
pub fn bandit_random(trials: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let rewards = bandit_rewards();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1000);
    (0..trials)
        .map(|_| {
            let arms: Vec<usize> = (0..4).map(|_| rng.random_range(0..8)).collect();
            bandit_reward(&rewards, &arms)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest `x^2 + y^2` found by TPE on `[-5, 5]^2`.
pub fn sphere_tpe(trials: usize, seed: u64) -> f64 {
    use commbench::hpo::{run_study, Dimension, SearchSpace, StudyConfig};
    let space = SearchSpace::new(vec![Dimension::uniform("x", -5.0, 5.0), Dimension::uniform("y", -5.0, 5.0)]).unwrap();
    let objective = |p: &commbench::hpo::Params| {
        let (x, y) = (p["x"].as_f64().unwrap(), p["y"].as_f64().unwrap());
        Ok(vec![-(x * x + y * y)])
    };
    let config = StudyConfig {
        max_trials: trials,
        ..StudyConfig::default()
    };
    let study = run_study(objective, space, config, seed).unwrap();
    -commbench::hpo::select_best(study.history(), 0).unwrap().objectives[0]
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub const KARATE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/karate");

/// External spec that runs a builtin through the binary's protocol server,
/// optionally with an injected fault.
pub fn served(builtin: commbench::runner::Builtin, fault: Option<&str>) -> commbench::runner::RunnerSpec {
    use commbench::runner::RunnerSpec;
    let mut launch = vec![env!("CARGO_BIN_EXE_commbench").to_string(), "serve-builtin".into(), builtin.name().into()];
    if let Some(f) = fault {
        launch.extend(["--inject".to_string(), f.to_string()]);
    }
    let name = match fault {
        Some(f) => format!("{}-{f}", builtin.name()),
        None => format!("{}-served", builtin.name()),
    };
    RunnerSpec::external(&name, launch, builtin.search_space()).with_defaults(builtin.defaults())
}
