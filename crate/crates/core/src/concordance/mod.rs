//! Ranking consistency across random seeds.
//!
//! For every test the algorithms are ranked once per seed (rank 1 is best,
//! ties share the average of the ranks they span, failures are ranked below
//! every finite value). Kendall's W measures how well the seed rankings
//! agree:
//!
//! ```text
//! S   = sum_j (R_j - n(a+1)/2)^2        R_j = total rank of algorithm j
//! W_t = 12 S / (n^2 (a^3 - a))
//! ```
//!
//! and the W randomness coefficient is `1 - mean_t W_t`: zero when every
//! seed produces the same ranking, larger when randomness reorders results.
//!
//! The framework comparison rank pits two result cubes (for instance default
//! against tuned hyperparameters) against each other on every
//! `(algorithm, test)` pair and averages the head-to-head ranks.

mod cube;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Orientation;

pub use cube::{Cell, CubeBuilder, FailureReason, ResultsCube, TestPoint};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConcordanceError {
    #[error("need at least 2 algorithms, got {0}")]
    TooFewAlgorithms(usize),
    #[error("need at least 2 seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("the test suite is empty")]
    EmptySuite,
    #[error("cubes are not aligned: {0}")]
    Alignment(String),
    #[error("incomplete cube: {0}")]
    Incomplete(String),
    #[error("malformed cube: {0}")]
    Shape(String),
    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },
}

/// Ranks of one seed's values. `all_failed` marks rows where no algorithm
/// produced a value, so every entry shares the middle rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRanking {
    pub ranks: Vec<f64>,
    pub all_failed: bool,
}

/// Average ranks, best first. Failed or non-finite entries share the worst
/// ranks.
pub fn rank_within_seed(
    values: &[Cell],
    orientation: Orientation,
) -> Result<SeedRanking, ConcordanceError> {
    let a = values.len();
    if a < 2 {
        return Err(ConcordanceError::TooFewAlgorithms(a));
    }
    // None sorts last; Some sorts best-first under the orientation
    let keys: Vec<Option<f64>> = values
        .iter()
        .map(|c| {
            c.value().map(|v| match orientation {
                Orientation::HigherBetter => v,
                Orientation::LowerBetter => -v,
            })
        })
        .collect();
    let mut order: Vec<usize> = (0..a).collect();
    order.sort_by(|&i, &j| match (keys[i], keys[j]) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });

    let mut ranks = vec![0.0; a];
    let mut start = 0;
    while start < a {
        let mut end = start + 1;
        while end < a && keys[order[end]] == keys[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let average = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = average;
        }
        start = end;
    }
    Ok(SeedRanking {
        ranks,
        all_failed: keys.iter().all(Option::is_none),
    })
}

/// `n x a` ranks for one test, one row per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RankMatrix {
    rows: Vec<Vec<f64>>,
}

impl RankMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ConcordanceError> {
        let n = rows.len();
        if n < 2 {
            return Err(ConcordanceError::TooFewSeeds(n));
        }
        let a = rows[0].len();
        if a < 2 {
            return Err(ConcordanceError::TooFewAlgorithms(a));
        }
        if rows.iter().any(|r| r.len() != a) {
            return Err(ConcordanceError::Shape("ragged rank matrix".into()));
        }
        Ok(Self { rows })
    }

    pub fn seeds(&self) -> usize {
        self.rows.len()
    }

    pub fn algorithms(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Total rank `R_j` of each algorithm over all seeds.
    pub fn totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.algorithms()];
        for row in &self.rows {
            for (t, r) in totals.iter_mut().zip(row) {
                *t += r;
            }
        }
        totals
    }

    /// Sum of squared deviations of the totals from their mean `n(a+1)/2`.
    pub fn squared_deviations(&self) -> f64 {
        let n = self.seeds() as f64;
        let a = self.algorithms() as f64;
        let mean = n * (a + 1.0) / 2.0;
        self.totals().iter().map(|r| (r - mean).powi(2)).sum()
    }

    /// `sum over rows and tie groups of (t^3 - t)`.
    fn tie_term(&self) -> f64 {
        self.tie_groups().map(|t| t * t * t - t).sum()
    }

    fn tie_groups(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().flat_map(|row| {
            let mut sorted = row.clone();
            sorted.sort_by(f64::total_cmp);
            let mut groups = Vec::new();
            let mut start = 0;
            while start < sorted.len() {
                let mut end = start + 1;
                while end < sorted.len() && sorted[end] == sorted[start] {
                    end += 1;
                }
                if end - start > 1 {
                    groups.push((end - start) as f64);
                }
                start = end;
            }
            groups
        })
    }

    /// Fraction of within-seed algorithm pairs that are tied.
    pub fn tie_fraction(&self) -> f64 {
        let a = self.algorithms() as f64;
        let pairs = self.seeds() as f64 * a * (a - 1.0) / 2.0;
        let tied: f64 = self.tie_groups().map(|t| t * (t - 1.0) / 2.0).sum();
        tied / pairs
    }
}

/// Kendall's W for one test, without tie correction, clamped to `[0, 1]`.
pub fn kendall_w(ranks: &RankMatrix) -> f64 {
    let n = ranks.seeds() as f64;
    let a = ranks.algorithms() as f64;
    let w = 12.0 * ranks.squared_deviations() / (n * n * (a * a * a - a));
    w.clamp(0.0, 1.0)
}

/// Kendall's W with the standard tie correction in the denominator.
/// `None` when every seed ties every algorithm.
pub fn kendall_w_tie_corrected(ranks: &RankMatrix) -> Option<f64> {
    let n = ranks.seeds() as f64;
    let a = ranks.algorithms() as f64;
    let denominator = n * n * (a * a * a - a) - n * ranks.tie_term();
    (denominator > 0.0).then(|| (12.0 * ranks.squared_deviations() / denominator).clamp(0.0, 1.0))
}

/// Share of tied comparisons above which the tie-corrected W is reported.
pub const TIE_REPORT_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConcordanceOptions {
    /// Also aggregate a tie-corrected coefficient over all tests.
    pub tie_corrected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConcordance {
    pub test: TestPoint,
    pub squared_deviations: f64,
    pub w: f64,
    pub tie_fraction: f64,
    /// Present when ties exceed [`TIE_REPORT_THRESHOLD`] or when requested.
    pub w_tie_corrected: Option<f64>,
    /// Seeds on which every algorithm failed.
    pub all_failed_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcordanceReport {
    pub tests: Vec<TestConcordance>,
    /// `1 - mean(W_t)`; lower means more consistent rankings.
    pub w_randomness: f64,
    pub mean_w: f64,
    /// Population standard deviation of `W_t` across tests.
    pub std_w: f64,
    pub w_randomness_tie_corrected: Option<f64>,
}

pub fn rank_matrix(cube: &ResultsCube, test: usize) -> Result<(RankMatrix, usize), ConcordanceError> {
    let orientation = cube.tests()[test].metric.orientation();
    let mut rows = Vec::with_capacity(cube.seeds().len());
    let mut all_failed = 0;
    for s in 0..cube.seeds().len() {
        let ranking = rank_within_seed(&cube.seed_row(s, test), orientation)?;
        all_failed += usize::from(ranking.all_failed);
        rows.push(ranking.ranks);
    }
    Ok((RankMatrix::new(rows)?, all_failed))
}

pub fn w_randomness_coefficient(cube: &ResultsCube) -> Result<ConcordanceReport, ConcordanceError> {
    w_randomness_coefficient_with(cube, ConcordanceOptions::default())
}

pub fn w_randomness_coefficient_with(
    cube: &ResultsCube,
    options: ConcordanceOptions,
) -> Result<ConcordanceReport, ConcordanceError> {
    if cube.tests().is_empty() {
        return Err(ConcordanceError::EmptySuite);
    }
    if cube.algorithms().len() < 2 {
        return Err(ConcordanceError::TooFewAlgorithms(cube.algorithms().len()));
    }
    if cube.seeds().len() < 2 {
        return Err(ConcordanceError::TooFewSeeds(cube.seeds().len()));
    }
    let mut tests = Vec::with_capacity(cube.tests().len());
    for (t, test) in cube.tests().iter().enumerate() {
        let (ranks, all_failed_seeds) = rank_matrix(cube, t)?;
        let tie_fraction = ranks.tie_fraction();
        let w_tie_corrected = if options.tie_corrected || tie_fraction > TIE_REPORT_THRESHOLD {
            kendall_w_tie_corrected(&ranks)
        } else {
            None
        };
        tests.push(TestConcordance {
            test: test.clone(),
            squared_deviations: ranks.squared_deviations(),
            w: kendall_w(&ranks),
            tie_fraction,
            w_tie_corrected,
            all_failed_seeds,
        });
    }
    let count = tests.len() as f64;
    let mean_w = tests.iter().map(|t| t.w).sum::<f64>() / count;
    let std_w = (tests.iter().map(|t| (t.w - mean_w).powi(2)).sum::<f64>() / count).sqrt();
    let w_randomness_tie_corrected = options.tie_corrected.then(|| {
        let sum: f64 = tests
            .iter()
            .map(|t| t.w_tie_corrected.unwrap_or(t.w))
            .sum();
        1.0 - sum / count
    });
    Ok(ConcordanceReport {
        tests,
        w_randomness: (1.0 - mean_w).clamp(0.0, 1.0),
        mean_w,
        std_w,
        w_randomness_tie_corrected,
    })
}

/// How seeds are collapsed before two contenders are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedReduction {
    /// Compare the mean over successful seeds.
    #[default]
    MeanOverSeeds,
    /// Compare seed by seed.
    PerSeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub algorithm: String,
    pub test: TestPoint,
    /// Only set under [`SeedReduction::PerSeed`].
    pub seed: Option<u64>,
    pub ranks: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reduction: SeedReduction,
    /// Mean head-to-head rank of each contender.
    pub mean: [f64; 2],
    /// Population standard deviation over all entries.
    pub std: [f64; 2],
    pub entries: Vec<ComparisonEntry>,
}

fn head_to_head(a: Option<f64>, b: Option<f64>, orientation: Orientation) -> [f64; 2] {
    let better = |x: f64, y: f64| match orientation {
        Orientation::HigherBetter => x > y,
        Orientation::LowerBetter => x < y,
    };
    match (a, b) {
        (Some(x), Some(y)) if x == y => [1.5, 1.5],
        (Some(x), Some(y)) if better(x, y) => [1.0, 2.0],
        (Some(_), Some(_)) => [2.0, 1.0],
        (Some(_), None) => [1.0, 2.0],
        (None, Some(_)) => [2.0, 1.0],
        (None, None) => [1.5, 1.5],
    }
}

fn seed_mean(cube: &ResultsCube, a: usize, t: usize) -> Option<f64> {
    let values: Vec<f64> = (0..cube.seeds().len())
        .filter_map(|s| cube.get(a, s, t).value())
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Framework comparison rank of contender `a` against contender `b`.
pub fn framework_comparison_rank(
    a: &ResultsCube,
    b: &ResultsCube,
    reduction: SeedReduction,
) -> Result<ComparisonReport, ConcordanceError> {
    if a.algorithms() != b.algorithms() {
        return Err(ConcordanceError::Alignment("algorithm lists differ".into()));
    }
    if a.seeds() != b.seeds() {
        return Err(ConcordanceError::Alignment("seed lists differ".into()));
    }
    if a.tests() != b.tests() {
        return Err(ConcordanceError::Alignment("test lists differ".into()));
    }
    if a.tests().is_empty() || a.algorithms().is_empty() {
        return Err(ConcordanceError::EmptySuite);
    }

    let mut entries = Vec::new();
    for (ai, algorithm) in a.algorithms().iter().enumerate() {
        for (t, test) in a.tests().iter().enumerate() {
            let orientation = test.metric.orientation();
            match reduction {
                SeedReduction::MeanOverSeeds => entries.push(ComparisonEntry {
                    algorithm: algorithm.clone(),
                    test: test.clone(),
                    seed: None,
                    ranks: head_to_head(seed_mean(a, ai, t), seed_mean(b, ai, t), orientation),
                }),
                SeedReduction::PerSeed => {
                    for (s, &seed) in a.seeds().iter().enumerate() {
                        entries.push(ComparisonEntry {
                            algorithm: algorithm.clone(),
                            test: test.clone(),
                            seed: Some(seed),
                            ranks: head_to_head(
                                a.get(ai, s, t).value(),
                                b.get(ai, s, t).value(),
                                orientation,
                            ),
                        });
                    }
                }
            }
        }
    }

    let count = entries.len() as f64;
    let mut mean = [0.0; 2];
    let mut std = [0.0; 2];
    for side in 0..2 {
        mean[side] = entries.iter().map(|e| e.ranks[side]).sum::<f64>() / count;
        std[side] = (entries
            .iter()
            .map(|e| (e.ranks[side] - mean[side]).powi(2))
            .sum::<f64>()
            / count)
            .sqrt();
    }
    Ok(ComparisonReport {
        reduction,
        mean,
        std,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Metric;

    fn v(x: &[f64]) -> Vec<Cell> {
        x.iter().map(|&x| Cell::Value(x)).collect()
    }

    #[test]
    fn ranking_examples() {
        let r = rank_within_seed(&v(&[0.9, 0.5, 0.7]), Orientation::HigherBetter).unwrap();
        assert_eq!(r.ranks, vec![1.0, 3.0, 2.0]);
        let r = rank_within_seed(&v(&[0.9, 0.9, 0.1]), Orientation::HigherBetter).unwrap();
        assert_eq!(r.ranks, vec![1.5, 1.5, 3.0]);
        let cells = [
            Cell::Value(0.2),
            Cell::Failed(FailureReason::Crash),
            Cell::Value(0.3),
        ];
        let r = rank_within_seed(&cells, Orientation::LowerBetter).unwrap();
        assert_eq!(r.ranks, vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn failures_share_last_ranks() {
        let cells = [
            Cell::Failed(FailureReason::Oom),
            Cell::Value(0.1),
            Cell::Failed(FailureReason::Timeout),
        ];
        let r = rank_within_seed(&cells, Orientation::HigherBetter).unwrap();
        assert_eq!(r.ranks, vec![2.5, 1.0, 2.5]);
        assert!(!r.all_failed);

        let cells = [Cell::Failed(FailureReason::Oom); 4];
        let r = rank_within_seed(&cells, Orientation::HigherBetter).unwrap();
        assert_eq!(r.ranks, vec![2.5; 4]);
        assert!(r.all_failed);
    }

    #[test]
    fn ranking_needs_two_algorithms() {
        assert_eq!(
            rank_within_seed(&v(&[1.0]), Orientation::HigherBetter),
            Err(ConcordanceError::TooFewAlgorithms(1))
        );
    }

    #[test]
    fn kendall_examples() {
        let same = RankMatrix::new(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(same.totals(), vec![2.0, 4.0, 6.0]);
        assert_eq!(same.squared_deviations(), 8.0);
        assert_eq!(kendall_w(&same), 1.0);

        let reversed = RankMatrix::new(vec![vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]).unwrap();
        assert_eq!(kendall_w(&reversed), 0.0);

        let three = RankMatrix::new(vec![vec![2.0, 1.0, 3.0]; 3]).unwrap();
        assert_eq!(kendall_w(&three), 1.0);
    }

    #[test]
    fn rank_matrix_dimensions() {
        assert_eq!(
            RankMatrix::new(vec![vec![1.0, 2.0]]),
            Err(ConcordanceError::TooFewSeeds(1))
        );
        assert_eq!(
            RankMatrix::new(vec![vec![1.0], vec![1.0]]),
            Err(ConcordanceError::TooFewAlgorithms(1))
        );
    }

    #[test]
    fn tie_correction() {
        let m = RankMatrix::new(vec![vec![1.5, 1.5, 3.0], vec![1.5, 1.5, 3.0]]).unwrap();
        // totals 3, 3, 6; mean 4; S = 1 + 1 + 4
        assert_eq!(m.squared_deviations(), 6.0);
        assert_eq!(kendall_w(&m), 72.0 / 96.0);
        // one tied pair per row: sum (t^3 - t) = 12, denominator 96 - 2 * 12
        assert_eq!(kendall_w_tie_corrected(&m), Some(1.0));
        assert!((m.tie_fraction() - 1.0 / 3.0).abs() < 1e-15);

        let flat = RankMatrix::new(vec![vec![1.5, 1.5]; 3]).unwrap();
        assert_eq!(kendall_w_tie_corrected(&flat), None);
    }

    fn cube(values: &[[[f64; 2]; 2]]) -> ResultsCube {
        // values[algorithm][seed][test]
        let cells = values
            .iter()
            .flat_map(|a| a.iter().flat_map(|s| s.iter().map(|&x| Cell::Value(x))))
            .collect();
        ResultsCube::new(
            (0..values.len()).map(|i| format!("alg{i}")).collect(),
            vec![42, 24],
            vec![TestPoint::new("d", Metric::Nmi), TestPoint::new("d", Metric::Conductance)],
            cells,
        )
        .unwrap()
    }

    #[test]
    fn coefficient_zero_when_rankings_agree() {
        let c = cube(&[[[0.9, 0.1], [0.8, 0.2]], [[0.5, 0.5], [0.4, 0.6]]]);
        let report = w_randomness_coefficient(&c).unwrap();
        assert_eq!(report.w_randomness, 0.0);
        assert_eq!(report.mean_w, 1.0);
    }

    #[test]
    fn coefficient_one_when_rankings_flip() {
        let c = cube(&[[[0.9, 0.1], [0.1, 0.9]], [[0.5, 0.5], [0.5, 0.5]]]);
        let report = w_randomness_coefficient(&c).unwrap();
        assert_eq!(report.w_randomness, 1.0);
    }

    #[test]
    fn coefficient_averages_tests() {
        // nmi agrees across seeds (W=1); conductance flips (W=0)
        let c = cube(&[[[0.9, 0.1], [0.8, 0.9]], [[0.5, 0.5], [0.4, 0.5]]]);
        let report = w_randomness_coefficient(&c).unwrap();
        assert_eq!(report.tests[0].w, 1.0);
        assert_eq!(report.tests[1].w, 0.0);
        assert_eq!(report.w_randomness, 0.5);
        assert_eq!(report.std_w, 0.5);
    }

    #[test]
    fn empty_suite_is_an_error() {
        let c = ResultsCube::new(vec!["a".into(), "b".into()], vec![1, 2], vec![], vec![]).unwrap();
        assert_eq!(w_randomness_coefficient(&c), Err(ConcordanceError::EmptySuite));
    }

    #[test]
    fn fcr_examples() {
        let better = cube(&[[[0.9, 0.1], [0.9, 0.1]], [[0.9, 0.1], [0.9, 0.1]]]);
        let worse = cube(&[[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]);
        let r = framework_comparison_rank(&better, &worse, SeedReduction::MeanOverSeeds).unwrap();
        assert_eq!(r.mean, [1.0, 2.0]);
        assert_eq!(r.std, [0.0, 0.0]);
        let r = framework_comparison_rank(&worse, &worse, SeedReduction::PerSeed).unwrap();
        assert_eq!(r.mean, [1.5, 1.5]);
        assert_eq!(r.entries.len(), 2 * 2 * 2);
    }

    #[test]
    fn fcr_requires_alignment() {
        let a = cube(&[[[0.9, 0.1], [0.9, 0.1]], [[0.9, 0.1], [0.9, 0.1]]]);
        let b = cube(&[[[0.9, 0.1], [0.9, 0.1]]]);
        assert!(matches!(
            framework_comparison_rank(&a, &b, SeedReduction::MeanOverSeeds),
            Err(ConcordanceError::Alignment(_))
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "algorithm,seed,dataset,metric,value\n\
                    a,42,cora,nmi,0.5\na,24,cora,nmi,0.6\nb,42,cora,nmi,FAILED:oom\nb,24,cora,nmi,0.1\n";
        let c = ResultsCube::from_csv(text.as_bytes()).unwrap();
        assert_eq!(c.algorithms(), &["a".to_string(), "b".to_string()]);
        assert_eq!(c.get(1, 0, 0), Cell::Failed(FailureReason::Oom));
        let mut out = Vec::new();
        c.to_csv(&mut out).unwrap();
        assert_eq!(ResultsCube::from_csv(out.as_slice()).unwrap(), c);

        let missing = "a,42,cora,nmi,0.5\nb,24,cora,nmi,0.1\n";
        assert!(matches!(
            ResultsCube::from_csv(missing.as_bytes()),
            Err(ConcordanceError::Incomplete(_))
        ));
        let dup = "a,42,cora,nmi,0.5\na,42,cora,nmi,0.5\n";
        assert!(matches!(
            ResultsCube::from_csv(dup.as_bytes()),
            Err(ConcordanceError::Csv { line: 2, .. })
        ));
    }
}
