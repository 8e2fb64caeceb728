//! Multi-objective Tree Parzen Estimator search.
//!
//! Completed trials are split into a good and a bad set by Pareto-front
//! peeling, each set is modelled per dimension by a Parzen estimator, and the
//! next point is the candidate drawn from the good density that maximizes the
//! density ratio. All objectives are maximized.

mod pareto;
mod parzen;
mod space;
mod study;

use thiserror::Error;

pub use pareto::{crowding_distance, dominates, good_set_size, nondominated_fronts, split_by_dominance, Split};
pub use parzen::{CategoricalParzen, NumericParzen};
pub use space::{Condition, Dimension, Domain, ParamValue, Params, SearchSpace};
pub use study::{run_study, select_best, Study, StudyConfig, Trial, TrialStatus};

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error("trial budget of {max_trials} exhausted")]
    BudgetExhausted { max_trials: usize },
    #[error("no complete trials to select from")]
    NoCompleteTrials,
    #[error("objective index {index} out of range for {len} objectives")]
    ObjectiveIndex { index: usize, len: usize },
}

/// Good/bad split of the complete trials in `trials`; indices refer to
/// positions in `trials`.
pub fn nondominated_split(trials: &[Trial], gamma: f64) -> Result<Split, HpoError> {
    let complete: Vec<usize> = (0..trials.len()).filter(|&i| trials[i].is_complete()).collect();
    let points: Vec<Vec<f64>> = complete.iter().map(|&i| trials[i].objectives.clone()).collect();
    let split = split_by_dominance(&points, gamma)?;
    let map = |v: Vec<usize>| v.into_iter().map(|i| complete[i]).collect();
    Ok(Split {
        good: map(split.good),
        bad: map(split.bad),
        tie_broken: map(split.tie_broken),
    })
}
