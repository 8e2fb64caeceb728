use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::parzen::{from_internal, internal_bounds, to_internal, CategoricalParzen, NumericParzen};
use super::pareto::split_by_dominance;
use super::space::{Domain, Params, SearchSpace};
use super::HpoError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub prior_weight: f64,
    pub max_trials: usize,
    /// Trials evaluated concurrently per batch. Suggestions for a batch are
    /// drawn before any of its results are told, so histories depend on this
    /// value but not on thread scheduling.
    pub in_flight: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            prior_weight: 1.0,
            max_trials: 300,
            in_flight: 1,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), HpoError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(HpoError::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.n_candidates == 0 {
            return Err(HpoError::Config("n_candidates must be positive".into()));
        }
        if !(self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return Err(HpoError::Config("prior_weight must be a non-negative number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Complete,
    Failed,
    Pruned,
}

/// One evaluation. Objectives are oriented so that larger is better and are
/// empty unless the trial completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    pub objectives: Vec<f64>,
    pub status: TrialStatus,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Trial {
    pub fn is_complete(&self) -> bool {
        self.status == TrialStatus::Complete
    }
}

#[derive(Debug, Clone)]
pub struct Study {
    space: SearchSpace,
    config: StudyConfig,
    seed: u64,
    rng: ChaCha8Rng,
    history: Vec<Trial>,
    issued: usize,
    n_objectives: Option<usize>,
}

impl Study {
    pub fn new(space: SearchSpace, config: StudyConfig, seed: u64) -> Result<Self, HpoError> {
        config.validate()?;
        Ok(Self {
            space,
            config,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            history: Vec::new(),
            issued: 0,
            n_objectives: None,
        })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn history(&self) -> &[Trial] {
        &self.history
    }

    pub fn remaining(&self) -> usize {
        self.config.max_trials.saturating_sub(self.issued)
    }

    /// Next parameters to evaluate. Uniform during startup or when the
    /// completed trials carry no ranking signal; otherwise the candidate
    /// maximizing l(x)/g(x) per dimension.
    pub fn suggest(&mut self) -> Result<Params, HpoError> {
        if self.remaining() == 0 {
            return Err(HpoError::BudgetExhausted {
                max_trials: self.config.max_trials,
            });
        }
        self.issued += 1;

        let complete: Vec<&Trial> = self.history.iter().filter(|t| t.is_complete()).collect();
        let degenerate = complete.windows(2).all(|w| w[0].objectives == w[1].objectives);
        if self.issued <= self.config.n_startup || complete.len() < 2 || degenerate {
            return Ok(self.space.sample_uniform(&mut self.rng));
        }

        let points: Vec<Vec<f64>> = complete.iter().map(|t| t.objectives.clone()).collect();
        let split = split_by_dominance(&points, self.config.gamma)?;
        let good: Vec<&Params> = split.good.iter().map(|&i| &complete[i].params).collect();
        let bad: Vec<&Params> = split.bad.iter().map(|&i| &complete[i].params).collect();

        let mut params = Params::new();
        for dim in self.space.dimensions() {
            if !dim.is_active(&params) {
                continue;
            }
            let value = match &dim.domain {
                Domain::Categorical { choices } => {
                    let index_of = |set: &[&Params]| -> Vec<usize> {
                        set.iter()
                            .filter_map(|p| p.get(&dim.name))
                            .filter_map(|v| choices.iter().position(|c| c.matches(v)))
                            .collect()
                    };
                    let l = CategoricalParzen::fit(&index_of(&good), choices.len(), self.config.prior_weight);
                    let g = CategoricalParzen::fit(&index_of(&bad), choices.len(), self.config.prior_weight);
                    let mut best = (f64::NEG_INFINITY, 0);
                    for _ in 0..self.config.n_candidates {
                        let c = l.sample(&mut self.rng);
                        let score = l.log_pdf(c) - g.log_pdf(c);
                        if score > best.0 {
                            best = (score, c);
                        }
                    }
                    choices[best.1].clone()
                }
                _ => {
                    let (low, high) = internal_bounds(dim).expect("numeric dimension");
                    let coords = |set: &[&Params]| -> Vec<f64> {
                        set.iter()
                            .filter_map(|p| p.get(&dim.name))
                            .filter_map(|v| to_internal(dim, v))
                            .collect()
                    };
                    let l = NumericParzen::fit(&coords(&good), low, high, self.config.prior_weight);
                    let g = NumericParzen::fit(&coords(&bad), low, high, self.config.prior_weight);
                    let mut best = (f64::NEG_INFINITY, low + (high - low) / 2.0);
                    for _ in 0..self.config.n_candidates {
                        let x = l.sample(&mut self.rng);
                        let score = l.log_pdf(x) - g.log_pdf(x);
                        if score > best.0 {
                            best = (score, x);
                        }
                    }
                    from_internal(dim, best.1)
                }
            };
            params.insert(dim.name.clone(), value);
        }
        Ok(params)
    }

    /// Records the outcome of evaluating `params`. Errors, non-finite
    /// objectives and vectors of the wrong length become failed trials.
    pub fn tell(&mut self, params: Params, outcome: Result<Vec<f64>, String>) -> &Trial {
        let index = self.history.len();
        let checked = outcome.and_then(|objectives| {
            if objectives.is_empty() {
                return Err("empty objective vector".to_string());
            }
            if objectives.iter().any(|x| !x.is_finite()) {
                return Err("non-finite objective".to_string());
            }
            match self.n_objectives {
                Some(n) if n != objectives.len() => Err(format!(
                    "expected {n} objectives, got {}",
                    objectives.len()
                )),
                _ => Ok(objectives),
            }
        });
        let trial = match checked {
            Ok(objectives) => {
                self.n_objectives.get_or_insert(objectives.len());
                Trial {
                    index,
                    params,
                    objectives,
                    status: TrialStatus::Complete,
                    seed: self.seed,
                    error: None,
                }
            }
            Err(message) => {
                log::debug!("trial {index} failed: {message}");
                Trial {
                    index,
                    params,
                    objectives: Vec::new(),
                    status: TrialStatus::Failed,
                    seed: self.seed,
                    error: Some(message),
                }
            }
        };
        self.history.push(trial);
        &self.history[index]
    }

    pub fn best(&self, objective: usize) -> Result<&Trial, HpoError> {
        select_best(&self.history, objective)
    }

    /// Writes one JSON object per trial, one per line.
    pub fn export_history<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for trial in &self.history {
            serde_json::to_writer(&mut writer, trial)?;
            writer.write_all(b"\n")?;
        }
        writer.flush()
    }
}

/// Runs a full study. With `in_flight > 1` each batch is evaluated on the
/// rayon pool; results are told in suggestion order.
pub fn run_study<F>(
    objective: F,
    space: SearchSpace,
    config: StudyConfig,
    seed: u64,
) -> Result<Study, HpoError>
where
    F: Fn(&Params) -> Result<Vec<f64>, String> + Sync,
{
    let mut study = Study::new(space, config, seed)?;
    while study.remaining() > 0 {
        let batch = study.config.in_flight.max(1).min(study.remaining());
        let params = (0..batch)
            .map(|_| study.suggest())
            .collect::<Result<Vec<_>, _>>()?;
        let outcomes: Vec<_> = if batch == 1 {
            vec![objective(&params[0])]
        } else {
            params.par_iter().map(&objective).collect()
        };
        for (p, outcome) in params.into_iter().zip(outcomes) {
            study.tell(p, outcome);
        }
    }
    Ok(study)
}

/// The complete trial with the largest value of objective `objective`;
/// the earliest such trial on ties.
pub fn select_best(trials: &[Trial], objective: usize) -> Result<&Trial, HpoError> {
    let mut best: Option<&Trial> = None;
    for t in trials.iter().filter(|t| t.is_complete()) {
        let Some(&v) = t.objectives.get(objective) else {
            return Err(HpoError::ObjectiveIndex {
                index: objective,
                len: t.objectives.len(),
            });
        };
        if best.is_none_or(|b| v > b.objectives[objective]) {
            best = Some(t);
        }
    }
    best.ok_or(HpoError::NoCompleteTrials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::space::{Dimension, ParamValue};

    fn plane() -> SearchSpace {
        SearchSpace::new(vec![
            Dimension::uniform("x", -5.0, 5.0),
            Dimension::uniform("y", -5.0, 5.0),
        ])
        .unwrap()
    }

    fn quadratic(p: &Params) -> Result<Vec<f64>, String> {
        let x = p["x"].as_f64().unwrap();
        let y = p["y"].as_f64().unwrap();
        Ok(vec![-((x - 1.0).powi(2) + (y + 2.0).powi(2))])
    }

    fn trial(index: usize, objectives: Vec<f64>) -> Trial {
        let mut params = Params::new();
        params.insert("i".into(), ParamValue::Int(index as i64));
        Trial {
            index,
            params,
            objectives,
            status: TrialStatus::Complete,
            seed: 0,
            error: None,
        }
    }

    #[test]
    fn zero_budget_is_empty() {
        let cfg = StudyConfig {
            max_trials: 0,
            ..Default::default()
        };
        let study = run_study(quadratic, plane(), cfg, 42).unwrap();
        assert!(study.history().is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let cfg = StudyConfig {
            max_trials: 1,
            ..Default::default()
        };
        let mut study = Study::new(plane(), cfg, 1).unwrap();
        study.suggest().unwrap();
        assert!(matches!(study.suggest(), Err(HpoError::BudgetExhausted { max_trials: 1 })));
    }

    #[test]
    fn histories_are_reproducible() {
        let cfg = StudyConfig {
            max_trials: 100,
            ..Default::default()
        };
        let export = |in_flight| {
            let cfg = StudyConfig {
                in_flight,
                ..cfg.clone()
            };
            let study = run_study(quadratic, plane(), cfg, 42).unwrap();
            let mut buf = Vec::new();
            study.export_history(&mut buf).unwrap();
            buf
        };
        assert_eq!(export(1), export(1));
        assert_eq!(export(4), export(4));
    }

    #[test]
    fn failures_are_recorded_and_skipped() {
        let cfg = StudyConfig {
            max_trials: 30,
            ..Default::default()
        };
        let study = run_study(
            |p: &Params| {
                if p["x"].as_f64().unwrap() < 0.0 {
                    Err("boom".into())
                } else {
                    quadratic(p)
                }
            },
            plane(),
            cfg,
            3,
        )
        .unwrap();
        assert_eq!(study.history().len(), 30);
        for t in study.history() {
            assert_eq!(t.is_complete(), t.params["x"].as_f64().unwrap() >= 0.0);
        }
    }

    #[test]
    fn wrong_arity_fails_the_trial() {
        let mut study = Study::new(plane(), StudyConfig::default(), 0).unwrap();
        let p = study.suggest().unwrap();
        assert!(study.tell(p.clone(), Ok(vec![1.0, 2.0])).is_complete());
        assert!(!study.tell(p.clone(), Ok(vec![1.0])).is_complete());
        assert!(!study.tell(p, Ok(vec![f64::NAN, 0.0])).is_complete());
    }

    #[test]
    fn identical_objectives_fall_back_to_uniform() {
        let mut study = Study::new(plane(), StudyConfig::default(), 8).unwrap();
        for _ in 0..20 {
            let p = study.suggest().unwrap();
            study.tell(p, Ok(vec![0.5, 0.5]));
        }
        let p = study.suggest().unwrap();
        study.space().validate(&p).unwrap();
    }

    #[test]
    fn good_category_is_favoured() {
        let lrs: Vec<ParamValue> = [0.1, 0.01, 0.001, 0.0001].into_iter().map(ParamValue::Float).collect();
        let space = SearchSpace::new(vec![Dimension::categorical("lr", lrs.clone())]).unwrap();
        let cfg = StudyConfig {
            max_trials: 1040,
            ..Default::default()
        };
        let mut study = Study::new(space, cfg, 11).unwrap();
        for i in 0..40 {
            study.suggest().unwrap();
            let lr = lrs[i % 4].clone();
            let score = if lr == ParamValue::Float(0.01) { 1.0 } else { 0.0 } + i as f64 * 1e-3;
            let mut p = Params::new();
            p.insert("lr".into(), lr);
            study.tell(p, Ok(vec![score]));
        }
        // freeze the history: the estimator depends only on told trials
        let hits = (0..1000)
            .filter(|_| study.suggest().unwrap()["lr"] == ParamValue::Float(0.01))
            .count();
        assert!(hits as f64 / 1000.0 > 0.25, "{hits}");
    }

    #[test]
    fn select_best_rules() {
        assert!(matches!(select_best(&[], 0), Err(HpoError::NoCompleteTrials)));
        let one = [trial(0, vec![0.3])];
        assert_eq!(select_best(&one, 0).unwrap().index, 0);
        let two = [trial(0, vec![0.4]), trial(1, vec![0.9])];
        assert_eq!(select_best(&two, 0).unwrap().index, 1);
        let tie = [trial(0, vec![0.9, 0.0]), trial(1, vec![0.9, 1.0])];
        assert_eq!(select_best(&tie, 0).unwrap().index, 0);
        assert_eq!(select_best(&tie, 1).unwrap().index, 1);
        assert!(matches!(select_best(&tie, 2), Err(HpoError::ObjectiveIndex { .. })));
    }

    #[test]
    fn tpe_finds_the_quadratic_minimum() {
        let cfg = StudyConfig {
            max_trials: 100,
            ..Default::default()
        };
        let study = run_study(quadratic, plane(), cfg, 42).unwrap();
        let best = study.best(0).unwrap().objectives[0];
        assert!(best > -0.1, "{best}");
    }
}
