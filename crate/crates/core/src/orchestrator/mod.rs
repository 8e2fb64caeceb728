//! End-to-end benchmark runs: tune on the first seed, evaluate every seed,
//! assemble the results cube, and compare parameter regimes.

mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::concordance::{
    framework_comparison_rank, w_randomness_coefficient, Cell, ComparisonReport, ConcordanceError,
    ConcordanceReport, FailureReason, ResultsCube, SeedReduction, TestPoint,
};
use crate::graph::{
    load_dataset, split_nodes, write_bundle, BundleContents, BundleFormat, EdgeConvention, Graph, GraphError,
};
use crate::hpo::{run_study, select_best, Dimension, HpoError, ParamValue, Params, SearchSpace, Trial};
use crate::metrics::{evaluate_all, Metric, Partition, Supervision};
use crate::runner::{
    train_and_predict, validate_runner, ConformanceReport, Limits, RunnerError, RunnerKind, RunnerSpec,
    TrainRequest, TrainStatus, PATIENCE_PARAM,
};

pub use config::{
    BenchmarkConfig, ConformancePolicy, DatasetSource, HpoSettings, Mode, ResourceConfig, RunnerRef, StudyMode,
};

pub const LEARNING_RATE_PARAM: &str = "learning_rate";
pub const WEIGHT_DECAY_PARAM: &str = "weight_decay";
pub const OPTIMISER_PARAM: &str = "optimiser";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Hpo(#[from] HpoError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Concordance(#[from] ConcordanceError),
    #[error("runner `{runner}` failed conformance at {phase}")]
    Conformance { runner: String, phase: String },
}

/// The space a study explores for `spec`: its own dimensions plus the shared
/// patience domain and, for gradient-trained runners, the shared learning
/// rate and weight decay domains.
pub fn tuning_space(spec: &RunnerSpec, resources: &ResourceConfig) -> Result<SearchSpace, OrchestratorError> {
    let mut space = spec.search_space.with_dimension(Dimension::categorical(
        PATIENCE_PARAM,
        resources.patience.iter().map(|&p| ParamValue::Int(p as i64)).collect(),
    ))?;
    if spec.tune_optimizer {
        let floats = |v: &[f64]| v.iter().map(|&x| ParamValue::Float(x)).collect();
        space = space.with_dimension(Dimension::categorical(LEARNING_RATE_PARAM, floats(&resources.learning_rate)))?;
        space = space.with_dimension(Dimension::categorical(WEIGHT_DECAY_PARAM, floats(&resources.weight_decay)))?;
    }
    Ok(space)
}

/// Splits the harness-level patience out of a parameter set and adds the
/// fixed optimiser name for gradient-trained runners.
pub fn runner_params(spec: &RunnerSpec, params: &Params, resources: &ResourceConfig) -> (Params, u64) {
    let mut params = params.clone();
    let patience = params
        .remove(PATIENCE_PARAM)
        .and_then(|v| v.as_i64())
        .and_then(|p| u64::try_from(p).ok())
        .unwrap_or_else(|| resources.default_patience());
    if spec.tune_optimizer {
        params
            .entry(OPTIMISER_PARAM.to_string())
            .or_insert_with(|| ParamValue::Text(resources.optimiser.clone()));
    }
    (params, patience)
}

/// Parameters chosen for one test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub runner: String,
    pub test: TestPoint,
    pub params: Params,
    /// Index of the chosen trial; `None` for published defaults or when no
    /// trial completed.
    pub trial: Option<usize>,
    /// Oriented validation score of the chosen trial.
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRecord {
    pub runner: String,
    pub dataset: String,
    /// Set in per-test mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    pub seed: u64,
    pub trials: Vec<Trial>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkOutcome {
    pub cube: ResultsCube,
    pub selections: Vec<Selection>,
    pub studies: Vec<StudyRecord>,
    pub conformance: Vec<ConformanceReport>,
}

struct Dataset {
    name: String,
    path: String,
    graph: Result<Graph, String>,
    metrics: Vec<Metric>,
}

/// Loads every dataset. Synthetic ones are written as bundles under `scratch`
/// and reloaded so that builtin and external runners see identical data.
fn materialize(cfg: &BenchmarkConfig, scratch: &std::path::Path) -> Vec<Dataset> {
    cfg.datasets
        .iter()
        .map(|source| {
            let name = source.display_name();
            let (path, graph) = match (&source.path, &source.synthetic) {
                (Some(p), _) => (p.clone(), load_dataset(p, BundleFormat::EdgeListBundle)),
                (None, Some(spec)) => {
                    let dir = scratch.join(&name);
                    let written = spec.generate(&name).and_then(|g| {
                        let edges: Vec<_> = g.edges().iter().map(|e| (e.u, e.v, e.weight)).collect();
                        write_bundle(
                            &dir,
                            &BundleContents {
                                name: &name,
                                k: g.k(),
                                classes: Some(g.num_classes()),
                                edges: &edges,
                                features: g.features(),
                                labels: g.labels(),
                                edge_convention: EdgeConvention::Undirected,
                                binary_features: true,
                            },
                        )
                    });
                    let graph = written.and_then(|_| load_dataset(&dir, BundleFormat::EdgeListBundle));
                    (dir, graph)
                }
                (None, None) => unreachable!("validated"),
            };
            let graph = graph.map_err(|e| {
                log::error!("dataset `{name}` failed to load: {e}");
                e.to_string()
            });
            let metrics = match &graph {
                Ok(g) if g.labels().is_none() => cfg
                    .metrics
                    .iter()
                    .copied()
                    .filter(|m| m.supervision() == Supervision::Unsupervised)
                    .collect(),
                _ => cfg.metrics.clone(),
            };
            Dataset {
                name,
                path: path.to_string_lossy().into_owned(),
                graph,
                metrics,
            }
        })
        .collect()
}

fn limits(resources: &ResourceConfig) -> Limits {
    Limits {
        timeout: Duration::from_secs(resources.timeout_secs),
        memory_bytes: resources.memory_limit_mb.map(|mb| mb * 1024 * 1024),
    }
}

struct Context<'a> {
    cfg: &'a BenchmarkConfig,
    limits: Limits,
}

impl Context<'_> {
    fn train(&self, spec: &RunnerSpec, data: &Dataset, graph: &Graph, params: &Params, seed: u64) -> Result<TrainRun, GraphError> {
        let r = &self.cfg.resources;
        let splits = split_nodes(graph.node_count(), r.train_test_split, r.train_val_split, seed)?;
        let (params, patience) = runner_params(spec, params, r);
        let req = TrainRequest {
            dataset_path: data.path.clone(),
            params,
            seed,
            max_epochs: r.max_epochs,
            patience,
            k: graph.k(),
            train_nodes: splits.train,
            val_nodes: splits.validation.clone(),
        };
        let response = train_and_predict(spec, &req, graph, &self.limits);
        let outcome = match response.status {
            TrainStatus::Ok => {
                let assignment = response.partition.expect("checked ok responses carry a partition");
                Ok(Partition::new(assignment, graph.k()).expect("checked partitions are valid"))
            }
            status => Err((status, response.message.unwrap_or_default())),
        };
        Ok(TrainRun {
            outcome,
            validation: splits.validation,
            test: splits.test,
        })
    }

    /// Oriented validation scores, in `metrics` order.
    fn objective(&self, spec: &RunnerSpec, data: &Dataset, graph: &Graph, metrics: &[Metric], params: &Params) -> Result<Vec<f64>, String> {
        let run = self
            .train(spec, data, graph, params, self.cfg.resources.first_seed())
            .map_err(|e| e.to_string())?;
        let partition = run.outcome.map_err(|(s, m)| format!("{}: {m}", s.name()))?;
        let values = evaluate_all(graph, &partition, graph.labels(), &run.validation, metrics);
        metrics
            .iter()
            .map(|m| match &values[m] {
                Ok(v) => Ok(m.oriented(v.value)),
                Err(e) => Err(e.to_string()),
            })
            .collect()
    }
}

struct TrainRun {
    outcome: Result<Partition, (TrainStatus, String)>,
    validation: Vec<usize>,
    test: Vec<usize>,
}

fn failure(status: TrainStatus) -> FailureReason {
    match status {
        TrainStatus::Oom => FailureReason::Oom,
        TrainStatus::Timeout => FailureReason::Timeout,
        TrainStatus::Ok | TrainStatus::Crash => FailureReason::Crash,
    }
}

/// Picks the best trial per objective. With no complete trial the runner
/// falls back to its defaults, or to the first suggestion, so that its real
/// failure mode reaches the cube.
fn choose(spec: &RunnerSpec, trials: &[Trial], objective: usize) -> (Params, Option<usize>, Option<f64>) {
    match select_best(trials, objective) {
        Ok(t) => (t.params.clone(), Some(t.index), Some(t.objectives[objective])),
        Err(_) => {
            let fallback = spec
                .defaults
                .clone()
                .or_else(|| trials.first().map(|t| t.params.clone()))
                .unwrap_or_default();
            (fallback, None, None)
        }
    }
}

fn check_conformance(cfg: &BenchmarkConfig, specs: &[RunnerSpec], limits: &Limits) -> Result<Vec<ConformanceReport>, OrchestratorError> {
    if cfg.conformance == ConformancePolicy::Skip {
        return Ok(Vec::new());
    }
    let mut reports = Vec::new();
    for spec in specs.iter().filter(|s| s.kind == RunnerKind::External) {
        let report = validate_runner(spec, limits)?;
        if let Some(phase) = report.failed_phase() {
            if cfg.conformance == ConformancePolicy::Require {
                return Err(OrchestratorError::Conformance {
                    runner: spec.name.clone(),
                    phase: phase.to_string(),
                });
            }
            log::warn!("runner `{}` failed conformance at {phase}; continuing", spec.name);
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Runs the whole benchmark described by `cfg`.
///
/// Tests are every (dataset, metric) pair, with supervised metrics dropped
/// for unlabeled datasets. In HPO mode each (runner, dataset) gets one study
/// on the first configured seed whose objectives are the validation scores;
/// every metric then uses the trial that scored best on it. Each seed trains
/// once per distinct selected parameter set and records test-node scores for
/// supervised metrics and full-graph scores otherwise.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutcome, OrchestratorError> {
    let specs = cfg.validate()?;
    let ctx = Context {
        cfg,
        limits: limits(&cfg.resources),
    };
    let conformance = check_conformance(cfg, &specs, &ctx.limits)?;
    let scratch = tempfile::tempdir().map_err(|source| OrchestratorError::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let datasets = materialize(cfg, scratch.path());
    let spaces = specs
        .iter()
        .map(|s| tuning_space(s, &cfg.resources))
        .collect::<Result<Vec<_>, _>>()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| OrchestratorError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;

    let pairs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|r| (0..datasets.len()).map(move |d| (r, d)))
        .collect();

    // Parameter selection per (runner, dataset), one entry per metric.
    let tuned: Vec<Result<(Vec<Selection>, Vec<StudyRecord>), OrchestratorError>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(r, d)| select_params(&ctx, &specs[r], &spaces[r], &datasets[d]))
            .collect()
    });
    let mut selections: BTreeMap<(usize, usize), Vec<Selection>> = BTreeMap::new();
    let mut studies = Vec::new();
    for (&pair, result) in pairs.iter().zip(tuned) {
        let (sel, rec) = result?;
        selections.insert(pair, sel);
        studies.extend(rec);
    }

    let tests: Vec<TestPoint> = datasets
        .iter()
        .flat_map(|d| d.metrics.iter().map(|&m| TestPoint::new(d.name.clone(), m)))
        .collect();
    let test_offset: Vec<usize> = datasets
        .iter()
        .scan(0, |acc, d| {
            let start = *acc;
            *acc += d.metrics.len();
            Some(start)
        })
        .collect();
    let seeds = cfg.resources.seeds.clone();

    let jobs: Vec<(usize, usize, usize)> = pairs
        .iter()
        .flat_map(|&(r, d)| (0..seeds.len()).map(move |s| (r, d, s)))
        .collect();
    let cells: Vec<Vec<Cell>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, d, s)| evaluate_seed(&ctx, &specs[r], &datasets[d], &selections[&(r, d)], seeds[s]))
            .collect()
    });

    let mut builder = ResultsCube::builder(specs.iter().map(|s| s.name.clone()).collect(), seeds, tests);
    for (&(r, d, s), row) in jobs.iter().zip(cells) {
        for (i, cell) in row.into_iter().enumerate() {
            builder.set(r, s, test_offset[d] + i, cell);
        }
    }
    let cube = builder.build()?;
    Ok(BenchmarkOutcome {
        cube,
        selections: selections.into_values().flatten().collect(),
        studies,
        conformance,
    })
}

fn select_params(
    ctx: &Context<'_>,
    spec: &RunnerSpec,
    space: &SearchSpace,
    data: &Dataset,
) -> Result<(Vec<Selection>, Vec<StudyRecord>), OrchestratorError> {
    let cfg = ctx.cfg;
    let test = |m: Metric| TestPoint::new(data.name.clone(), m);
    let graph = match (&data.graph, cfg.mode) {
        (Ok(g), Mode::Hpo) if !data.metrics.is_empty() => g,
        _ => {
            // Defaults mode, or nothing to tune against.
            let mut params = spec.defaults.clone().unwrap_or_default();
            params
                .entry(PATIENCE_PARAM.to_string())
                .or_insert(ParamValue::Int(cfg.resources.default_patience() as i64));
            let sel = data
                .metrics
                .iter()
                .map(|&m| Selection {
                    runner: spec.name.clone(),
                    test: test(m),
                    params: params.clone(),
                    trial: None,
                    validation: None,
                })
                .collect();
            return Ok((sel, Vec::new()));
        }
    };
    let study_cfg = cfg.hpo.study_config(cfg.resources.max_trials);
    let seed = cfg.resources.first_seed();
    let groups: Vec<Vec<Metric>> = match cfg.hpo.study {
        StudyMode::Joint => vec![data.metrics.clone()],
        StudyMode::PerTest => data.metrics.iter().map(|&m| vec![m]).collect(),
    };
    let mut selections = Vec::new();
    let mut records = Vec::new();
    for metrics in groups {
        log::info!("tuning `{}` on `{}` for {metrics:?}", spec.name, data.name);
        let study = run_study(
            |p: &Params| ctx.objective(spec, data, graph, &metrics, p),
            space.clone(),
            study_cfg.clone(),
            seed,
        )?;
        let trials = study.history();
        for (i, &m) in metrics.iter().enumerate() {
            let (params, trial, validation) = choose(spec, trials, i);
            selections.push(Selection {
                runner: spec.name.clone(),
                test: test(m),
                params,
                trial,
                validation,
            });
        }
        records.push(StudyRecord {
            runner: spec.name.clone(),
            dataset: data.name.clone(),
            metric: (cfg.hpo.study == StudyMode::PerTest).then(|| metrics[0]),
            seed,
            trials: trials.to_vec(),
        });
    }
    Ok((selections, records))
}

/// Cells of one (runner, dataset, seed) job, in the dataset's metric order.
fn evaluate_seed(ctx: &Context<'_>, spec: &RunnerSpec, data: &Dataset, selections: &[Selection], seed: u64) -> Vec<Cell> {
    let graph = match &data.graph {
        Ok(g) => g,
        Err(_) => return vec![Cell::Failed(FailureReason::Crash); data.metrics.len()],
    };
    let mut distinct: Vec<&Params> = Vec::new();
    for s in selections {
        if !distinct.contains(&&s.params) {
            distinct.push(&s.params);
        }
    }
    let mut cache: Vec<Option<BTreeMap<Metric, Cell>>> = vec![None; distinct.len()];
    selections
        .iter()
        .map(|sel| {
            let i = distinct.iter().position(|p| *p == &sel.params).expect("collected above");
            let scores = cache[i].get_or_insert_with(|| {
                let run = match ctx.train(spec, data, graph, &sel.params, seed) {
                    Ok(run) => run,
                    Err(e) => {
                        log::error!("`{}` on `{}` seed {seed}: {e}", spec.name, data.name);
                        return data.metrics.iter().map(|&m| (m, Cell::Failed(FailureReason::Crash))).collect();
                    }
                };
                match run.outcome {
                    Ok(partition) => evaluate_all(graph, &partition, graph.labels(), &run.test, &data.metrics)
                        .into_iter()
                        .map(|(m, v)| {
                            let cell = match v {
                                Ok(v) => Cell::from_value(v.value),
                                Err(e) => {
                                    log::warn!("{m} failed for `{}` on `{}`: {e}", spec.name, data.name);
                                    Cell::Failed(FailureReason::Crash)
                                }
                            };
                            (m, cell)
                        })
                        .collect(),
                    Err((status, message)) => {
                        log::warn!(
                            "`{}` on `{}` seed {seed}: {} {message}",
                            spec.name,
                            data.name,
                            status.name()
                        );
                        data.metrics.iter().map(|&m| (m, Cell::Failed(failure(status)))).collect()
                    }
                }
            });
            scores[&sel.test.metric]
        })
        .collect()
}

/// Head-to-head ranks of default parameters against tuned ones, plus the
/// ranking consistency of each regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeComparison {
    pub default_params: ConcordanceReport,
    pub hpo: ConcordanceReport,
    /// Contender 0 is the default-parameter cube, contender 1 the tuned one.
    pub fcr_mean_over_seeds: ComparisonReport,
    pub fcr_per_seed: ComparisonReport,
}

impl RegimeComparison {
    pub fn from_cubes(default_params: &ResultsCube, hpo: &ResultsCube) -> Result<Self, ConcordanceError> {
        Ok(Self {
            default_params: w_randomness_coefficient(default_params)?,
            hpo: w_randomness_coefficient(hpo)?,
            fcr_mean_over_seeds: framework_comparison_rank(default_params, hpo, SeedReduction::MeanOverSeeds)?,
            fcr_per_seed: framework_comparison_rank(default_params, hpo, SeedReduction::PerSeed)?,
        })
    }
}

/// Runs both regimes and compares them. The configs must differ only in
/// mode.
pub fn compare_regimes(
    cfg_default: &BenchmarkConfig,
    cfg_hpo: &BenchmarkConfig,
) -> Result<(RegimeComparison, BenchmarkOutcome, BenchmarkOutcome), OrchestratorError> {
    if cfg_default.mode != Mode::DefaultParams || cfg_hpo.mode != Mode::Hpo {
        return Err(OrchestratorError::Config(
            "compare_regimes needs a default-params config and an hpo config".into(),
        ));
    }
    let mut a = cfg_default.clone();
    a.mode = Mode::Hpo;
    a.workers = cfg_hpo.workers;
    a.hpo = cfg_hpo.hpo.clone();
    if &a != cfg_hpo {
        return Err(OrchestratorError::Config("configs differ in more than mode".into()));
    }
    let default_run = run_benchmark(cfg_default)?;
    let hpo_run = run_benchmark(cfg_hpo)?;
    let comparison = RegimeComparison::from_cubes(&default_run.cube, &hpo_run.cube)?;
    Ok((comparison, default_run, hpo_run))
}
