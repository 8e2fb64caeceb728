use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::graph::PlantedPartition;
use crate::hpo::StudyConfig;
use crate::metrics::Metric;
use crate::runner::{Builtin, RunnerSpec};

/// Budget shared by every algorithm in an investigation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceConfig {
    pub optimiser: String,
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub max_epochs: u64,
    pub patience: Vec<u64>,
    pub max_trials: usize,
    pub seeds: Vec<u64>,
    /// Fraction of the non-test nodes used for training; the rest validate.
    pub train_val_split: f64,
    /// Fraction of all nodes kept away from testing.
    pub train_test_split: f64,
    pub timeout_secs: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub memory_limit_mb: Option<u64>,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        Self {
            optimiser: "adam".into(),
            learning_rate: vec![0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001],
            weight_decay: vec![0.05, 0.005, 0.0005, 0.0],
            max_epochs: 5000,
            patience: vec![25, 100, 500, 1000],
            max_trials: 300,
            seeds: vec![42, 24, 976, 12345, 98765, 7, 856, 90, 672, 785],
            train_val_split: 0.8,
            train_test_split: 0.8,
            timeout_secs: 3600,
            memory_limit_mb: None,
        }
    }
}

impl ResourceConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        if self.seeds.is_empty() {
            return bad("resources.seeds is empty".into());
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return bad("resources.seeds has duplicates".into());
        }
        if self.patience.is_empty() || self.learning_rate.is_empty() || self.weight_decay.is_empty() {
            return bad("resource domains must be non-empty".into());
        }
        for (name, f) in [("train_val_split", self.train_val_split), ("train_test_split", self.train_test_split)] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("resources.{name} = {f} outside (0, 1)"));
            }
        }
        if self.timeout_secs == 0 {
            return bad("resources.timeout_secs must be positive".into());
        }
        Ok(())
    }

    pub fn first_seed(&self) -> u64 {
        self.seeds[0]
    }

    /// Patience used when a runner's published defaults give none.
    pub fn default_patience(&self) -> u64 {
        self.patience.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Hpo,
    DefaultParams,
}

/// One multi-objective study per (algorithm, dataset), or one
/// single-objective study per test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMode {
    #[default]
    Joint,
    PerTest,
}

/// What happens when an external runner fails its conformance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConformancePolicy {
    /// Abort the benchmark.
    Require,
    /// Log and keep going; the runner's failures land in the cube.
    #[default]
    Warn,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpoSettings {
    pub study: StudyMode,
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub prior_weight: f64,
    pub in_flight: usize,
}

impl Default for HpoSettings {
    fn default() -> Self {
        let s = StudyConfig::default();
        Self {
            study: StudyMode::default(),
            gamma: s.gamma,
            n_startup: s.n_startup,
            n_candidates: s.n_candidates,
            prior_weight: s.prior_weight,
            in_flight: s.in_flight,
        }
    }
}

impl HpoSettings {
    pub fn study_config(&self, max_trials: usize) -> StudyConfig {
        StudyConfig {
            gamma: self.gamma,
            n_startup: self.n_startup,
            n_candidates: self.n_candidates,
            prior_weight: self.prior_weight,
            max_trials,
            in_flight: self.in_flight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<PlantedPartition>,
}

impl DatasetSource {
    pub fn bundle(path: impl Into<PathBuf>) -> Self {
        Self {
            name: None,
            path: Some(path.into()),
            synthetic: None,
        }
    }

    pub fn planted(name: &str, spec: PlantedPartition) -> Self {
        Self {
            name: Some(name.to_string()),
            path: None,
            synthetic: Some(spec),
        }
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        match &self.path {
            Some(p) => p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
            None => "synthetic".into(),
        }
    }
}

/// A runner named in a config: a builtin baseline, a spec file, or an
/// inline spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RunnerRef {
    Builtin {
        builtin: Builtin,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    File {
        spec: PathBuf,
    },
    Inline(RunnerSpec),
}

impl RunnerRef {
    pub fn resolve(&self) -> Result<RunnerSpec, OrchestratorError> {
        match self {
            RunnerRef::Builtin { builtin, name } => {
                let mut spec = RunnerSpec::builtin(*builtin);
                if let Some(n) = name {
                    spec.name = n.clone();
                }
                Ok(spec)
            }
            RunnerRef::File { spec } => Ok(RunnerSpec::from_file(spec)?),
            RunnerRef::Inline(spec) => {
                spec.validate()?;
                Ok(spec.clone())
            }
        }
    }
}

impl From<RunnerSpec> for RunnerRef {
    fn from(spec: RunnerSpec) -> Self {
        match (spec.builtin, &spec.kind) {
            (Some(b), crate::runner::RunnerKind::Builtin) if spec == RunnerSpec::builtin(b) => RunnerRef::Builtin {
                builtin: b,
                name: None,
            },
            _ => RunnerRef::Inline(spec),
        }
    }
}

fn all_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_workers", skip_serializing)]
    pub workers: usize,
    #[serde(default)]
    pub conformance: ConformancePolicy,
    #[serde(default)]
    pub resources: ResourceConfig,
    #[serde(default)]
    pub hpo: HpoSettings,
    pub datasets: Vec<DatasetSource>,
    pub runners: Vec<RunnerRef>,
}

impl BenchmarkConfig {
    pub fn new(datasets: Vec<DatasetSource>, runners: Vec<RunnerRef>) -> Self {
        Self {
            mode: Mode::default(),
            metrics: all_metrics(),
            workers: default_workers(),
            conformance: ConformancePolicy::default(),
            resources: ResourceConfig::default(),
            hpo: HpoSettings::default(),
            datasets,
            runners,
        }
    }

    /// Parses TOML; relative dataset and runner-spec paths are resolved
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, OrchestratorError> {
        let mut cfg: BenchmarkConfig =
            toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))?;
        for d in &mut cfg.datasets {
            if let Some(p) = &mut d.path {
                if p.is_relative() {
                    *p = base_dir.join(&*p);
                }
            }
        }
        for r in &mut cfg.runners {
            if let RunnerRef::File { spec } = r {
                if spec.is_relative() {
                    *spec = base_dir.join(&*spec);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| OrchestratorError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            OrchestratorError::Config(m) => OrchestratorError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Checks the config and resolves its runners.
    pub fn validate(&self) -> Result<Vec<RunnerSpec>, OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::Config(m));
        self.resources.validate()?;
        if self.metrics.is_empty() {
            return bad("no metrics configured".into());
        }
        if self.metrics.iter().collect::<HashSet<_>>().len() != self.metrics.len() {
            return bad("metrics has duplicates".into());
        }
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        let mut names = HashSet::new();
        for d in &self.datasets {
            if d.path.is_some() == d.synthetic.is_some() {
                return bad(format!("dataset `{}` needs exactly one of path or synthetic", d.display_name()));
            }
            if !names.insert(d.display_name()) {
                return bad(format!("dataset name `{}` used twice", d.display_name()));
            }
        }
        if self.runners.is_empty() {
            return bad("no runners configured".into());
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        let specs = self.runners.iter().map(RunnerRef::resolve).collect::<Result<Vec<_>, _>>()?;
        let mut names = HashSet::new();
        for s in &specs {
            if !names.insert(s.name.as_str()) {
                return bad(format!("runner name `{}` used twice", s.name));
            }
            if self.mode == Mode::DefaultParams && s.defaults.is_none() {
                return bad(format!("default-params mode needs published defaults for `{}`", s.name));
            }
        }
        if self.mode == Mode::Hpo {
            self.hpo.study_config(self.resources.max_trials).validate()?;
        }
        Ok(specs)
    }
}
