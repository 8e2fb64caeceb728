//! Algorithms behind a uniform train-and-predict interface: builtin
//! baselines run in-process, external runners speak protocol v1 over their
//! standard streams.

mod builtin;
mod conformance;
mod external;
mod protocol;
mod serve;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::hpo::{Params, SearchSpace};
use crate::metrics::Partition;

pub use builtin::{agglomerate, canonical, kmeans, label_propagation, Builtin, PATIENCE_PARAM};
pub use conformance::{validate_runner, ConformanceReport, Phase, PhaseOutcome};
pub use external::{run_external, Limits};
pub use protocol::{
    read_message, write_message, Message, TrainRequest, TrainResponse, TrainStatus, MAX_MESSAGE_BYTES,
    PROTOCOL_VERSION,
};
pub use serve::{serve_builtin, Fault, ServeError};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid runner spec: {0}")]
    Spec(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("conformance setup failed: {0}")]
    Setup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunnerKind {
    External,
    Builtin,
}

fn default_protocol() -> u32 {
    PROTOCOL_VERSION
}

/// How to reach an algorithm and what it may be tuned over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerSpec {
    pub name: String,
    pub kind: RunnerKind,
    /// Command line for external runners.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub launch: Vec<String>,
    /// Which baseline a builtin spec runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    #[serde(default)]
    pub search_space: SearchSpace,
    #[serde(default = "default_protocol")]
    pub protocol_version: u32,
    /// Published default parameters, used in default-params mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults: Option<Params>,
    /// The runner trains with a gradient optimiser and accepts the shared
    /// `optimiser`, `learning_rate` and `weight_decay` parameters.
    #[serde(default)]
    pub tune_optimizer: bool,
}

impl RunnerSpec {
    pub fn builtin(b: Builtin) -> Self {
        Self {
            name: b.name().to_string(),
            kind: RunnerKind::Builtin,
            launch: Vec::new(),
            builtin: Some(b),
            search_space: b.search_space(),
            protocol_version: PROTOCOL_VERSION,
            defaults: Some(b.defaults()),
            tune_optimizer: false,
        }
    }

    pub fn external(name: &str, launch: Vec<String>, search_space: SearchSpace) -> Self {
        Self {
            name: name.to_string(),
            kind: RunnerKind::External,
            launch,
            builtin: None,
            search_space,
            protocol_version: PROTOCOL_VERSION,
            defaults: None,
            tune_optimizer: false,
        }
    }

    pub fn with_defaults(mut self, defaults: Params) -> Self {
        self.defaults = Some(defaults);
        self
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.name.trim().is_empty() {
            return Err(RunnerError::Spec("name is empty".into()));
        }
        if self.protocol_version != PROTOCOL_VERSION {
            return Err(RunnerError::Spec(format!(
                "`{}` speaks protocol {}, harness speaks {PROTOCOL_VERSION}",
                self.name, self.protocol_version
            )));
        }
        match self.kind {
            RunnerKind::External if self.launch.is_empty() => {
                Err(RunnerError::Spec(format!("external runner `{}` has no launch command", self.name)))
            }
            RunnerKind::Builtin if self.builtin.is_none() => {
                Err(RunnerError::Spec(format!("builtin runner `{}` names no builtin", self.name)))
            }
            _ => {
                if let Some(d) = &self.defaults {
                    let extra: Vec<_> = d
                        .keys()
                        .filter(|k| *k != PATIENCE_PARAM && self.search_space.get(k).is_none())
                        .collect();
                    if !extra.is_empty() {
                        return Err(RunnerError::Spec(format!(
                            "defaults of `{}` name unknown parameters {extra:?}",
                            self.name
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let spec: RunnerSpec = toml::from_str(text).map_err(|e| e.to_string())?;
        Ok(spec)
    }

    /// Loads a TOML spec file. A launch program containing a `/` is taken
    /// relative to the spec file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RunnerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut spec = Self::from_toml_str(&text).map_err(|message| RunnerError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        if let (Some(program), Some(dir)) = (spec.launch.first_mut(), path.parent()) {
            if program.contains('/') && Path::new(program.as_str()).is_relative() {
                *program = dir.join(&*program).to_string_lossy().into_owned();
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// The four desk-scale baselines.
pub fn builtin_baselines() -> Vec<RunnerSpec> {
    Builtin::ALL.into_iter().map(RunnerSpec::builtin).collect()
}

/// Trains once and returns a response whose partition, when present, is
/// valid for `graph` and `req.k`. Builtins run in-process and are bounded
/// by their iteration budgets rather than by `limits`.
pub fn train_and_predict(spec: &RunnerSpec, req: &TrainRequest, graph: &Graph, limits: &Limits) -> TrainResponse {
    let response = match (spec.kind, spec.builtin) {
        (RunnerKind::Builtin, Some(b)) => {
            let started = Instant::now();
            match b.train(graph, req) {
                Ok((partition, epochs)) => TrainResponse::ok(partition, epochs, started.elapsed().as_secs_f64()),
                Err(e) => TrainResponse::failed(TrainStatus::Crash, e),
            }
        }
        (RunnerKind::Builtin, None) => TrainResponse::failed(TrainStatus::Crash, "builtin spec names no builtin"),
        (RunnerKind::External, _) => run_external(&spec.launch, req, limits),
    };
    check_response(response, graph.node_count(), req.k)
}

/// Demotes an ok response with a missing or malformed partition to a crash.
pub fn check_response(mut response: TrainResponse, nodes: usize, k: usize) -> TrainResponse {
    if response.status != TrainStatus::Ok {
        response.partition = None;
        return response;
    }
    let problem = match &response.partition {
        None => Some("ok result without a partition".to_string()),
        Some(p) if p.len() != nodes => Some(format!("partition has {} entries for {nodes} nodes", p.len())),
        Some(p) => Partition::new(p.clone(), k).err().map(|e| e.to_string()),
    };
    if let Some(problem) = problem {
        log::warn!("rejecting runner response: {problem}");
        response.status = TrainStatus::Crash;
        response.partition = None;
        response.message = Some(problem);
    }
    response
}
