//! Conformance checks a runner must pass before benchmark use.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::external::{describe, handshake, tail, Limits, Session};
use super::protocol::{Message, TrainRequest, TrainStatus};
use super::{check_response, RunnerError, RunnerKind, RunnerSpec};
use crate::graph::{load_dataset, write_bundle, BundleContents, BundleFormat, EdgeConvention, FeatureMatrix};
use crate::hpo::ParamValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Handshake,
    RoundTrip,
    ResponseValidation,
    Determinism,
    FailureInjection,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Handshake,
        Phase::RoundTrip,
        Phase::ResponseValidation,
        Phase::Determinism,
        Phase::FailureInjection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Handshake => "handshake",
            Phase::RoundTrip => "round-trip",
            Phase::ResponseValidation => "response-validation",
            Phase::Determinism => "determinism",
            Phase::FailureInjection => "failure-injection",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseOutcome {
    pub phase: Phase,
    pub passed: bool,
    pub detail: String,
}

/// Phases run in order and stop at the first failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub runner: String,
    pub outcomes: Vec<PhaseOutcome>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.outcomes.len() == Phase::ALL.len() && self.outcomes.iter().all(|o| o.passed)
    }

    pub fn failed_phase(&self) -> Option<Phase> {
        self.outcomes.iter().find(|o| !o.passed).map(|o| o.phase)
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "runner {}", self.runner)?;
        for o in &self.outcomes {
            writeln!(f, "  {:<20} {}  {}", o.phase.name(), if o.passed { "pass" } else { "FAIL" }, o.detail)?;
        }
        for p in Phase::ALL.iter().skip(self.outcomes.len()) {
            writeln!(f, "  {:<20} skipped", p.name())?;
        }
        write!(f, "{}", if self.passed() { "conformant" } else { "not conformant" })
    }
}

const BOGUS_PARAM: &str = "__conformance_bogus__";

/// One request, returning the runner's raw reply without harness-side
/// repair.
fn exchange(spec: &RunnerSpec, req: &TrainRequest, limits: &Limits) -> Result<Message, String> {
    match spec.kind {
        RunnerKind::Builtin => {
            let b = spec.builtin.ok_or("builtin spec names no builtin")?;
            let graph = load_dataset(&req.dataset_path, BundleFormat::EdgeListBundle).map_err(|e| e.to_string())?;
            Ok(match b.train(&graph, req) {
                Ok((p, epochs)) => Message::Result(super::TrainResponse::ok(p, epochs, 0.0)),
                Err(message) => Message::Error { message },
            })
        }
        RunnerKind::External => {
            let mut session = Session::spawn(&spec.launch, limits)?;
            let reply = handshake(&mut session).and_then(|_| {
                session
                    .send(&Message::Train(req.clone()))
                    .and_then(|_| session.recv())
                    .map_err(describe)
            });
            let ended = session.finish();
            reply.map_err(|e| match tail(&ended.stderr) {
                t if t.is_empty() => e,
                t => format!("{e}; stderr: {t}"),
            })
        }
    }
}

/// Exercises handshake, a tiny training round trip, response validation,
/// determinism across two identical requests, and rejection of an unknown
/// parameter.
pub fn validate_runner(spec: &RunnerSpec, limits: &Limits) -> Result<ConformanceReport, RunnerError> {
    spec.validate()?;
    let dir = tempfile::tempdir().map_err(|e| RunnerError::Setup(e.to_string()))?;
    let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)];
    let features = FeatureMatrix::from_rows(vec![
        vec![0.0, 0.1],
        vec![0.1, 0.0],
        vec![0.0, 0.0],
        vec![5.0, 5.1],
        vec![5.1, 5.0],
        vec![5.0, 5.0],
    ])
    .expect("fixed rows");
    let labels = [0, 0, 0, 1, 1, 1];
    write_bundle(
        dir.path(),
        &BundleContents {
            name: "conformance",
            k: 2,
            classes: Some(2),
            edges: &edges,
            features: &features,
            labels: Some(&labels),
            edge_convention: EdgeConvention::Undirected,
            binary_features: false,
        },
    )
    .map_err(|e| RunnerError::Setup(e.to_string()))?;

    let params = spec
        .defaults
        .clone()
        .unwrap_or_else(|| spec.search_space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(0)));
    let req = TrainRequest {
        dataset_path: dir.path().to_string_lossy().into_owned(),
        params,
        seed: 7,
        max_epochs: 50,
        patience: 5,
        k: 2,
        train_nodes: vec![0, 1, 3, 4],
        val_nodes: vec![2, 5],
    };

    let mut report = ConformanceReport {
        runner: spec.name.clone(),
        outcomes: Vec::new(),
    };
    let mut record = |phase, result: Result<String, String>| {
        let passed = result.is_ok();
        report.outcomes.push(PhaseOutcome {
            phase,
            passed,
            detail: result.unwrap_or_else(|e| e),
        });
        passed
    };

    let hs = match spec.kind {
        RunnerKind::Builtin => Ok("in-process".to_string()),
        RunnerKind::External => Session::spawn(&spec.launch, limits).and_then(|mut s| {
            let r = handshake(&mut s);
            s.finish();
            r.map(|name| format!("runner calls itself `{name}`"))
        }),
    };
    if !record(Phase::Handshake, hs) {
        return Ok(report);
    }

    let first = match exchange(spec, &req, limits) {
        Ok(Message::Result(r)) if r.status == TrainStatus::Ok => Ok(r),
        Ok(Message::Result(r)) => Err(format!(
            "runner reported {}: {}",
            r.status.name(),
            r.message.unwrap_or_default()
        )),
        Ok(Message::Error { message }) => Err(format!("runner answered with error: {message}")),
        Ok(other) => Err(format!("expected result, got {}", other.kind())),
        Err(e) => Err(e),
    };
    let first = match first {
        Ok(r) => {
            record(Phase::RoundTrip, Ok(format!("{} epochs", r.epochs_used)));
            r
        }
        Err(e) => {
            record(Phase::RoundTrip, Err(e));
            return Ok(report);
        }
    };

    let checked = check_response(first.clone(), features.rows(), req.k);
    let valid = match checked.status {
        TrainStatus::Ok => Ok(format!("{} nodes in [0, {})", features.rows(), req.k)),
        _ => Err(checked.message.unwrap_or_default()),
    };
    if !record(Phase::ResponseValidation, valid) {
        return Ok(report);
    }

    let again = match exchange(spec, &req, limits) {
        Ok(Message::Result(r)) if r.partition == first.partition => Ok("identical partitions".to_string()),
        Ok(Message::Result(_)) => Err("second run with the same seed returned a different partition".to_string()),
        Ok(other) => Err(format!("second run answered {}", other.kind())),
        Err(e) => Err(e),
    };
    if !record(Phase::Determinism, again) {
        return Ok(report);
    }

    let mut bad = req.clone();
    bad.params.insert(BOGUS_PARAM.into(), ParamValue::Text("?".into()));
    let rejected = match exchange(spec, &bad, limits) {
        Ok(Message::Error { message }) => Ok(format!("rejected: {message}")),
        Ok(Message::Result(r)) if r.status != TrainStatus::Ok => Ok(format!("rejected with status {}", r.status.name())),
        Ok(Message::Result(_)) => Err(format!("unknown parameter `{BOGUS_PARAM}` was accepted")),
        Ok(other) => Err(format!("answered {} to a bad request", other.kind())),
        Err(e) => Err(format!("no structured reply: {e}")),
    };
    record(Phase::FailureInjection, rejected);
    Ok(report)
}
