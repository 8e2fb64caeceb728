//! Versioned cube files and human-readable reports.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::concordance::{
    Cell, ConcordanceError, ConcordanceReport, FailureReason, ResultsCube, TestPoint,
};
use crate::orchestrator::{BenchmarkConfig, RegimeComparison};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        path: PathBuf,
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: cube format version {found} cannot be read by version {FORMAT_VERSION}; re-run or convert the file")]
    Migration { path: PathBuf, found: u64 },
    #[error("config fingerprints differ ({0} vs {1})")]
    Fingerprint(String, String),
    #[error("cells disagree at {algorithm}, seed {seed}, {test}")]
    Conflict {
        algorithm: String,
        seed: u64,
        test: TestPoint,
    },
    #[error(transparent)]
    Cube(#[from] ConcordanceError),
    #[error("cannot report on an empty cube")]
    EmptyCube,
}

/// A cube plus the provenance needed to merge and audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredCube {
    pub format_version: u32,
    /// Hex SHA-256 of the producing config; `None` for imported cubes.
    pub config_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    pub cube: ResultsCube,
}

impl StoredCube {
    pub fn new(cube: ResultsCube, config: Option<&BenchmarkConfig>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            config_fingerprint: config.map(fingerprint),
            created_unix: None,
            cube,
        }
    }

    /// Stamps the current time. Stamped files are no longer byte-identical
    /// across reruns.
    pub fn with_timestamp(mut self) -> Self {
        self.created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        self
    }
}

/// Hex SHA-256 of the config's canonical JSON. The worker count is not part
/// of it.
pub fn fingerprint(config: &BenchmarkConfig) -> String {
    let json = serde_json::to_vec(config).expect("configs serialize");
    hex::encode(Sha256::digest(&json))
}

pub fn to_bytes(stored: &StoredCube) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(stored).expect("cubes serialize");
    bytes.push(b'\n');
    bytes
}

/// Writes through a sibling temp file renamed into place.
pub fn save_cube(stored: &StoredCube, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let io = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(&to_bytes(stored)).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<StoredCube, StoreError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cube(&bytes, path)
}

/// Parses cube file bytes; `path` only labels errors.
pub fn parse_cube(bytes: &[u8], path: &Path) -> Result<StoredCube, StoreError> {
    let parse_err = |e: serde_json::Error| StoreError::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(bytes, e.line(), e.column()),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(parse_err)?;
    let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0);
    if found != u64::from(FORMAT_VERSION) {
        return Err(StoreError::Migration {
            path: path.to_path_buf(),
            found,
        });
    }
    // Reparse the bytes rather than the value so that errors keep positions.
    let stored: StoredCube = serde_json::from_slice(bytes).map_err(parse_err)?;
    let c = &stored.cube;
    let cube = ResultsCube::new(
        c.algorithms().to_vec(),
        c.seeds().to_vec(),
        c.tests().to_vec(),
        c.cells().to_vec(),
    )?;
    Ok(StoredCube { cube, ..stored })
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = bytes
        .split_inclusive(|&b| b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum();
    (start + column).min(bytes.len())
}

/// Union of two cubes from the same config. Axes keep first-appearance
/// order, overlapping cells must agree, and the result must be complete.
pub fn merge(a: &StoredCube, b: &StoredCube) -> Result<StoredCube, StoreError> {
    if a.config_fingerprint != b.config_fingerprint {
        let show = |f: &Option<String>| f.clone().unwrap_or_else(|| "none".into());
        return Err(StoreError::Fingerprint(show(&a.config_fingerprint), show(&b.config_fingerprint)));
    }
    fn union<T: Clone + PartialEq>(x: &[T], y: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        out.extend(y.iter().filter(|v| !x.contains(v)).cloned());
        out
    }
    let algorithms = union(a.cube.algorithms(), b.cube.algorithms());
    let seeds = union(a.cube.seeds(), b.cube.seeds());
    let tests = union(a.cube.tests(), b.cube.tests());
    let mut builder = ResultsCube::builder(algorithms.clone(), seeds.clone(), tests.clone());
    let mut seen: HashMap<(usize, usize, usize), Cell> = HashMap::new();
    for part in [&a.cube, &b.cube] {
        for (ai, alg) in part.algorithms().iter().enumerate() {
            let an = algorithms.iter().position(|x| x == alg).expect("in union");
            for (si, seed) in part.seeds().iter().enumerate() {
                let sn = seeds.iter().position(|x| x == seed).expect("in union");
                for (ti, test) in part.tests().iter().enumerate() {
                    let tn = tests.iter().position(|x| x == test).expect("in union");
                    let cell = part.get(ai, si, ti);
                    if let Some(prev) = seen.insert((an, sn, tn), cell) {
                        if prev != cell {
                            return Err(StoreError::Conflict {
                                algorithm: alg.clone(),
                                seed: *seed,
                                test: test.clone(),
                            });
                        }
                    }
                    builder.set(an, sn, tn, cell);
                }
            }
        }
    }
    Ok(StoredCube {
        format_version: FORMAT_VERSION,
        config_fingerprint: a.config_fingerprint.clone(),
        created_unix: a.created_unix.max(b.created_unix),
        cube: builder.build()?,
    })
}

/// Mean and population standard deviation over successful seeds, with
/// failures counted by reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub algorithm: String,
    pub test: TestPoint,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub ok: usize,
    pub failed: usize,
    pub failures: Vec<(FailureReason, usize)>,
}

const REASONS: [FailureReason; 4] = [
    FailureReason::Oom,
    FailureReason::Timeout,
    FailureReason::Crash,
    FailureReason::Nonfinite,
];

/// One summary per (algorithm, test), algorithm-major.
pub fn summarize(cube: &ResultsCube) -> Vec<SeedSummary> {
    let mut out = Vec::new();
    for (a, algorithm) in cube.algorithms().iter().enumerate() {
        for (t, test) in cube.tests().iter().enumerate() {
            let cells: Vec<Cell> = (0..cube.seeds().len()).map(|s| cube.get(a, s, t)).collect();
            let values: Vec<f64> = cells.iter().filter_map(Cell::value).collect();
            let (mean, std) = if values.is_empty() {
                (None, None)
            } else {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (Some(mean), Some(var.sqrt()))
            };
            let failures = REASONS
                .iter()
                .map(|&r| {
                    let count = cells
                        .iter()
                        .filter(|c| match c {
                            Cell::Failed(x) => *x == r,
                            Cell::Value(v) => !v.is_finite() && r == FailureReason::Nonfinite,
                        })
                        .count();
                    (r, count)
                })
                .filter(|&(_, c)| c > 0)
                .collect();
            out.push(SeedSummary {
                algorithm: algorithm.clone(),
                test: test.clone(),
                mean,
                std,
                ok: values.len(),
                failed: cells.len() - values.len(),
                failures,
            });
        }
    }
    out
}

fn failure_note(s: &SeedSummary) -> String {
    s.failures
        .iter()
        .map(|(r, c)| format!("{} {}", c, r.name()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

pub fn metric_summary_markdown(cube: &ResultsCube) -> String {
    let summaries = summarize(cube);
    let mut md = String::from("# Metric summary\n\nMean ± population standard deviation over successful seeds.\n");
    for test in cube.tests() {
        let _ = write!(
            md,
            "\n## {} / {} ({})\n\n| algorithm | mean ± std | ok | failed |\n|---|---|---|---|\n",
            test.dataset,
            test.metric,
            match test.metric.orientation() {
                crate::metrics::Orientation::HigherBetter => "higher is better",
                crate::metrics::Orientation::LowerBetter => "lower is better",
            }
        );
        for s in summaries.iter().filter(|s| &s.test == test) {
            let value = match (s.mean, s.std) {
                (Some(m), Some(sd)) => format!("{m:.4} ± {sd:.4}"),
                _ => "FAILED".into(),
            };
            let failed = if s.failed == 0 {
                "0".to_string()
            } else {
                format!("{} ({})", s.failed, failure_note(s))
            };
            let _ = writeln!(md, "| {} | {value} | {} | {failed} |", s.algorithm, s.ok);
        }
    }
    md
}

pub fn consistency_summary_markdown(concord: &ConcordanceReport, comparison: Option<&RegimeComparison>) -> String {
    let mut md = String::from("# Consistency summary\n\n");
    match comparison {
        Some(c) => {
            let f = &c.fcr_mean_over_seeds;
            let g = &c.fcr_per_seed;
            let _ = write!(
                md,
                "| | Default | HPO |\n|---|---|---|\n\
                 | W Randomness Coefficient | {:.3} | {:.3} |\n\
                 | Framework Comparison Rank | {:.3} ± {:.3} | {:.3} ± {:.3} |\n\
                 | Framework Comparison Rank (per seed) | {:.3} ± {:.3} | {:.3} ± {:.3} |\n",
                c.default_params.w_randomness,
                c.hpo.w_randomness,
                f.mean[0],
                f.std[0],
                f.mean[1],
                f.std[1],
                g.mean[0],
                g.std[0],
                g.mean[1],
                g.std[1],
            );
        }
        None => {
            let _ = writeln!(md, "W Randomness Coefficient: {:.3}", concord.w_randomness);
            if let Some(w) = concord.w_randomness_tie_corrected {
                let _ = writeln!(md, "\nTie-corrected: {w:.3}");
            }
        }
    }
    md.push_str("\n## Per-test concordance\n\n| dataset | metric | W | tie fraction | tie-corrected W | all-failed seeds |\n|---|---|---|---|---|---|\n");
    for t in &concord.tests {
        let _ = writeln!(
            md,
            "| {} | {} | {:.4} | {:.4} | {} | {} |",
            t.test.dataset,
            t.test.metric,
            t.w,
            t.tie_fraction,
            fmt_opt(t.w_tie_corrected),
            t.all_failed_seeds
        );
    }
    md
}

/// `algorithm,dataset,metric,mean,std,ok,failed` rows; `mean` and `std`
/// are empty when every seed failed.
pub fn plot_data_csv(cube: &ResultsCube) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algorithm", "dataset", "metric", "mean", "std", "ok", "failed"])
        .expect("in-memory write");
    for s in summarize(cube) {
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            s.algorithm.as_str(),
            &s.test.dataset,
            s.test.metric.name(),
            &num(s.mean),
            &num(s.std),
            &s.ok.to_string(),
            &s.failed.to_string(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub const METRIC_SUMMARY_FILE: &str = "metric_summary.md";
pub const CONSISTENCY_SUMMARY_FILE: &str = "consistency_summary.md";
pub const PLOT_DATA_FILE: &str = "plot_data.csv";

/// Writes the report files into `out_dir` and returns their paths.
pub fn emit_report(
    cube: &ResultsCube,
    concord: &ConcordanceReport,
    comparison: Option<&RegimeComparison>,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>, StoreError> {
    if cube.cells().is_empty() {
        return Err(StoreError::EmptyCube);
    }
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = [
        (METRIC_SUMMARY_FILE, metric_summary_markdown(cube).into_bytes()),
        (CONSISTENCY_SUMMARY_FILE, consistency_summary_markdown(concord, comparison).into_bytes()),
        (PLOT_DATA_FILE, plot_data_csv(cube)),
    ];
    let mut written = Vec::new();
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}
