//! Command-line interface. `main.rs` only forwards to [`main_with_args`].

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::concordance::{w_randomness_coefficient_with, ConcordanceOptions, ConcordanceReport, ResultsCube};
use crate::fetch::{fetch_dataset, FetchError, DEFAULT_BASE_URL, WEBKB};
use crate::graph::{dataset_summary_with, load_dataset, BundleFormat, ClosenessConvention, GraphError};
use crate::orchestrator::{run_benchmark, BenchmarkConfig, ConformancePolicy, Mode, OrchestratorError, RegimeComparison};
use crate::runner::{serve_builtin, validate_runner, Builtin, Fault, Limits, RunnerError, RunnerSpec, ServeError};
use crate::store::{emit_report, load_cube, save_cube, StoreError, StoredCube};

#[derive(Debug, Parser)]
#[command(name = "commbench", version, about = "Benchmark community-detection algorithms across seeds, datasets and metrics")]
pub struct Cli {
    /// Emit one JSON document on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print size and structure statistics of a dataset bundle.
    Stats {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "component-scaled")]
        closeness: ClosenessArg,
    },
    /// Run a benchmark config and save its results cube.
    Run(RunArgs),
    /// Compare a default-parameter cube (A) with a tuned cube (B).
    Compare { cube_a: PathBuf, cube_b: PathBuf },
    /// Ranking consistency of a cube file or a CSV of results.
    Rank {
        input: PathBuf,
        /// Also aggregate the tie-corrected coefficient.
        #[arg(long)]
        tie_corrected: bool,
    },
    /// Write summary tables and plot data for a cube.
    Report {
        cube: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Default-parameter cube; `cube` is then taken as the tuned one and
        /// the summary gains the head-to-head comparison.
        #[arg(long)]
        default_cube: Option<PathBuf>,
    },
    /// Check that a runner speaks the protocol correctly.
    ValidateRunner {
        /// Runner spec file, or the name of a builtin baseline.
        spec: String,
        #[arg(long, default_value_t = 60)]
        timeout_secs: u64,
    },
    /// Download the public WebKB bundles.
    FetchDatasets {
        /// Subset to fetch; all when omitted.
        names: Vec<String>,
        #[arg(long, default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value = DEFAULT_BASE_URL)]
        base_url: String,
    },
    /// Serve a builtin baseline over the runner protocol on stdin/stdout.
    #[command(hide = true)]
    ServeBuiltin {
        builtin: Builtin,
        #[arg(long)]
        inject: Option<Fault>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ClosenessArg {
    ComponentScaled,
    ReachableOnly,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    Hpo,
    DefaultParams,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ConformanceArg {
    Require,
    Warn,
    Skip,
}

/// Flags override the matching config keys.
#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// Cube output path.
    #[arg(long, default_value = "results.cube.json")]
    pub out: PathBuf,
    /// Also write selections, study histories and conformance reports.
    #[arg(long)]
    pub details: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub max_trials: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long, value_enum)]
    pub conformance: Option<ConformanceArg>,
    /// Record the creation time in the cube file.
    #[arg(long)]
    pub timestamp: bool,
}

/// Error classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Input(String),
    Conformance(String),
    Network(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Input(_) => 4,
            CliError::Conformance(_) => 5,
            CliError::Network(_) => 6,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            CliError::Runtime(_) => "runtime",
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Input(_) => "input",
            CliError::Conformance(_) => "conformance",
            CliError::Network(_) => "network",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Config(m)
            | CliError::Input(m)
            | CliError::Conformance(m)
            | CliError::Network(m)
            | CliError::Runtime(m) => m,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Cube(c) => CliError::Runtime(c.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<crate::concordance::ConcordanceError> for CliError {
    fn from(e: crate::concordance::ConcordanceError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<RunnerError> for CliError {
    fn from(e: RunnerError) -> Self {
        match e {
            RunnerError::Spec(_) | RunnerError::Parse { .. } => CliError::Config(e.to_string()),
            RunnerError::Io { .. } => CliError::Input(e.to_string()),
            RunnerError::Setup(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Config(_) | OrchestratorError::Hpo(_) => CliError::Config(e.to_string()),
            OrchestratorError::Io { .. } | OrchestratorError::Graph(_) => CliError::Input(e.to_string()),
            OrchestratorError::Runner(r) => r.into(),
            OrchestratorError::Conformance { .. } => CliError::Conformance(e.to_string()),
            OrchestratorError::Concordance(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<FetchError> for CliError {
    fn from(e: FetchError) -> Self {
        match e {
            FetchError::Unknown(_) => CliError::Usage(e.to_string()),
            FetchError::Download { .. } => CliError::Network(e.to_string()),
            FetchError::Format { .. } | FetchError::Graph(_) => CliError::Input(e.to_string()),
        }
    }
}

fn io_err(e: io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let json = cli.json;
    let mut out = io::stdout().lock();
    match execute(cli, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            if json {
                let doc = serde_json::json!({"error": {"class": e.class(), "code": e.code(), "message": e.message()}});
                let _ = writeln!(out, "{doc}");
            }
            eprintln!("error[{}]: {}", e.class(), e.message());
            e.code()
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
    if json {
        let doc = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(out, "{doc}").map_err(io_err)
    } else {
        write!(out, "{}", text()).map_err(io_err)
    }
}

/// A cube file, or a CSV of `algorithm,seed,dataset,metric,value` rows when
/// the path ends in `.csv`.
pub fn read_cube(path: &Path) -> Result<ResultsCube, CliError> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let file = std::fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        ResultsCube::from_csv(file).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    } else {
        Ok(load_cube(path)?.cube)
    }
}

pub fn concordance_text(r: &ConcordanceReport) -> String {
    let mut s = format!("W Randomness Coefficient: {:.3}\n", r.w_randomness);
    if let Some(w) = r.w_randomness_tie_corrected {
        s.push_str(&format!("W Randomness Coefficient (tie-corrected): {w:.3}\n"));
    }
    s.push_str(&format!("mean W: {:.4} ± {:.4}\n", r.mean_w, r.std_w));
    for t in &r.tests {
        s.push_str(&format!("  {:<32} W={:.4} ties={:.3}", t.test.to_string(), t.w, t.tie_fraction));
        if let Some(w) = t.w_tie_corrected {
            s.push_str(&format!(" W_tc={w:.4}"));
        }
        if t.all_failed_seeds > 0 {
            s.push_str(&format!(" all-failed-seeds={}", t.all_failed_seeds));
        }
        s.push('\n');
    }
    s
}

pub fn comparison_text(c: &RegimeComparison) -> String {
    let f = &c.fcr_mean_over_seeds;
    let g = &c.fcr_per_seed;
    format!(
        "Framework Comparison Rank (mean over seeds): A {:.3} ± {:.3}  B {:.3} ± {:.3}\n\
         Framework Comparison Rank (per seed):       A {:.3} ± {:.3}  B {:.3} ± {:.3}\n\
         W Randomness Coefficient:                   A {:.3}  B {:.3}\n",
        f.mean[0], f.std[0], f.mean[1], f.std[1], g.mean[0], g.std[0], g.mean[1], g.std[1],
        c.default_params.w_randomness, c.hpo.w_randomness
    )
}

fn apply_overrides(cfg: &mut BenchmarkConfig, args: &RunArgs) {
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Hpo => Mode::Hpo,
            ModeArg::DefaultParams => Mode::DefaultParams,
        };
    }
    if let Some(s) = &args.seeds {
        cfg.resources.seeds = s.clone();
    }
    if let Some(t) = args.max_trials {
        cfg.resources.max_trials = t;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(t) = args.timeout_secs {
        cfg.resources.timeout_secs = t;
    }
    if let Some(c) = args.conformance {
        cfg.conformance = match c {
            ConformanceArg::Require => ConformancePolicy::Require,
            ConformanceArg::Warn => ConformancePolicy::Warn,
            ConformanceArg::Skip => ConformancePolicy::Skip,
        };
    }
}

#[derive(Serialize)]
struct RunSummary {
    cube: PathBuf,
    config_fingerprint: String,
    algorithms: usize,
    seeds: usize,
    tests: usize,
    failed_cells: usize,
    w_randomness: Option<f64>,
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let json = cli.json;
    match cli.command {
        Command::Stats { dataset, closeness } => {
            let g = load_dataset(&dataset, BundleFormat::EdgeListBundle)?;
            let convention = match closeness {
                ClosenessArg::ComponentScaled => ClosenessConvention::ComponentScaled,
                ClosenessArg::ReachableOnly => ClosenessConvention::ReachableOnly,
            };
            let s = dataset_summary_with(&g, convention)?;
            emit(out, json, &s, || {
                format!(
                    "name={}\nnodes={}\nedges={}\nfeatures={}\nclasses={}\navg_clustering_coefficient={:.6}\nmean_closeness_centrality={:.6}\n",
                    s.name, s.nodes, s.edges, s.features, s.classes, s.avg_clustering_coefficient, s.mean_closeness_centrality
                )
            })
        }
        Command::Run(args) => {
            let mut cfg = BenchmarkConfig::from_file(&args.config)?;
            apply_overrides(&mut cfg, &args);
            let outcome = run_benchmark(&cfg)?;
            let mut stored = StoredCube::new(outcome.cube.clone(), Some(&cfg));
            if args.timestamp {
                stored = stored.with_timestamp();
            }
            save_cube(&stored, &args.out)?;
            if let Some(path) = &args.details {
                let text = serde_json::to_string_pretty(&outcome).map_err(|e| CliError::Runtime(e.to_string()))?;
                std::fs::write(path, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            }
            let w = crate::concordance::w_randomness_coefficient(&outcome.cube).ok().map(|r| r.w_randomness);
            let summary = RunSummary {
                cube: args.out.clone(),
                config_fingerprint: stored.config_fingerprint.clone().unwrap_or_default(),
                algorithms: outcome.cube.algorithms().len(),
                seeds: outcome.cube.seeds().len(),
                tests: outcome.cube.tests().len(),
                failed_cells: outcome.cube.failure_count(),
                w_randomness: w,
            };
            emit(out, json, &summary, || {
                let mut s = format!(
                    "wrote {} ({} algorithms x {} seeds x {} tests, {} failed cells)\n",
                    summary.cube.display(),
                    summary.algorithms,
                    summary.seeds,
                    summary.tests,
                    summary.failed_cells
                );
                if let Some(w) = summary.w_randomness {
                    s.push_str(&format!("W Randomness Coefficient: {w:.3}\n"));
                }
                s
            })
        }
        Command::Compare { cube_a, cube_b } => {
            let a = read_cube(&cube_a)?;
            let b = read_cube(&cube_b)?;
            let c = RegimeComparison::from_cubes(&a, &b)?;
            emit(out, json, &c, || comparison_text(&c))
        }
        Command::Rank { input, tie_corrected } => {
            let cube = read_cube(&input)?;
            let r = w_randomness_coefficient_with(&cube, ConcordanceOptions { tie_corrected })?;
            emit(out, json, &r, || concordance_text(&r))
        }
        Command::Report { cube, out: dir, default_cube } => {
            let tuned = read_cube(&cube)?;
            let concord = crate::concordance::w_randomness_coefficient(&tuned)?;
            let comparison = match &default_cube {
                Some(p) => Some(RegimeComparison::from_cubes(&read_cube(p)?, &tuned)?),
                None => None,
            };
            let files = emit_report(&tuned, &concord, comparison.as_ref(), &dir)?;
            emit(out, json, &files, || {
                files.iter().map(|f| format!("wrote {}\n", f.display())).collect()
            })
        }
        Command::ValidateRunner { spec, timeout_secs } => {
            let runner = match spec.parse::<Builtin>() {
                Ok(b) if !Path::new(&spec).exists() => RunnerSpec::builtin(b),
                _ => RunnerSpec::from_file(&spec)?,
            };
            let limits = Limits {
                timeout: Duration::from_secs(timeout_secs),
                memory_bytes: None,
            };
            let report = validate_runner(&runner, &limits)?;
            emit(out, json, &report, || format!("{report}\n"))?;
            match report.failed_phase() {
                None => Ok(()),
                Some(p) => Err(CliError::Conformance(format!("runner `{}` failed at {p}", report.runner))),
            }
        }
        Command::FetchDatasets { names, out: dir, base_url } => {
            let names: Vec<String> = if names.is_empty() {
                WEBKB.iter().map(|(b, _)| b.to_string()).collect()
            } else {
                names
            };
            let mut written = Vec::new();
            for n in &names {
                let path = fetch_dataset(n, &dir, &base_url)?;
                log::info!("fetched {n} into {}", path.display());
                written.push(path);
            }
            emit(out, json, &written, || {
                written.iter().map(|p| format!("wrote {}\n", p.display())).collect()
            })
        }
        Command::ServeBuiltin { builtin, inject } => {
            let stdin = io::stdin().lock();
            match serve_builtin(builtin, inject, stdin, &mut *out) {
                Ok(()) => Ok(()),
                Err(ServeError::InjectedOom) => {
                    eprintln!("{}", ServeError::InjectedOom);
                    std::process::exit(1)
                }
                Err(ServeError::InjectedCrash) => std::process::abort(),
                Err(e) => Err(CliError::Runtime(e.to_string())),
            }
        }
    }
}
