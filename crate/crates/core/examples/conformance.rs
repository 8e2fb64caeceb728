//! Runs the conformance phases against every builtin baseline, or against
//! the runner spec given on the command line.

use commbench::runner::{builtin_baselines, validate_runner, Limits, RunnerSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs = match std::env::args().nth(1) {
        Some(path) => vec![RunnerSpec::from_file(path)?],
        None => builtin_baselines(),
    };
    for spec in specs {
        println!("{}\n", validate_runner(&spec, &Limits::default())?);
    }
    Ok(())
}
