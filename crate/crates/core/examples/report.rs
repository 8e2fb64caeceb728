//! Saves a benchmark cube, reloads it and writes the report files.
//!
//! cargo run --example report [-- out-dir]

use commbench::concordance::w_randomness_coefficient;
use commbench::orchestrator::{run_benchmark, BenchmarkConfig};
use commbench::store::{emit_report, load_cube, save_cube, StoredCube};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "report".into());
    let mut cfg = BenchmarkConfig::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml"))?;
    cfg.resources.max_trials = 12;
    let outcome = run_benchmark(&cfg)?;
    let cube_path = std::path::Path::new(&out).join("results.cube.json");
    save_cube(&StoredCube::new(outcome.cube, Some(&cfg)), &cube_path)?;
    let cube = load_cube(&cube_path)?.cube;
    for path in emit_report(&cube, &w_randomness_coefficient(&cube)?, None, &out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
