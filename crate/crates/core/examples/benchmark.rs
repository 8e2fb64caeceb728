//! Runs the desk-scale benchmark config end to end and prints the
//! per-metric summary.
//!
//! cargo run --release --example benchmark

use commbench::concordance::w_randomness_coefficient;
use commbench::orchestrator::{run_benchmark, BenchmarkConfig};
use commbench::store::metric_summary_markdown;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = BenchmarkConfig::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml"))?;
    let outcome = run_benchmark(&cfg)?;
    print!("{}", metric_summary_markdown(&outcome.cube));
    for s in outcome.selections.iter().filter(|s| s.test.metric.name() == "nmi") {
        let params: Vec<String> = s.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{} on {}: {}", s.runner, s.test.dataset, params.join(" "));
    }
    println!("W Randomness Coefficient {:.3}", w_randomness_coefficient(&outcome.cube)?.w_randomness);
    Ok(())
}
