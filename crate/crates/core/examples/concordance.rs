//! Ranking consistency of a small hand-made results table.

use commbench::concordance::{
    framework_comparison_rank, w_randomness_coefficient, Cell, FailureReason, ResultsCube, SeedReduction, TestPoint,
};
use commbench::metrics::Metric;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let algorithms = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let seeds = vec![42, 24, 976];
    let tests = vec![TestPoint::new("toy", Metric::Nmi), TestPoint::new("toy", Metric::Conductance)];
    let values = [
        // algorithm a, then b, then c; each row is one seed's (nmi, conductance)
        [[0.9, 0.10], [0.8, 0.12], [0.85, 0.11]],
        [[0.7, 0.30], [0.9, 0.20], [0.60, 0.25]],
        [[0.5, 0.40], [0.4, 0.45], [0.00, 0.00]],
    ];
    let mut tuned = ResultsCube::builder(algorithms.clone(), seeds.clone(), tests.clone());
    let mut untuned = ResultsCube::builder(algorithms, seeds, tests);
    for (a, rows) in values.iter().enumerate() {
        for (s, row) in rows.iter().enumerate() {
            for (t, &v) in row.iter().enumerate() {
                let cell = if a == 2 && s == 2 { Cell::Failed(FailureReason::Oom) } else { Cell::from_value(v) };
                tuned.set(a, s, t, cell);
                untuned.set(a, s, t, Cell::from_value(if t == 0 { v * 0.9 } else { v * 1.1 }));
            }
        }
    }
    let (tuned, untuned) = (tuned.build()?, untuned.build()?);
    let report = w_randomness_coefficient(&tuned)?;
    for t in &report.tests {
        println!("{:<20} W = {:.3}", t.test.to_string(), t.w);
    }
    println!("W Randomness Coefficient {:.3}", report.w_randomness);
    let fcr = framework_comparison_rank(&untuned, &tuned, SeedReduction::MeanOverSeeds)?;
    println!("FCR untuned {:.3} ± {:.3}, tuned {:.3} ± {:.3}", fcr.mean[0], fcr.std[0], fcr.mean[1], fcr.std[1]);
    Ok(())
}
