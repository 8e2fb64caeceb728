//! Default parameters against tuned ones on a planted-partition graph.

use commbench::graph::PlantedPartition;
use commbench::orchestrator::{compare_regimes, BenchmarkConfig, DatasetSource, Mode, RunnerRef};
use commbench::runner::Builtin;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let planted = PlantedPartition {
        nodes: 150,
        communities: 3,
        p_in: 0.12,
        p_out: 0.03,
        feature_dim: 6,
        separation: 2.0,
        seed: 5,
    };
    let runners = [Builtin::Kmeans, Builtin::LabelPropagation, Builtin::GreedyModularity, Builtin::Random]
        .into_iter()
        .map(|b| RunnerRef::Builtin { builtin: b, name: None })
        .collect();
    let mut hpo = BenchmarkConfig::new(vec![DatasetSource::planted("planted", planted)], runners);
    hpo.resources.max_trials = 30;
    let default = hpo.clone().with_mode(Mode::DefaultParams);
    let (cmp, _, _) = compare_regimes(&default, &hpo)?;
    let f = &cmp.fcr_mean_over_seeds;
    println!("                          default   tuned");
    println!("W Randomness Coefficient  {:.3}     {:.3}", cmp.default_params.w_randomness, cmp.hpo.w_randomness);
    println!("Framework Comparison Rank {:.3}     {:.3}", f.mean[0], f.mean[1]);
    Ok(())
}
