//! Scores two partitions of the karate club with every metric.

use commbench::graph::{load_dataset, BundleFormat};
use commbench::metrics::{evaluate_all, Metric, Partition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = load_dataset(concat!(env!("CARGO_MANIFEST_DIR"), "/data/karate"), BundleFormat::EdgeListBundle)?;
    let labels = graph.labels().expect("karate is labelled").to_vec();
    let all: Vec<usize> = (0..graph.node_count()).collect();
    let halves: Vec<usize> = (0..graph.node_count()).map(|i| usize::from(i >= 17)).collect();
    for (name, assignment) in [("ground truth", labels.clone()), ("split by id", halves)] {
        let p = Partition::new(assignment, 2)?;
        println!("{name}:");
        for (metric, value) in evaluate_all(&graph, &p, Some(&labels), &all, &Metric::ALL) {
            println!("  {metric:<12} {:.4}", value?.value);
        }
    }
    Ok(())
}
