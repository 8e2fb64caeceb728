//! Loads a dataset bundle and prints its summary statistics.
//!
//! cargo run --example dataset_stats [-- path/to/bundle]

use commbench::graph::{dataset_summary, load_dataset, BundleFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/karate").to_string());
    let graph = load_dataset(&path, BundleFormat::EdgeListBundle)?;
    let s = dataset_summary(&graph)?;
    println!("{}: {} nodes, {} edges, {} features, {} classes", s.name, s.nodes, s.edges, s.features, s.classes);
    println!("average clustering coefficient {:.3}", s.avg_clustering_coefficient);
    println!("mean closeness centrality      {:.3}", s.mean_closeness_centrality);
    Ok(())
}
