//! Downloads public datasets and converts them to bundles.
//!
//! Only the WebKB graphs are fetched, from the raw Geom-GCN split files.
//! The other published datasets ship in formats this tool does not parse.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graph::{write_bundle, BundleContents, EdgeConvention, FeatureMatrix, GraphError};

pub const DEFAULT_BASE_URL: &str = "https://raw.githubusercontent.com/graphdml-uiuc-jlu/geom-gcn/master/new_data";

/// Bundle name and upstream directory of each downloadable dataset.
pub const WEBKB: [(&str, &str); 3] = [("texas", "texas"), ("cornell", "cornell"), ("wisc", "wisconsin")];

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("unknown dataset `{0}`; available: texas, cornell, wisc")]
    Unknown(String),
    #[error("download of {url} failed: {message}")]
    Download { url: String, message: String },
    #[error("{file} line {line}: {message}")]
    Format { file: String, line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parsed Geom-GCN node file plus raw edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWebKb {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub edges: Vec<(usize, usize, f64)>,
}

fn format_err(file: &str, line: usize, message: impl Into<String>) -> FetchError {
    FetchError::Format {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses `out1_node_feature_label.txt` (`id<TAB>f1,f2,...<TAB>label` after a
/// header) and `out1_graph_edges.txt` (`u<TAB>v` after a header). Every raw
/// edge entry is kept; the graph builder merges reverse duplicates.
pub fn parse_geom_gcn(nodes_text: &str, edges_text: &str) -> Result<RawWebKb, FetchError> {
    const NODES: &str = "out1_node_feature_label.txt";
    const EDGES: &str = "out1_graph_edges.txt";
    let mut rows: Vec<(usize, Vec<f64>, usize)> = Vec::new();
    for (i, line) in nodes_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(format_err(NODES, i + 1, format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim().parse().map_err(|_| format_err(NODES, i + 1, "bad node id"))?;
        let feats = fields[1]
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| format_err(NODES, i + 1, "bad feature value"))?;
        let label = fields[2].trim().parse().map_err(|_| format_err(NODES, i + 1, "bad label"))?;
        rows.push((id, feats, label));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
        return Err(format_err(NODES, 0, "node ids are not 0..N"));
    }
    let d = rows.first().map_or(0, |r| r.1.len());
    if let Some(r) = rows.iter().find(|r| r.1.len() != d) {
        return Err(format_err(NODES, 0, format!("node {} has {} features, expected {d}", r.0, r.1.len())));
    }
    let labels = rows.iter().map(|r| r.2).collect();
    let features = FeatureMatrix::from_rows(rows.into_iter().map(|r| r.1).collect())?;

    let mut edges = Vec::new();
    for (i, line) in edges_text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(u)), Some(Ok(v)), None) => edges.push((u, v, 1.0)),
            _ => return Err(format_err(EDGES, i + 1, "expected two node ids")),
        }
    }
    Ok(RawWebKb { features, labels, edges })
}

/// Writes a parsed dataset as a bundle whose edge count follows the raw
/// entry convention of the published statistics.
pub fn write_webkb(name: &str, raw: &RawWebKb, dir: &Path) -> Result<(), FetchError> {
    let classes = raw.labels.iter().max().map_or(0, |m| m + 1);
    let zero_one = raw.features.as_slice().iter().all(|&x| x == 0.0 || x == 1.0);
    write_bundle(
        dir,
        &BundleContents {
            name,
            k: classes,
            classes: Some(classes),
            edges: &raw.edges,
            features: &raw.features,
            labels: Some(&raw.labels),
            edge_convention: EdgeConvention::Entries,
            binary_features: !zero_one,
        },
    )?;
    Ok(())
}

fn download(url: &str) -> Result<String, FetchError> {
    let err = |message: String| FetchError::Download {
        url: url.to_string(),
        message,
    };
    ureq::get(url)
        .call()
        .map_err(|e| err(e.to_string()))?
        .body_mut()
        .read_to_string()
        .map_err(|e| err(e.to_string()))
}

/// Downloads one dataset into `out_root/<name>` and returns that path.
pub fn fetch_dataset(name: &str, out_root: &Path, base_url: &str) -> Result<PathBuf, FetchError> {
    let (bundle, upstream) = WEBKB
        .iter()
        .find(|(b, u)| *b == name || *u == name)
        .ok_or_else(|| FetchError::Unknown(name.to_string()))?;
    let base = base_url.trim_end_matches('/');
    let nodes = download(&format!("{base}/{upstream}/out1_node_feature_label.txt"))?;
    let edges = download(&format!("{base}/{upstream}/out1_graph_edges.txt"))?;
    let raw = parse_geom_gcn(&nodes, &edges)?;
    let dir = out_root.join(bundle);
    write_webkb(bundle, &raw, &dir)?;
    Ok(dir)
}
