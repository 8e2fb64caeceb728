//! Dataset bundle directories.
//!
//! ```text
//! <bundle>/meta.txt        key=value lines: name, n, d, k, classes, edge_convention
//! <bundle>/edges.txt       "u v [w]" per line, w defaults to 1.0
//! <bundle>/features.txt    N lines of d whitespace-separated reals
//!   or   features.bin      binary container, see FEATURE_MAGIC
//! <bundle>/labels.txt      optional, one integer per line
//! ```
//!
//! Blank lines and lines starting with `#` are ignored in every text file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{EdgeConvention, FeatureMatrix, Graph, GraphError};

/// First four bytes of `features.bin`. Followed by a little-endian u32
/// version (1), u64 rows, u64 cols and `rows * cols` little-endian f64s.
pub const FEATURE_MAGIC: &[u8; 4] = b"CBFM";
const FEATURE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BundleFormat {
    #[default]
    EdgeListBundle,
}

pub fn load_dataset(path: impl AsRef<Path>, format: BundleFormat) -> Result<Graph, GraphError> {
    let BundleFormat::EdgeListBundle = format;
    let dir = path.as_ref();
    let meta_path = dir.join("meta.txt");
    let meta = parse_meta(&meta_path, &read_text(&meta_path)?)?;

    let n: usize = meta_number(&meta, "n", &meta_path)?.ok_or_else(|| GraphError::Parse {
        path: meta_path.clone(),
        line: 0,
        message: "missing key `n`".into(),
    })?;
    let k: Option<usize> = meta_number(&meta, "k", &meta_path)?;
    let declared_d: Option<usize> = meta_number(&meta, "d", &meta_path)?;
    let classes: Option<usize> = meta_number(&meta, "classes", &meta_path)?;
    let name = meta.get("name").cloned().unwrap_or_else(|| {
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unnamed".into())
    });
    let convention = match meta.get("edge_convention") {
        Some(s) => EdgeConvention::parse(s).ok_or_else(|| GraphError::Parse {
            path: meta_path.clone(),
            line: 0,
            message: format!("unknown edge_convention `{s}`"),
        })?,
        None => EdgeConvention::default(),
    };

    let edges_path = dir.join("edges.txt");
    let edges = parse_edges(&edges_path, &read_text(&edges_path)?)?;

    let features = {
        let bin = dir.join("features.bin");
        let txt = dir.join("features.txt");
        if bin.exists() {
            read_feature_bin(&bin)?
        } else if txt.exists() {
            parse_feature_text(&txt, &read_text(&txt)?)?
        } else if declared_d.unwrap_or(0) == 0 {
            FeatureMatrix::zeros(n, 0)
        } else {
            return Err(GraphError::Io {
                path: txt,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "no feature file"),
            });
        }
    };
    if features.rows() != n {
        return Err(GraphError::Shape(format!(
            "feature matrix has {} rows but meta declares n={n}",
            features.rows()
        )));
    }
    if let Some(d) = declared_d {
        if features.cols() != d {
            return Err(GraphError::Shape(format!(
                "feature matrix has {} columns but meta declares d={d}",
                features.cols()
            )));
        }
    }

    let labels_path = dir.join("labels.txt");
    let labels = if labels_path.exists() {
        Some(parse_labels(&labels_path, &read_text(&labels_path)?)?)
    } else {
        None
    };

    let mut builder = Graph::builder(n)
        .name(name)
        .edges(edges)
        .features(features)
        .edge_convention(convention);
    if let Some(k) = k {
        builder = builder.k(k);
    }
    if let Some(c) = classes {
        builder = builder.num_classes(c);
    }
    if let Some(l) = labels {
        builder = builder.labels(l);
    }
    builder.build()
}

/// Raw bundle contents, written verbatim so the edge-entry count survives.
#[derive(Debug, Clone)]
pub struct BundleContents<'a> {
    pub name: &'a str,
    pub k: usize,
    pub classes: Option<usize>,
    pub edges: &'a [(usize, usize, f64)],
    pub features: &'a FeatureMatrix,
    pub labels: Option<&'a [usize]>,
    pub edge_convention: EdgeConvention,
    pub binary_features: bool,
}

pub fn write_bundle(dir: impl AsRef<Path>, contents: &BundleContents<'_>) -> Result<(), GraphError> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| GraphError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let n = contents.features.rows();
    let mut meta = format!(
        "name={}\nn={n}\nd={}\nk={}\n",
        contents.name,
        contents.features.cols(),
        contents.k
    );
    if let Some(c) = contents.classes {
        meta.push_str(&format!("classes={c}\n"));
    }
    let convention = match contents.edge_convention {
        EdgeConvention::Undirected => "undirected",
        EdgeConvention::Directed => "directed",
        EdgeConvention::Entries => "entries",
    };
    meta.push_str(&format!("edge_convention={convention}\n"));
    let meta_path = dir.join("meta.txt");
    fs::write(&meta_path, meta).map_err(io(&meta_path))?;

    let mut edges = String::new();
    for &(u, v, w) in contents.edges {
        if w == 1.0 {
            edges.push_str(&format!("{u} {v}\n"));
        } else {
            edges.push_str(&format!("{u} {v} {w}\n"));
        }
    }
    let edges_path = dir.join("edges.txt");
    fs::write(&edges_path, edges).map_err(io(&edges_path))?;

    if contents.binary_features {
        let path = dir.join("features.bin");
        let mut buf = Vec::with_capacity(24 + 8 * contents.features.as_slice().len());
        buf.extend_from_slice(FEATURE_MAGIC);
        buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(n as u64).to_le_bytes());
        buf.extend_from_slice(&(contents.features.cols() as u64).to_le_bytes());
        for x in contents.features.as_slice() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        fs::write(&path, buf).map_err(io(&path))?;
    } else {
        let path = dir.join("features.txt");
        let mut file = fs::File::create(&path).map_err(io(&path))?;
        for i in 0..n {
            let row: Vec<String> = contents
                .features
                .row(i)
                .iter()
                .map(|x| x.to_string())
                .collect();
            writeln!(file, "{}", row.join(" ")).map_err(io(&path))?;
        }
    }

    if let Some(labels) = contents.labels {
        let path = dir.join("labels.txt");
        let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
        fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_meta(path: &Path, text: &str) -> Result<BTreeMap<String, String>, GraphError> {
    let mut meta = BTreeMap::new();
    for (line, content) in content_lines(text) {
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(path, line, "expected key=value"))?;
        meta.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(meta)
}

fn meta_number(
    meta: &BTreeMap<String, String>,
    key: &str,
    path: &Path,
) -> Result<Option<usize>, GraphError> {
    meta.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| parse_err(path, 0, format!("`{key}` is not a non-negative integer")))
        })
        .transpose()
}

fn parse_edges(path: &Path, text: &str) -> Result<Vec<(usize, usize, f64)>, GraphError> {
    let mut edges = Vec::new();
    for (line, content) in content_lines(text) {
        let mut fields = content.split_whitespace();
        let mut id = |what: &str| -> Result<usize, GraphError> {
            fields
                .next()
                .ok_or_else(|| parse_err(path, line, format!("missing {what}")))?
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad {what}")))
        };
        let u = id("source")?;
        let v = id("target")?;
        let w = match fields.next() {
            Some(w) => w
                .parse()
                .map_err(|_| parse_err(path, line, "bad weight"))?,
            None => 1.0,
        };
        if fields.next().is_some() {
            return Err(parse_err(path, line, "expected `u v [w]`"));
        }
        edges.push((u, v, w));
    }
    Ok(edges)
}

fn parse_feature_text(path: &Path, text: &str) -> Result<FeatureMatrix, GraphError> {
    let mut rows = Vec::new();
    for (line, content) in content_lines(text) {
        let row = content
            .split_whitespace()
            .map(|x| x.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| parse_err(path, line, "bad feature value"))?;
        rows.push(row);
    }
    FeatureMatrix::from_rows(rows)
}

fn read_feature_bin(path: &Path) -> Result<FeatureMatrix, GraphError> {
    let bytes = fs::read(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let header = |msg: &str| parse_err(path, 0, msg.to_string());
    if bytes.len() < 24 || &bytes[..4] != FEATURE_MAGIC {
        return Err(header("not a feature container"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FEATURE_VERSION {
        return Err(header("unsupported feature container version"));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let body = &bytes[24..];
    if body.len() != rows * cols * 8 {
        return Err(GraphError::Shape(format!(
            "{} holds {} bytes of values, expected {rows} x {cols} f64",
            path.display(),
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(rows, cols, data)
}

fn parse_labels(path: &Path, text: &str) -> Result<Vec<usize>, GraphError> {
    content_lines(text)
        .map(|(line, content)| {
            content
                .parse()
                .map_err(|_| parse_err(path, line, "bad label"))
        })
        .collect()
}
