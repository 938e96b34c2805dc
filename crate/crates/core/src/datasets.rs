//! Readers for the public dataset layouts and the canonical on-disk form
//! produced by `ncsm convert`.
//!
//! Supported sources:
//!
//! * `linqs`: `<name>.content` rows `<id> <feature>... <label>` and
//!   `<name>.cites` rows `<id> <id>`, optionally gzip-compressed. Ids are
//!   arbitrary strings; citations naming unknown ids are dropped.
//! * `edgelist`: an edge-list file, optionally with a headerless feature CSV.
//! * `ogb-csv`: `num-node-list.csv` and `edge.csv` (comma-separated pairs),
//!   optionally with a `split/` directory holding `train.csv`, `valid.csv`,
//!   `valid_neg.csv`, `test.csv` and `test_neg.csv`.
//!
//! The canonical form is a directory with `graph.edges`, `node_ids.txt`, an
//! optional `features.csv`, and an optional `split/` bundle.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{
    load_node_features, load_split_bundle, parse_edge_list, parse_edge_list_with, read_bytes, write_split_bundle,
    DataSplit, EdgeList, FeatureMatrix, Graph, MAX_INFERRED_NODES,
};

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Option<FeatureMatrix>,
    /// External id of each node, by index.
    pub node_ids: Vec<String>,
    /// Class label of each node, when the source carries one.
    pub labels: Option<Vec<String>>,
    /// Fixed split shipped with the source.
    pub split: Option<DataSplit>,
    pub stats: ParseStats,
}

/// Records dropped while reading a source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
    pub dangling_dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceFormat {
    Linqs,
    EdgeList,
    OgbCsv,
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linqs" => Ok(Self::Linqs),
            "edgelist" => Ok(Self::EdgeList),
            "ogb-csv" => Ok(Self::OgbCsv),
            _ => Err(Error::Config(format!("unknown source format {s:?} (expected linqs, edgelist or ogb-csv)"))),
        }
    }
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linqs => "linqs",
            Self::EdgeList => "edgelist",
            Self::OgbCsv => "ogb-csv",
        })
    }
}

/// Parses the `.content` and `.cites` files of a LINQS citation dataset.
pub fn parse_linqs(content: &[u8], cites: &[u8]) -> Result<Dataset> {
    let content = std::str::from_utf8(content).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("invalid UTF-8 at byte {}", e.valid_up_to()),
    })?;
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut node_ids = Vec::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (i, line) in content.lines().enumerate() {
        let ln = i + 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.is_empty() {
            continue;
        }
        if tok.len() < 2 {
            return Err(Error::Parse {
                line: ln,
                msg: "expected `<id> <features...> <label>`".into(),
            });
        }
        let feats = &tok[1..tok.len() - 1];
        match width {
            None => width = Some(feats.len()),
            Some(w) if w != feats.len() => {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("{} features, expected {w}", feats.len()),
                })
            }
            Some(_) => {}
        }
        for f in feats {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: ln,
                msg: format!("`{f}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("non-finite feature `{f}`"),
                });
            }
            values.push(v);
        }
        let id = tok[0].to_string();
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(Error::Parse {
                line: ln,
                msg: format!("duplicate node id {id}"),
            });
        }
        node_ids.push(id);
        labels.push(tok[tok.len() - 1].to_string());
    }
    let n = node_ids.len();
    let features = FeatureMatrix::new(n, width.unwrap_or(0), values)?;

    let cites = std::str::from_utf8(cites).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("invalid UTF-8 at byte {}", e.valid_up_to()),
    })?;
    let mut stats = ParseStats::default();
    let mut pairs = Vec::new();
    for (i, line) in cites.lines().enumerate() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        if tok.is_empty() {
            continue;
        }
        if tok.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 2 ids, found {} tokens", tok.len()),
            });
        }
        match (index.get(tok[0]), index.get(tok[1])) {
            (Some(&u), Some(&v)) if u == v => stats.self_loops_dropped += 1,
            (Some(&u), Some(&v)) => pairs.push((u, v)),
            _ => stats.dangling_dropped += 1,
        }
    }
    let before = pairs.len();
    let mut seen = std::collections::HashSet::new();
    pairs.retain(|&(u, v)| seen.insert((u.min(v), u.max(v))));
    stats.duplicates_dropped = before - pairs.len();
    let graph = Graph::from_edges(&EdgeList::from_pairs(pairs)?, n)?;
    Ok(Dataset {
        graph,
        features: Some(features),
        node_ids,
        labels: Some(labels),
        split: None,
        stats,
    })
}

fn find_with_gz(dir: &Path, file: &str) -> Option<PathBuf> {
    [file.to_string(), format!("{file}.gz")]
        .into_iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
}

fn missing(dir: &Path, format: SourceFormat, expected: &str) -> Error {
    Error::Conversion(format!(
        "{} is not a {format} layout; expected {expected}",
        dir.display()
    ))
}

/// Loads a LINQS directory. Without `name`, the directory must contain exactly
/// one `*.content` (or `*.content.gz`) file.
pub fn load_linqs(dir: impl AsRef<Path>, name: Option<&str>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let expected = "<name>.content and <name>.cites (optionally .gz)";
    let name = match name {
        Some(n) => n.to_string(),
        None => {
            let entries = fs::read_dir(dir).map_err(|e| Error::Io(e).in_file(dir))?;
            let mut names: Vec<String> = entries
                .filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter_map(|f| {
                    f.strip_suffix(".content.gz")
                        .or_else(|| f.strip_suffix(".content"))
                        .map(str::to_string)
                })
                .collect();
            names.sort();
            names.dedup();
            match names.as_slice() {
                [one] => one.clone(),
                _ => return Err(missing(dir, SourceFormat::Linqs, expected)),
            }
        }
    };
    let content = find_with_gz(dir, &format!("{name}.content")).ok_or_else(|| missing(dir, SourceFormat::Linqs, expected))?;
    let cites = find_with_gz(dir, &format!("{name}.cites")).ok_or_else(|| missing(dir, SourceFormat::Linqs, expected))?;
    let content_bytes = read_bytes(&content)?;
    let cites_bytes = read_bytes(&cites)?;
    parse_linqs(&content_bytes, &cites_bytes).map_err(|e| e.in_file(dir))
}

/// Loads an edge-list file with optional features. Without `num_nodes` the
/// count comes from the feature rows, else from the largest id.
pub fn load_edgelist(edges: impl AsRef<Path>, features: Option<&Path>, num_nodes: Option<usize>) -> Result<Dataset> {
    let edges = edges.as_ref();
    let parsed = parse_edge_list(&read_bytes(edges)?).map_err(|e| e.in_file(edges))?;
    let feature_bytes = features.map(read_bytes).transpose()?;
    let n = match (num_nodes, &feature_bytes) {
        (Some(n), _) => n,
        (None, Some(b)) => b.split(|&c| c == b'\n').filter(|l| !l.iter().all(u8::is_ascii_whitespace)).count(),
        (None, None) => {
            let n = parsed.edges.max_node().map_or(0, |m| m + 1);
            if n > MAX_INFERRED_NODES {
                return Err(Error::Construction(format!("inferred node count {n} exceeds {MAX_INFERRED_NODES}")));
            }
            n
        }
    };
    let graph = Graph::from_edges(&parsed.edges, n).map_err(|e| e.in_file(edges))?;
    let features = match (features, feature_bytes) {
        (Some(p), Some(b)) => Some(load_node_features(&b, n).map_err(|e| e.in_file(p))?),
        _ => None,
    };
    Ok(Dataset {
        graph,
        features,
        node_ids: (0..n).map(|i| i.to_string()).collect(),
        labels: None,
        split: None,
        stats: ParseStats {
            self_loops_dropped: parsed.self_loops_dropped,
            duplicates_dropped: parsed.duplicates_dropped,
            dangling_dropped: 0,
        },
    })
}

const OGB_SPLIT_FILES: [&str; 5] = ["train.csv", "valid.csv", "valid_neg.csv", "test.csv", "test_neg.csv"];

/// Loads an OGB link-prediction dataset exported as CSV (see module docs).
pub fn load_ogb_csv(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let expected = "num-node-list.csv and edge.csv (optionally .gz), plus an optional split/ directory";
    let count_path = find_with_gz(dir, "num-node-list.csv").ok_or_else(|| missing(dir, SourceFormat::OgbCsv, expected))?;
    let edge_path = find_with_gz(dir, "edge.csv").ok_or_else(|| missing(dir, SourceFormat::OgbCsv, expected))?;
    let count_text = String::from_utf8(read_bytes(&count_path)?).map_err(|_| {
        Error::Parse {
            line: 1,
            msg: "invalid UTF-8".into(),
        }
        .in_file(&count_path)
    })?;
    let n: usize = count_text
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| {
            Error::Parse {
                line: 1,
                msg: "expected a node count".into(),
            }
            .in_file(&count_path)
        })?;
    if n > MAX_INFERRED_NODES {
        return Err(Error::Construction(format!("node count {n} exceeds {MAX_INFERRED_NODES}")).in_file(&count_path));
    }
    let parsed = parse_edge_list_with(&read_bytes(&edge_path)?, Some(',')).map_err(|e| e.in_file(&edge_path))?;
    let graph = Graph::from_edges(&parsed.edges, n).map_err(|e| e.in_file(&edge_path))?;

    let split_dir = dir.join("split");
    let split = if split_dir.is_dir() {
        let mut lists = Vec::new();
        for f in OGB_SPLIT_FILES {
            let p = find_with_gz(&split_dir, f)
                .ok_or_else(|| missing(&split_dir, SourceFormat::OgbCsv, "train/valid/valid_neg/test/test_neg .csv files"))?;
            lists.push(parse_edge_list_with(&read_bytes(&p)?, Some(',')).map_err(|e| e.in_file(&p))?.edges);
        }
        let mut it = lists.into_iter();
        let mut next = || it.next().expect("five split files");
        let train_pos = next();
        let (val_pos, val_neg, test_pos, test_neg) = (next(), next(), next(), next());
        let train_graph = Graph::from_edges(&train_pos, n).map_err(|e| e.in_file(&split_dir))?;
        Some(DataSplit {
            train_pos,
            val_pos,
            test_pos,
            val_neg,
            test_neg,
            train_graph,
            seed: None,
        })
    } else {
        None
    };
    Ok(Dataset {
        graph,
        features: None,
        node_ids: (0..n).map(|i| i.to_string()).collect(),
        labels: None,
        split,
        stats: ParseStats {
            self_loops_dropped: parsed.self_loops_dropped,
            duplicates_dropped: parsed.duplicates_dropped,
            dangling_dropped: 0,
        },
    })
}

/// Reads `source` laid out as `format`. For `edgelist`, `source` is the edge
/// file and a sibling `features.csv` is picked up when present.
pub fn load_source(format: SourceFormat, source: impl AsRef<Path>) -> Result<Dataset> {
    let source = source.as_ref();
    match format {
        SourceFormat::Linqs => load_linqs(source, None),
        SourceFormat::OgbCsv => load_ogb_csv(source),
        SourceFormat::EdgeList => {
            let feats = source.parent().map(|p| p.join("features.csv")).filter(|p| p.is_file());
            load_edgelist(source, feats.as_deref(), None)
        }
    }
}

pub const CANONICAL_EDGES: &str = "graph.edges";
pub const CANONICAL_FEATURES: &str = "features.csv";
pub const CANONICAL_NODE_IDS: &str = "node_ids.txt";
pub const CANONICAL_SPLIT_DIR: &str = "split";

/// Writes the canonical directory form of `ds`.
pub fn write_canonical(ds: &Dataset, out: impl AsRef<Path>) -> Result<()> {
    let out = out.as_ref();
    fs::create_dir_all(out).map_err(|e| Error::Io(e).in_file(out))?;
    let write = |name: &str, text: String| {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| Error::Io(e).in_file(&p))
    };
    write(CANONICAL_EDGES, ds.graph.edge_list().to_text())?;
    let mut ids = String::new();
    for id in &ds.node_ids {
        ids.push_str(id);
        ids.push('\n');
    }
    write(CANONICAL_NODE_IDS, ids)?;
    if let Some(f) = &ds.features {
        write(CANONICAL_FEATURES, f.to_csv())?;
    }
    if let Some(s) = &ds.split {
        write_split_bundle(s, out.join(CANONICAL_SPLIT_DIR))?;
    }
    Ok(())
}

/// Loads a directory written by [`write_canonical`].
pub fn load_canonical(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let ids_path = dir.join(CANONICAL_NODE_IDS);
    let ids_text = String::from_utf8(read_bytes(&ids_path)?).map_err(|_| {
        Error::Parse {
            line: 0,
            msg: "invalid UTF-8".into(),
        }
        .in_file(&ids_path)
    })?;
    let node_ids: Vec<String> = ids_text.lines().map(str::to_string).collect();
    let n = node_ids.len();
    let feats = dir.join(CANONICAL_FEATURES);
    let mut ds = load_edgelist(dir.join(CANONICAL_EDGES), feats.is_file().then_some(feats.as_path()), Some(n))?;
    ds.node_ids = node_ids;
    let split_dir = dir.join(CANONICAL_SPLIT_DIR);
    if split_dir.is_dir() {
        ds.split = Some(load_split_bundle(&split_dir, Some(n))?);
    }
    Ok(ds)
}

/// Loads any supported dataset location: a canonical directory, a LINQS or
/// OGB-CSV directory, or an edge-list file.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    if path.is_file() {
        return load_source(SourceFormat::EdgeList, path);
    }
    if !path.is_dir() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory")).in_file(path));
    }
    if path.join(CANONICAL_EDGES).is_file() && path.join(CANONICAL_NODE_IDS).is_file() {
        return load_canonical(path);
    }
    if find_with_gz(path, "edge.csv").is_some() {
        return load_ogb_csv(path);
    }
    load_linqs(path, None).map_err(|e| match e {
        Error::Conversion(_) => Error::Conversion(format!(
            "{} is not a recognized dataset: expected {CANONICAL_EDGES} + {CANONICAL_NODE_IDS}, \
             <name>.content + <name>.cites, or num-node-list.csv + edge.csv",
            path.display()
        )),
        other => other,
    })
}

/// Converts `source` to the canonical form in `out`.
pub fn convert_dataset(format: SourceFormat, source: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<Dataset> {
    let ds = load_source(format, source)?;
    write_canonical(&ds, out)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONTENT: &str = "p1\t1\t0\tA\np2\t0\t1\tB\np3\t1\t1\tA\n";
    const CITES: &str = "p1\tp2\np2\tp3\np3\tp1\np1\tp9\np2\tp1\np3\tp3\n";

    #[test]
    fn linqs_parses_ids_features_and_drops() {
        let ds = parse_linqs(CONTENT.as_bytes(), CITES.as_bytes()).unwrap();
        assert_eq!(ds.graph.num_nodes(), 3);
        assert_eq!(ds.graph.num_edges(), 3);
        assert_eq!(ds.node_ids, ["p1", "p2", "p3"]);
        assert_eq!(ds.labels.as_deref().unwrap(), ["A", "B", "A"]);
        assert_eq!(ds.features.as_ref().unwrap().row(2), &[1.0, 1.0]);
        assert_eq!(
            ds.stats,
            ParseStats {
                self_loops_dropped: 1,
                duplicates_dropped: 1,
                dangling_dropped: 1
            }
        );
    }

    #[test]
    fn linqs_rejects_malformed() {
        assert!(parse_linqs(b"p1 1 A\np2 1 0 B\n", b"").is_err());
        assert!(parse_linqs(b"p1 x A\n", b"").is_err());
        assert!(parse_linqs(b"p1 1 A\np1 0 A\n", b"").is_err());
        assert!(parse_linqs(b"p1 1 A\n", b"p1 p1 p1\n").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let content = "a 1 0 X\nb 0 1 X\nc 1 1 Y\nd 0 0 Y\ne 1 0 X\n";
        let cites = "a b\nb c\nc d\nd e\na c\n";
        let mut ds = parse_linqs(content.as_bytes(), cites.as_bytes()).unwrap();
        ds.split = Some(crate::graph::split_edges(&ds.graph, 0.0, 0.4, 1).unwrap());
        let dir = tempfile::tempdir().unwrap();
        write_canonical(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.graph, ds.graph);
        assert_eq!(back.features, ds.features);
        assert_eq!(back.node_ids, ds.node_ids);
        let (a, b) = (back.split.unwrap(), ds.split.unwrap());
        assert_eq!((a.train_pos, a.test_pos, a.test_neg), (b.train_pos, b.test_pos, b.test_neg));
    }

    #[test]
    fn ogb_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("num-node-list.csv"), "5\n").unwrap();
        fs::write(dir.path().join("edge.csv"), "0,1\n1,2\n2,3\n3,4\n").unwrap();
        let ds = load_ogb_csv(dir.path()).unwrap();
        assert_eq!((ds.graph.num_nodes(), ds.graph.num_edges()), (5, 4));
        assert!(ds.split.is_none());
        let split = dir.path().join("split");
        fs::create_dir(&split).unwrap();
        for (f, t) in OGB_SPLIT_FILES.iter().zip(["0,1\n1,2\n", "2,3\n", "0,4\n", "3,4\n", "0,2\n"]) {
            fs::write(split.join(f), t).unwrap();
        }
        let ds = load_dataset(dir.path()).unwrap();
        let s = ds.split.unwrap();
        assert_eq!(s.train_graph.num_edges(), 2);
        assert_eq!(s.test_neg.pairs(), &[(0, 2)]);
    }

    #[test]
    fn unrecognized_layout_lists_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains(".content") && err.contains("edge.csv"), "{err}");
        let err = load_ogb_csv(dir.path()).unwrap_err().to_string();
        assert!(err.contains("num-node-list.csv"), "{err}");
    }
}
