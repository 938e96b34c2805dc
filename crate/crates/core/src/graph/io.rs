use std::collections::HashSet;
use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::{canonical, DataSplit, EdgeList, FeatureMatrix, Graph};
use crate::error::{Error, Result};

/// Node counts are inferred from the largest id only below this bound.
pub const MAX_INFERRED_NODES: usize = 100_000_000;

/// Result of [`parse_edge_list`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedEdges {
    pub edges: EdgeList,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Parses the whitespace-separated edge-list format: one `u v` pair per line,
/// `#` comment lines, blank lines ignored. Self-loops and repeated undirected
/// pairs are dropped and counted.
pub fn parse_edge_list(text: &[u8]) -> Result<ParsedEdges> {
    parse_edge_list_with(text, None)
}

/// Like [`parse_edge_list`], but tokens are split on `delimiter` instead of
/// whitespace (e.g. `Some(',')` for CSV pair files).
pub fn parse_edge_list_with(text: &[u8], delimiter: Option<char>) -> Result<ParsedEdges> {
    let mut seen = HashSet::new();
    let mut pairs = Vec::new();
    let mut self_loops_dropped = 0;
    let mut duplicates_dropped = 0;

    for (idx, raw) in text.split(|&b| b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = std::str::from_utf8(raw).map_err(|_| Error::Parse {
            line: line_no,
            msg: "invalid UTF-8".into(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = match delimiter {
            Some(d) => line.split(d).map(str::trim).collect(),
            None => line.split_whitespace().collect(),
        };
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 2 node ids, found {} tokens", tokens.len()),
            });
        }
        let parse_id = |tok: &str| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("`{tok}` is not a non-negative integer"),
            })
        };
        let (u, v) = (parse_id(tokens[0])?, parse_id(tokens[1])?);
        if u == v {
            self_loops_dropped += 1;
            continue;
        }
        if !seen.insert(canonical(u, v)) {
            duplicates_dropped += 1;
            continue;
        }
        pairs.push((u, v));
    }

    Ok(ParsedEdges {
        edges: EdgeList::from_pairs_unchecked(pairs),
        self_loops_dropped,
        duplicates_dropped,
    })
}

/// Parses headerless comma-separated feature rows; row `i` is node `i`.
pub fn load_node_features(text: &[u8], num_nodes: usize) -> Result<FeatureMatrix> {
    let text = std::str::from_utf8(text)
        .map_err(|e| Error::Features(format!("invalid UTF-8 at byte {}", e.valid_up_to())))?;
    let mut cols = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let start = values.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            let v: f64 = tok.parse().map_err(|_| {
                Error::Features(format!("line {}: `{tok}` is not a number", idx + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Features(format!(
                    "line {}: non-finite value `{tok}`",
                    idx + 1
                )));
            }
            values.push(v);
        }
        let width = values.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Features(format!(
                    "line {}: ragged row with {width} values, expected {c}",
                    idx + 1
                )))
            }
            Some(_) => {}
        }
        rows += 1;
    }
    if rows != num_nodes {
        return Err(Error::Features(format!(
            "{rows} feature rows for a graph with {num_nodes} nodes"
        )));
    }
    FeatureMatrix::new(rows, cols.unwrap_or(0), values)
}

/// Reads a file, transparently decompressing gzip content.
pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let raw = fs::read(path).map_err(|e| Error::Io(e).in_file(path))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::Io(e).in_file(path))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// File names of a split bundle, in the order [`parse_split_bundle`] expects.
pub const BUNDLE_FILES: [&str; 5] = [
    "train.edges",
    "valid.edges",
    "valid_neg.edges",
    "test.edges",
    "test_neg.edges",
];

/// Loads a pre-made split bundle directory. When `num_nodes` is `None` it is
/// inferred as one past the largest id in any bundle file.
pub fn load_split_bundle(dir: impl AsRef<Path>, num_nodes: Option<usize>) -> Result<DataSplit> {
    let dir = dir.as_ref();
    let mut lists = Vec::with_capacity(BUNDLE_FILES.len());
    for name in BUNDLE_FILES {
        let path = dir.join(name);
        let parsed = parse_edge_list(&read_bytes(&path)?).map_err(|e| e.in_file(&path))?;
        lists.push(parsed.edges);
    }
    assemble_split(lists, num_nodes).map_err(|e| e.in_file(dir))
}

/// In-memory form of [`load_split_bundle`]: the five edge lists in
/// [`BUNDLE_FILES`] order.
pub fn parse_split_bundle(files: [&[u8]; 5], num_nodes: Option<usize>) -> Result<DataSplit> {
    let lists = files
        .iter()
        .map(|text| parse_edge_list(text).map(|p| p.edges))
        .collect::<Result<Vec<_>>>()?;
    assemble_split(lists, num_nodes)
}

fn assemble_split(lists: Vec<EdgeList>, num_nodes: Option<usize>) -> Result<DataSplit> {
    let n = match num_nodes {
        Some(n) => n,
        None => {
            let n = lists.iter().filter_map(EdgeList::max_node).max().map_or(0, |m| m.saturating_add(1));
            if n > MAX_INFERRED_NODES {
                return Err(Error::Construction(format!(
                    "inferred node count {n} exceeds {MAX_INFERRED_NODES}"
                )));
            }
            n
        }
    };
    let [train_pos, val_pos, val_neg, test_pos, test_neg]: [EdgeList; 5] =
        lists.try_into().expect("one list per bundle file");
    let train_graph = Graph::from_edges(&train_pos, n)?;
    Ok(DataSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg,
        test_neg,
        train_graph,
        seed: None,
    })
}

/// Writes `split` as a bundle directory readable by [`load_split_bundle`].
pub fn write_split_bundle(split: &DataSplit, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let lists = [
        &split.train_pos,
        &split.val_pos,
        &split.val_neg,
        &split.test_pos,
        &split.test_neg,
    ];
    for (name, list) in BUNDLE_FILES.iter().zip(lists) {
        fs::write(dir.join(name), list.to_text())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pairs_in_order() {
        let p = parse_edge_list(b"0 1\n1 2\n").unwrap();
        assert_eq!(p.edges.pairs(), &[(0, 1), (1, 2)]);
        assert_eq!((p.self_loops_dropped, p.duplicates_dropped), (0, 0));
    }

    #[test]
    fn drops_self_loops() {
        let p = parse_edge_list(b"0 0\n0 1\n").unwrap();
        assert_eq!(p.edges.pairs(), &[(0, 1)]);
        assert_eq!(p.self_loops_dropped, 1);
    }

    #[test]
    fn drops_reversed_duplicates() {
        let p = parse_edge_list(b"0 1\n1 0\n").unwrap();
        assert_eq!(p.edges.pairs(), &[(0, 1)]);
        assert_eq!(p.duplicates_dropped, 1);
    }

    #[test]
    fn comments_blank_lines_and_crlf() {
        let p = parse_edge_list(b"# header\n\n3\t4\r\n  # indented comment\n").unwrap();
        assert_eq!(p.edges.pairs(), &[(3, 4)]);
    }

    #[test]
    fn malformed_lines_name_the_line() {
        match parse_edge_list(b"0 1\n1 2 3\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_edge_list(b"0 1\n\nx 2\n") {
            Err(Error::Parse { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_edge_list(b"-1 2\n").is_err());
    }

    #[test]
    fn csv_pairs() {
        let p = parse_edge_list_with(b"0,1\n2, 3\n", Some(',')).unwrap();
        assert_eq!(p.edges.pairs(), &[(0, 1), (2, 3)]);
    }

    #[test]
    fn features_identity() {
        let f = load_node_features(b"1,0\n0,1\n", 2).unwrap();
        assert_eq!((f.rows(), f.cols()), (2, 2));
        assert_eq!(f.values(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn features_row_count_mismatch() {
        assert!(matches!(
            load_node_features(b"1\n2\n3\n", 4),
            Err(Error::Features(_))
        ));
    }

    #[test]
    fn features_ragged_and_non_numeric() {
        let err = load_node_features(b"1,2\n3\n", 2).unwrap_err();
        assert!(err.to_string().contains("ragged"), "{err}");
        assert!(load_node_features(b"1,a\n", 1).is_err());
        assert!(load_node_features(b"1,NaN\n", 1).is_err());
    }

    #[test]
    fn gzip_is_transparent() {
        use flate2::{write::GzEncoder, Compression};
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.edges.gz");
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(b"0 1\n").unwrap();
        fs::write(&path, enc.finish().unwrap()).unwrap();
        assert_eq!(read_bytes(&path).unwrap(), b"0 1\n");
    }
}
