//! Undirected simple graphs in compressed sparse row form, node features, and
//! train/validation/test edge splits.

mod io;
mod split;

pub use io::{
    load_node_features, load_split_bundle, parse_edge_list, parse_edge_list_with, parse_split_bundle,
    read_bytes, write_split_bundle, ParsedEdges, BUNDLE_FILES, MAX_INFERRED_NODES,
};
pub use split::{sample_negatives, split_edges, DataSplit, DENSE_SAMPLING_THRESHOLD};

use std::collections::HashSet;
use std::ops::Range;

use crate::error::{Error, Result};

/// Node identifier, 0-based.
pub type NodeId = usize;

/// An ordered list of node pairs. Pairs never contain a self-loop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeList {
    pairs: Vec<(NodeId, NodeId)>,
}

impl EdgeList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an edge list, rejecting self-loops.
    pub fn from_pairs(pairs: Vec<(NodeId, NodeId)>) -> Result<Self> {
        if let Some(&(u, _)) = pairs.iter().find(|(u, v)| u == v) {
            return Err(Error::Construction(format!("self-loop on node {u}")));
        }
        Ok(Self { pairs })
    }

    pub(crate) fn from_pairs_unchecked(pairs: Vec<(NodeId, NodeId)>) -> Self {
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.pairs.iter().copied()
    }

    /// Largest node id mentioned, if any.
    pub fn max_node(&self) -> Option<NodeId> {
        self.pairs.iter().map(|&(u, v)| u.max(v)).max()
    }

    /// Set of unordered pairs, normalized so that the smaller id comes first.
    pub fn canonical_set(&self) -> HashSet<(NodeId, NodeId)> {
        self.pairs.iter().map(|&(u, v)| canonical(u, v)).collect()
    }

    /// Serializes in the edge-list file format (`u v` per line).
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.pairs.len() * 12);
        for &(u, v) in &self.pairs {
            out.push_str(&u.to_string());
            out.push(' ');
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

impl FromIterator<(NodeId, NodeId)> for EdgeList {
    /// Collects pairs, silently skipping self-loops.
    fn from_iter<I: IntoIterator<Item = (NodeId, NodeId)>>(iter: I) -> Self {
        Self {
            pairs: iter.into_iter().filter(|(u, v)| u != v).collect(),
        }
    }
}

#[inline]
pub(crate) fn canonical(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Immutable undirected simple graph.
///
/// Neighbor lists are strictly ascending and symmetric. Every undirected edge
/// occupies two *slots* in the flat neighbor array, one per direction; slot `k`
/// inside the range of node `u` denotes the directed edge `u -> neighbors[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate undirected pairs collapse to
    /// one edge; ids must be below `num_nodes`.
    pub fn from_edges(edges: &EdgeList, num_nodes: usize) -> Result<Self> {
        let mut degree = vec![0usize; num_nodes];
        for (u, v) in edges.iter() {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Construction(format!(
                    "edge ({u}, {v}) references a node outside 0..{num_nodes}"
                )));
            }
            if u == v {
                return Err(Error::Construction(format!("self-loop on node {u}")));
            }
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0; *offsets.last().unwrap()];
        for (u, v) in edges.iter() {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }

        // Sort and dedupe each list, then compact.
        let mut compact = Vec::with_capacity(neighbors.len());
        let mut new_offsets = Vec::with_capacity(num_nodes + 1);
        new_offsets.push(0);
        for u in 0..num_nodes {
            let list = &mut neighbors[offsets[u]..offsets[u + 1]];
            list.sort_unstable();
            let mut last = None;
            for &w in list.iter() {
                if last != Some(w) {
                    compact.push(w);
                    last = Some(w);
                }
            }
            new_offsets.push(compact.len());
        }
        let num_edges = compact.len() / 2;
        Ok(Self {
            offsets: new_offsets,
            neighbors: compact,
            num_edges,
        })
    }

    /// Graph with `num_nodes` nodes and no edges.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
            num_edges: 0,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Number of directed adjacency slots, `2 * num_edges`.
    pub fn num_slots(&self) -> usize {
        self.neighbors.len()
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|u| self.degree(u)).collect()
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.neighbors[self.slot_range(u)]
    }

    /// Slots holding the out-edges of `u`.
    pub fn slot_range(&self, u: NodeId) -> Range<usize> {
        self.offsets[u]..self.offsets[u + 1]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn neighbor_array(&self) -> &[NodeId] {
        &self.neighbors
    }

    /// Slot index of the directed edge `u -> v`, if present.
    pub fn slot(&self, u: NodeId, v: NodeId) -> Option<usize> {
        if u >= self.num_nodes() {
            return None;
        }
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|i| self.offsets[u] + i)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.slot(u, v).is_some()
    }

    /// For each slot `u -> v`, the slot of the reverse edge `v -> u`.
    pub fn reverse_slots(&self) -> Vec<usize> {
        let mut rev = vec![0; self.num_slots()];
        for u in 0..self.num_nodes() {
            for k in self.slot_range(u) {
                let v = self.neighbors[k];
                rev[k] = self.slot(v, u).expect("adjacency is symmetric");
            }
        }
        rev
    }

    /// Source node of every slot.
    pub fn slot_sources(&self) -> Vec<NodeId> {
        let mut src = Vec::with_capacity(self.num_slots());
        for u in 0..self.num_nodes() {
            src.extend(std::iter::repeat_n(u, self.degree(u)));
        }
        src
    }

    /// Each undirected edge once as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.num_nodes()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn edge_list(&self) -> EdgeList {
        EdgeList::from_pairs_unchecked(self.edges().collect())
    }

    /// FNV-1a hash of the adjacency structure, used to check that derived
    /// per-slot data belongs to this graph.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &x in self.offsets.iter().chain(&self.neighbors) {
            for b in (x as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }

    /// Sorted intersection of the neighbor lists of `u` and `v`.
    pub fn common_neighbors(&self, u: NodeId, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        SortedIntersection {
            a: self.neighbors(u),
            b: self.neighbors(v),
        }
    }
}

struct SortedIntersection<'a> {
    a: &'a [NodeId],
    b: &'a [NodeId],
}

impl Iterator for SortedIntersection<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        while let (Some(&x), Some(&y)) = (self.a.first(), self.b.first()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => self.a = &self.a[1..],
                std::cmp::Ordering::Greater => self.b = &self.b[1..],
                std::cmp::Ordering::Equal => {
                    self.a = &self.a[1..];
                    self.b = &self.b[1..];
                    return Some(x);
                }
            }
        }
        None
    }
}

/// Dense row-major node feature matrix; row `i` belongs to node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Features(format!(
                "{} values do not fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Features("non-finite feature value".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn el(pairs: &[(usize, usize)]) -> EdgeList {
        EdgeList::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn path_graph_degrees() {
        let g = Graph::from_edges(&el(&[(0, 1), (1, 2)]), 3).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn triangle_degrees() {
        let g = Graph::from_edges(&el(&[(0, 1), (1, 2), (0, 2)]), 3).unwrap();
        assert_eq!(g.degrees(), vec![2, 2, 2]);
        assert!(g.has_edge(2, 0));
    }

    #[test]
    fn empty_graph() {
        let g = Graph::from_edges(&EdgeList::new(), 4).unwrap();
        assert_eq!(g.degrees(), vec![0, 0, 0, 0]);
        assert_eq!(g, Graph::empty(4));
    }

    #[test]
    fn out_of_range_is_an_error() {
        let err = Graph::from_edges(&el(&[(0, 5)]), 3).unwrap_err();
        assert!(matches!(err, Error::Construction(_)));
    }

    #[test]
    fn duplicate_pairs_collapse() {
        let g = Graph::from_edges(&el(&[(0, 1), (1, 0), (0, 1)]), 2).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn reverse_slots_are_involutive() {
        let g = Graph::from_edges(&el(&[(0, 1), (1, 2), (0, 2), (2, 3)]), 4).unwrap();
        let rev = g.reverse_slots();
        let src = g.slot_sources();
        for k in 0..g.num_slots() {
            assert_eq!(rev[rev[k]], k);
            assert_eq!(src[rev[k]], g.neighbor_array()[k]);
        }
    }

    #[test]
    fn common_neighbors_of_square() {
        let g = Graph::from_edges(&el(&[(0, 1), (1, 2), (2, 3), (3, 0)]), 4).unwrap();
        assert_eq!(g.common_neighbors(0, 2).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(g.common_neighbors(0, 1).count(), 0);
    }
}
