use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{canonical, EdgeList, Graph, NodeId};
use crate::error::{Error, Result};

/// Above this edge density, negatives come from explicit non-edge enumeration
/// instead of rejection sampling.
pub const DENSE_SAMPLING_THRESHOLD: f64 = 0.9;

/// Enumeration is also used when most remaining non-edges are requested, as
/// long as the pair space stays below this size.
const ENUMERATION_PAIR_LIMIT: u64 = 1 << 24;

const NEGATIVE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Positive edges partitioned into train/validation/test plus matched negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train_pos: EdgeList,
    pub val_pos: EdgeList,
    pub test_pos: EdgeList,
    pub val_neg: EdgeList,
    pub test_neg: EdgeList,
    /// Graph over all nodes holding exactly the training positives.
    pub train_graph: Graph,
    /// Seed used by [`split_edges`]; `None` for loaded bundles.
    pub seed: Option<u64>,
}

impl DataSplit {
    pub fn num_nodes(&self) -> usize {
        self.train_graph.num_nodes()
    }

    /// Checks the split invariants against the graph it was drawn from.
    pub fn validate(&self, original: &Graph) -> Result<()> {
        let fail = |msg: String| Err(Error::Split(msg));
        let train = self.train_pos.canonical_set();
        let val = self.val_pos.canonical_set();
        let test = self.test_pos.canonical_set();
        if !train.is_disjoint(&val) || !train.is_disjoint(&test) || !val.is_disjoint(&test) {
            return fail("positive sets overlap".into());
        }
        if train.len() + val.len() + test.len() != original.num_edges() {
            return fail("positive sets do not partition the edge set".into());
        }
        for &(u, v) in train.iter().chain(&val).chain(&test) {
            if !original.has_edge(u, v) {
                return fail(format!("positive ({u}, {v}) is not an edge"));
            }
        }
        let vn = self.val_neg.canonical_set();
        let tn = self.test_neg.canonical_set();
        if vn.len() != self.val_neg.len() || tn.len() != self.test_neg.len() {
            return fail("duplicate negative pair".into());
        }
        if !vn.is_disjoint(&tn) {
            return fail("negative sets overlap".into());
        }
        if let Some(&(u, v)) = vn.iter().chain(&tn).find(|&&(u, v)| original.has_edge(u, v)) {
            return fail(format!("negative ({u}, {v}) is an edge"));
        }
        if self.val_neg.len() != self.val_pos.len() || self.test_neg.len() != self.test_pos.len() {
            return fail("negative counts do not match positive counts".into());
        }
        if self.train_graph.num_edges() != train.len()
            || train.iter().any(|&(u, v)| !self.train_graph.has_edge(u, v))
        {
            return fail("train graph does not match the training positives".into());
        }
        Ok(())
    }
}

fn split_count(frac: f64, total: usize) -> usize {
    // The epsilon absorbs products like 0.29 * 100 = 28.999999999999996.
    (frac * total as f64 + 1e-9).floor() as usize
}

/// Seeded uniform partition of the edges of `g`. Validation and test receive
/// `floor(frac * |E|)` edges each; the remainder trains. Validation/test
/// negatives are disjoint non-edges of `g`.
pub fn split_edges(g: &Graph, val_frac: f64, test_frac: f64, seed: u64) -> Result<DataSplit> {
    let valid = |f: f64| (0.0..1.0).contains(&f);
    if !valid(val_frac) || !valid(test_frac) || val_frac + test_frac >= 1.0 {
        return Err(Error::Split(format!(
            "fractions must lie in [0, 1) and sum below 1 (got {val_frac} + {test_frac})"
        )));
    }
    if g.num_edges() == 0 {
        return Err(Error::Split("graph has no edges".into()));
    }

    let mut edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    edges.shuffle(&mut rng);

    let n_val = split_count(val_frac, edges.len());
    let n_test = split_count(test_frac, edges.len());
    let val_pos = EdgeList::from_pairs_unchecked(edges[..n_val].to_vec());
    let test_pos = EdgeList::from_pairs_unchecked(edges[n_val..n_val + n_test].to_vec());
    let train_pos = EdgeList::from_pairs_unchecked(edges[n_val + n_test..].to_vec());

    let negatives = sample_negatives(g, n_val + n_test, seed ^ NEGATIVE_SEED_SALT, &EdgeList::new())?;
    let (vn, tn) = negatives.pairs().split_at(n_val);
    let train_graph = Graph::from_edges(&train_pos, g.num_nodes())?;

    Ok(DataSplit {
        train_pos,
        val_pos,
        test_pos,
        val_neg: EdgeList::from_pairs_unchecked(vn.to_vec()),
        test_neg: EdgeList::from_pairs_unchecked(tn.to_vec()),
        train_graph,
        seed: Some(seed),
    })
}

/// Draws `count` distinct unordered non-edges of `g`, uniformly, avoiding every
/// pair in `exclude`. Pairs are returned as `(u, v)` with `u < v`.
pub fn sample_negatives(g: &Graph, count: usize, seed: u64, exclude: &EdgeList) -> Result<EdgeList> {
    let n = g.num_nodes() as u64;
    let total_pairs = n * n.saturating_sub(1) / 2;
    let non_edges = total_pairs - g.num_edges() as u64;
    let excluded: HashSet<(NodeId, NodeId)> = exclude
        .iter()
        .filter(|&(u, v)| u != v && (u as u64) < n && (v as u64) < n && !g.has_edge(u, v))
        .map(|(u, v)| canonical(u, v))
        .collect();
    let available = non_edges - excluded.len() as u64;
    if count as u64 > available {
        return Err(Error::Sampling {
            requested: count,
            available: available as usize,
        });
    }
    if count == 0 {
        return Ok(EdgeList::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density = g.num_edges() as f64 / total_pairs as f64;
    let mostly_exhaustive = 2 * count as u64 > available && total_pairs <= ENUMERATION_PAIR_LIMIT;

    let pairs = if density > DENSE_SAMPLING_THRESHOLD || mostly_exhaustive {
        let mut pool: Vec<(NodeId, NodeId)> = Vec::with_capacity(available as usize);
        for u in 0..g.num_nodes() {
            let nbrs = g.neighbors(u);
            for v in u + 1..g.num_nodes() {
                if nbrs.binary_search(&v).is_err() && !excluded.contains(&(u, v)) {
                    pool.push((u, v));
                }
            }
        }
        let (chosen, _) = pool.partial_shuffle(&mut rng, count);
        chosen.to_vec()
    } else {
        let mut taken = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        let n = g.num_nodes();
        while out.len() < count {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u == v {
                continue;
            }
            let pair = canonical(u, v);
            if g.has_edge(u, v) || excluded.contains(&pair) || !taken.insert(pair) {
                continue;
            }
            out.push(pair);
        }
        out
    };
    Ok(EdgeList::from_pairs_unchecked(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(pairs: &[(usize, usize)], n: usize) -> Graph {
        Graph::from_edges(&EdgeList::from_pairs(pairs.to_vec()).unwrap(), n).unwrap()
    }

    fn ring(n: usize) -> Graph {
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        graph(&pairs, n)
    }

    #[test]
    fn complete_graph_has_no_negatives() {
        let g = graph(&[(0, 1), (1, 2), (0, 2)], 3);
        assert!(matches!(
            sample_negatives(&g, 1, 0, &EdgeList::new()),
            Err(Error::Sampling { requested: 1, available: 0 })
        ));
    }

    #[test]
    fn path_has_single_non_edge() {
        let g = graph(&[(0, 1), (1, 2)], 3);
        let neg = sample_negatives(&g, 1, 7, &EdgeList::new()).unwrap();
        assert_eq!(neg.pairs(), &[(0, 2)]);
    }

    #[test]
    fn empty_graph_exhaustive() {
        let g = Graph::empty(4);
        let neg = sample_negatives(&g, 6, 3, &EdgeList::new()).unwrap();
        let set = neg.canonical_set();
        assert_eq!(set.len(), 6);
        for u in 0..4 {
            for v in u + 1..4 {
                assert!(set.contains(&(u, v)));
            }
        }
    }

    #[test]
    fn exclusions_are_respected() {
        let g = Graph::empty(4);
        let exclude = EdgeList::from_pairs(vec![(1, 0), (2, 3)]).unwrap();
        let neg = sample_negatives(&g, 4, 1, &exclude).unwrap();
        let set = neg.canonical_set();
        assert!(!set.contains(&(0, 1)) && !set.contains(&(2, 3)));
        assert!(sample_negatives(&g, 5, 1, &exclude).is_err());
    }

    #[test]
    fn split_counts_follow_floor() {
        let g = ring(100);
        let s = split_edges(&g, 0.05, 0.10, 11).unwrap();
        assert_eq!((s.val_pos.len(), s.test_pos.len(), s.train_pos.len()), (5, 10, 85));
        assert_eq!((s.val_neg.len(), s.test_neg.len()), (5, 10));
        s.validate(&g).unwrap();
    }

    #[test]
    fn zero_fractions_keep_everything_in_train() {
        let g = ring(10);
        let s = split_edges(&g, 0.0, 0.0, 1).unwrap();
        assert_eq!(s.train_pos.len(), 10);
        assert!(s.val_pos.is_empty() && s.test_pos.is_empty());
        assert_eq!(s.train_graph, g);
    }

    #[test]
    fn split_is_deterministic() {
        let g = ring(60);
        assert_eq!(split_edges(&g, 0.1, 0.2, 5).unwrap(), split_edges(&g, 0.1, 0.2, 5).unwrap());
        assert_ne!(
            split_edges(&g, 0.1, 0.2, 5).unwrap().test_pos,
            split_edges(&g, 0.1, 0.2, 6).unwrap().test_pos
        );
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(split_edges(&Graph::empty(5), 0.1, 0.1, 0).is_err());
        assert!(split_edges(&ring(10), 0.5, 0.5, 0).is_err());
        assert!(split_edges(&ring(10), -0.1, 0.1, 0).is_err());
    }

    #[test]
    fn dense_graph_uses_enumeration() {
        // K6 minus one edge: density 14/15 > 0.9.
        let mut pairs = Vec::new();
        for u in 0..6 {
            for v in u + 1..6 {
                if (u, v) != (2, 4) {
                    pairs.push((u, v));
                }
            }
        }
        let g = graph(&pairs, 6);
        let neg = sample_negatives(&g, 1, 0, &EdgeList::new()).unwrap();
        assert_eq!(neg.pairs(), &[(2, 4)]);
    }
}
