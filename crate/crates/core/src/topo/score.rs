use rayon::prelude::*;

use super::{centrality, similarity, CentralityKind, SimilarityKind};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// `(v - min) / (max - min)` elementwise; all zeros when the range is empty.
pub fn minmax_normalize(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain("min-max normalization of an empty vector".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain("min-max normalization of non-finite values".into()));
    }
    let range = hi - lo;
    if range == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / range).collect())
}

/// Normalized centrality per node and normalized similarity per directed
/// train-graph edge, before blending with `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoComponents {
    pub centrality_kind: CentralityKind,
    pub similarity_kind: SimilarityKind,
    /// Min-max normalized centrality, one entry per node.
    pub centrality: Vec<f64>,
    /// Min-max normalized similarity, one entry per adjacency slot.
    pub similarity: Vec<f64>,
    fingerprint: u64,
}

impl TopoComponents {
    pub fn compute(g: &Graph, centrality_kind: CentralityKind, similarity_kind: SimilarityKind) -> Result<Self> {
        let raw_c = centrality(g, centrality_kind)?.values;
        let per_node: Vec<Vec<f64>> = (0..g.num_nodes())
            .into_par_iter()
            .map(|u| {
                g.neighbors(u)
                    .iter()
                    .map(|&v| similarity(g, similarity_kind, u, v))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let raw_s: Vec<f64> = per_node.into_iter().flatten().collect();
        let centrality = if raw_c.is_empty() { raw_c } else { minmax_normalize(&raw_c)? };
        let similarity = if raw_s.is_empty() { raw_s } else { minmax_normalize(&raw_s)? };
        Ok(Self {
            centrality_kind,
            similarity_kind,
            centrality,
            similarity,
            fingerprint: g.fingerprint(),
        })
    }

    /// Blends the components: `S(u->v) = alpha * C(u) + (1 - alpha) * s(u, v)`
    /// per edge and `S(v) = alpha * C(v) + (1 - alpha) * mean_w s(v, w)` per
    /// node (similarity term 0 for isolated nodes).
    pub fn combine(&self, g: &Graph, alpha: f64) -> Result<TopoScore> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("alpha {alpha} outside [0, 1]")));
        }
        if g.fingerprint() != self.fingerprint {
            return Err(Error::Alignment("components were computed on a different graph".into()));
        }
        let beta = 1.0 - alpha;
        let mut edge_score = Vec::with_capacity(g.num_slots());
        let mut node_score = Vec::with_capacity(g.num_nodes());
        for u in 0..g.num_nodes() {
            let range = g.slot_range(u);
            let sims = &self.similarity[range.clone()];
            let c = self.centrality[u];
            edge_score.extend(sims.iter().map(|s| alpha * c + beta * s));
            let mean_sim = if sims.is_empty() {
                0.0
            } else {
                sims.iter().sum::<f64>() / sims.len() as f64
            };
            node_score.push(alpha * c + beta * mean_sim);
        }
        Ok(TopoScore {
            alpha,
            centrality_kind: self.centrality_kind,
            similarity_kind: self.similarity_kind,
            node_score,
            edge_score,
            fingerprint: self.fingerprint,
        })
    }
}

/// Parameterised topological score on a (training) graph.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoScore {
    pub alpha: f64,
    pub centrality_kind: CentralityKind,
    pub similarity_kind: SimilarityKind,
    /// `S(v)`, one per node.
    pub node_score: Vec<f64>,
    /// `S(u->v)`, aligned with the slots of the graph's neighbor array.
    pub edge_score: Vec<f64>,
    fingerprint: u64,
}

impl TopoScore {
    pub fn belongs_to(&self, g: &Graph) -> bool {
        self.fingerprint == g.fingerprint()
    }

    /// Scores of incoming messages: entry `k`, for slot `v -> u`, holds
    /// `S(u->v)`.
    pub fn incoming_edge_scores(&self, g: &Graph) -> Result<Vec<f64>> {
        if !self.belongs_to(g) {
            return Err(Error::Alignment("topological score computed on a different graph".into()));
        }
        Ok(g.reverse_slots().into_iter().map(|r| self.edge_score[r]).collect())
    }

    /// `node,score` lines.
    pub fn node_csv(&self) -> String {
        let mut out = String::from("node,score\n");
        for (v, s) in self.node_score.iter().enumerate() {
            out.push_str(&format!("{v},{s}\n"));
        }
        out
    }

    /// `src,dst,score` lines, one per directed edge.
    pub fn edge_csv(&self, g: &Graph) -> String {
        let mut out = String::from("src,dst,score\n");
        for u in 0..g.num_nodes() {
            for k in g.slot_range(u) {
                out.push_str(&format!("{u},{},{}\n", g.neighbor_array()[k], self.edge_score[k]));
            }
        }
        out
    }
}

/// Computes the normalized components on `g` and blends them with `alpha`.
/// `g` must be the training graph; held-out pairs never receive features.
pub fn topo_score(
    g: &Graph,
    centrality_kind: CentralityKind,
    similarity_kind: SimilarityKind,
    alpha: f64,
) -> Result<TopoScore> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} outside [0, 1]")));
    }
    TopoComponents::compute(g, centrality_kind, similarity_kind)?.combine(g, alpha)
}
