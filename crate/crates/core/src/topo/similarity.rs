use super::SimilarityKind;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// `|N_u ∩ N_v| / |N_u ∪ N_v|`, or 0 when both neighborhoods are empty.
pub fn jaccard(g: &Graph, u: NodeId, v: NodeId) -> f64 {
    let inter = g.common_neighbors(u, v).count();
    let union = g.degree(u) + g.degree(v) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Sum of `1 / ln|N_w|` over common neighbors `w`.
///
/// A common neighbor of degree 1 would divide by `ln 1 = 0`; it can only occur
/// when `u == v`, and is reported as a domain error.
pub fn adamic_adar(g: &Graph, u: NodeId, v: NodeId) -> Result<f64> {
    let mut total = 0.0;
    for w in g.common_neighbors(u, v) {
        let d = g.degree(w);
        if d < 2 {
            return Err(Error::Domain(format!(
                "Adamic-Adar: common neighbor {w} of ({u}, {v}) has degree {d}"
            )));
        }
        total += 1.0 / (d as f64).ln();
    }
    Ok(total)
}

/// Sum of `1 / |N_w|` over common neighbors `w`.
pub fn resource_allocation(g: &Graph, u: NodeId, v: NodeId) -> f64 {
    g.common_neighbors(u, v)
        .map(|w| 1.0 / g.degree(w) as f64)
        .sum()
}

pub fn similarity(g: &Graph, kind: SimilarityKind, u: NodeId, v: NodeId) -> Result<f64> {
    match kind {
        SimilarityKind::Jaccard => Ok(jaccard(g, u, v)),
        SimilarityKind::AdamicAdar => adamic_adar(g, u, v),
        SimilarityKind::ResourceAllocation => Ok(resource_allocation(g, u, v)),
    }
}
