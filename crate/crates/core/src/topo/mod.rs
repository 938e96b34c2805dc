//! Node centralities, pairwise similarity indices, and the parameterised
//! topological score that blends them into per-node and per-edge features.

mod centrality;
mod score;
mod similarity;

pub use centrality::{
    betweenness_centrality, betweenness_centrality_sampled, degree_centrality,
    eigenvector_centrality, eigenvector_centrality_detailed, EigenvectorResult,
    APPROX_BETWEENNESS_NODE_LIMIT, DEFAULT_EIGEN_MAX_ITER, DEFAULT_EIGEN_TOL,
};
pub use score::{minmax_normalize, topo_score, TopoComponents, TopoScore};
pub use similarity::{adamic_adar, jaccard, resource_allocation, similarity};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityKind {
    Degree,
    Eigenvector,
    Betweenness,
}

impl CentralityKind {
    pub const ALL: [CentralityKind; 3] = [Self::Degree, Self::Eigenvector, Self::Betweenness];

    /// Two-letter abbreviation used in tables (`DC`, `EC`, `BC`).
    pub fn abbrev(self) -> &'static str {
        match self {
            Self::Degree => "DC",
            Self::Eigenvector => "EC",
            Self::Betweenness => "BC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Jaccard,
    AdamicAdar,
    ResourceAllocation,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 3] = [Self::Jaccard, Self::AdamicAdar, Self::ResourceAllocation];

    /// Two-letter abbreviation used in tables (`JA`, `AA`, `RA`).
    pub fn abbrev(self) -> &'static str {
        match self {
            Self::Jaccard => "JA",
            Self::AdamicAdar => "AA",
            Self::ResourceAllocation => "RA",
        }
    }
}

impl fmt::Display for CentralityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for CentralityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "dc" | "degree" => Ok(Self::Degree),
            "ec" | "eigenvector" => Ok(Self::Eigenvector),
            "bc" | "betweenness" => Ok(Self::Betweenness),
            _ => Err(Error::Config(format!("unknown centrality `{s}` (dc, ec, bc)"))),
        }
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ja" | "jaccard" => Ok(Self::Jaccard),
            "aa" | "adamic_adar" => Ok(Self::AdamicAdar),
            "ra" | "resource_allocation" => Ok(Self::ResourceAllocation),
            _ => Err(Error::Config(format!("unknown similarity `{s}` (ja, aa, ra)"))),
        }
    }
}

/// One centrality value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeScores {
    pub kind: CentralityKind,
    pub values: Vec<f64>,
}

/// Centrality of the requested kind with default solver settings. Graphs above
/// [`APPROX_BETWEENNESS_NODE_LIMIT`] nodes fall back to pivot-sampled
/// betweenness.
pub fn centrality(g: &crate::graph::Graph, kind: CentralityKind) -> crate::Result<NodeScores> {
    match kind {
        CentralityKind::Degree => degree_centrality(g),
        CentralityKind::Eigenvector => eigenvector_centrality(g, DEFAULT_EIGEN_TOL, DEFAULT_EIGEN_MAX_ITER),
        CentralityKind::Betweenness if g.num_nodes() > APPROX_BETWEENNESS_NODE_LIMIT => {
            log::warn!(
                "{} nodes exceed {APPROX_BETWEENNESS_NODE_LIMIT}; using pivot-sampled betweenness",
                g.num_nodes()
            );
            Ok(betweenness_centrality_sampled(g, 1024, 0))
        }
        CentralityKind::Betweenness => Ok(betweenness_centrality(g)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_from_abbreviations() {
        assert_eq!("EC".parse::<CentralityKind>().unwrap(), CentralityKind::Eigenvector);
        assert_eq!("ra".parse::<SimilarityKind>().unwrap(), SimilarityKind::ResourceAllocation);
        assert_eq!("adamic-adar".parse::<SimilarityKind>().unwrap(), SimilarityKind::AdamicAdar);
        assert!("katz".parse::<CentralityKind>().is_err());
    }
}
