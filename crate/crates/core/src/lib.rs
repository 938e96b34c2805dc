//! Link prediction with GraphSAGE encoders whose aggregation is parameterised
//! by node centrality and pairwise similarity scores.

pub mod autodiff;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod sage;
pub mod topo;
pub mod train;

pub use error::{Error, Result};
