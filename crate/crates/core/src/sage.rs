//! GraphSAGE mean-aggregation layers, with and without topological edge
//! features, stacked into an encoder.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Checkpoint, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::topo::TopoScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    BaselineSage,
    NcsmSage,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BaselineSage => "baseline_sage",
            Self::NcsmSage => "ncsm_sage",
        })
    }
}

impl FromStr for LayerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline_sage" | "baseline" | "sage" => Ok(Self::BaselineSage),
            "ncsm_sage" | "ncsm" => Ok(Self::NcsmSage),
            _ => Err(Error::Config(format!("unknown layer kind {s:?}"))),
        }
    }
}

/// Weights of one layer. Matrices are stored input-major (`d_in x d_out`),
/// so a layer computes `H W` on row-stacked node states.
#[derive(Debug, Clone, PartialEq)]
pub struct SageLayerParams {
    pub w_self: Tensor,
    pub w_neigh: Tensor,
    /// `1 x d_in` projection of the scalar score; NCSM layers only.
    pub w_edge: Option<Tensor>,
    pub bias: Tensor,
}

impl SageLayerParams {
    /// Glorot-uniform weights and zero bias.
    pub fn glorot<R: Rng>(d_in: usize, d_out: usize, kind: LayerKind, rng: &mut R) -> Self {
        let w_self = Tensor::glorot(d_in, d_out, rng);
        let w_neigh = Tensor::glorot(d_in, d_out, rng);
        let w_edge = (kind == LayerKind::NcsmSage).then(|| Tensor::glorot(1, d_in, rng));
        Self {
            w_self,
            w_neigh,
            w_edge,
            bias: Tensor::zeros(1, d_out),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize, kind: LayerKind) -> Self {
        Self {
            w_self: Tensor::zeros(d_in, d_out),
            w_neigh: Tensor::zeros(d_in, d_out),
            w_edge: (kind == LayerKind::NcsmSage).then(|| Tensor::zeros(1, d_in)),
            bias: Tensor::zeros(1, d_out),
        }
    }

    pub fn d_in(&self) -> usize {
        self.w_self.rows()
    }

    pub fn d_out(&self) -> usize {
        self.w_self.cols()
    }

    pub fn kind(&self) -> LayerKind {
        if self.w_edge.is_some() {
            LayerKind::NcsmSage
        } else {
            LayerKind::BaselineSage
        }
    }

    fn validate(&self) -> Result<()> {
        let (d_in, d_out) = self.w_self.shape();
        if self.w_neigh.shape() != (d_in, d_out) {
            return Err(Error::shape("sage layer", self.w_self.shape(), self.w_neigh.shape()));
        }
        if self.bias.shape() != (1, d_out) {
            return Err(Error::shape("sage layer", self.bias.shape(), (1, d_out)));
        }
        if let Some(w) = &self.w_edge {
            if w.shape() != (1, d_in) {
                return Err(Error::shape("sage layer", w.shape(), (1, d_in)));
            }
        }
        Ok(())
    }

    fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.w_self, &self.w_neigh];
        out.extend(self.w_edge.as_ref());
        out.push(&self.bias);
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.w_self, &mut self.w_neigh];
        out.extend(self.w_edge.as_mut());
        out.push(&mut self.bias);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub layer_kind: LayerKind,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden_dim: 256,
            layer_kind: LayerKind::NcsmSage,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::Config("num_layers must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<SageLayerParams>,
}

impl EncoderParams {
    pub fn glorot<R: Rng>(cfg: &EncoderConfig, d_in: usize, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        let mut width = d_in;
        for _ in 0..cfg.num_layers {
            layers.push(SageLayerParams::glorot(width, cfg.hidden_dim, cfg.layer_kind, rng));
            width = cfg.hidden_dim;
        }
        Ok(Self { layers })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(SageLayerParams::tensors).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(SageLayerParams::tensors_mut).collect()
    }

    pub fn write_checkpoint(&self, prefix: &str, ckpt: &mut Checkpoint) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            ckpt.push(format!("{prefix}layer{i}.w_self"), l.w_self.clone())?;
            ckpt.push(format!("{prefix}layer{i}.w_neigh"), l.w_neigh.clone())?;
            if let Some(w) = &l.w_edge {
                ckpt.push(format!("{prefix}layer{i}.w_edge"), w.clone())?;
            }
            ckpt.push(format!("{prefix}layer{i}.bias"), l.bias.clone())?;
        }
        Ok(())
    }

    /// Reads parameters laid out by `cfg` with input width `d_in`.
    pub fn read_checkpoint(prefix: &str, ckpt: &Checkpoint, cfg: &EncoderConfig, d_in: usize) -> Result<Self> {
        cfg.validate()?;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        let mut width = d_in;
        let d = cfg.hidden_dim;
        for i in 0..cfg.num_layers {
            let w_edge = match cfg.layer_kind {
                LayerKind::NcsmSage => Some(ckpt.expect(&format!("{prefix}layer{i}.w_edge"), (1, width))?.clone()),
                LayerKind::BaselineSage => None,
            };
            layers.push(SageLayerParams {
                w_self: ckpt.expect(&format!("{prefix}layer{i}.w_self"), (width, d))?.clone(),
                w_neigh: ckpt.expect(&format!("{prefix}layer{i}.w_neigh"), (width, d))?.clone(),
                w_edge,
                bias: ckpt.expect(&format!("{prefix}layer{i}.bias"), (1, d))?.clone(),
            });
            width = d;
        }
        Ok(Self { layers })
    }
}

/// Graph-side inputs shared by every layer of one forward pass.
pub struct SageContext {
    graph: Arc<Graph>,
    /// `n x 1` column of node scores.
    node_score: Option<Var>,
    incoming: Option<Arc<[f64]>>,
}

impl SageContext {
    /// Context for baseline layers.
    pub fn baseline(graph: Arc<Graph>) -> Self {
        Self {
            graph,
            node_score: None,
            incoming: None,
        }
    }

    /// Context carrying the scores of `s`, which must have been computed on
    /// `graph`.
    pub fn with_scores(tape: &mut Tape, graph: Arc<Graph>, s: &TopoScore) -> Result<Self> {
        let incoming: Arc<[f64]> = s.incoming_edge_scores(&graph)?.into();
        let node_score = tape.constant(Tensor::column(s.node_score.clone()));
        Ok(Self {
            graph,
            node_score: Some(node_score),
            incoming: Some(incoming),
        })
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }
}

/// Tape handles for one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub w_self: Var,
    pub w_neigh: Var,
    pub w_edge: Option<Var>,
    pub bias: Var,
}

impl LayerVars {
    pub fn register(tape: &mut Tape, p: &SageLayerParams) -> Self {
        Self {
            w_self: tape.param(p.w_self.clone()),
            w_neigh: tape.param(p.w_neigh.clone()),
            w_edge: p.w_edge.as_ref().map(|w| tape.param(w.clone())),
            bias: tape.param(p.bias.clone()),
        }
    }

    /// Handles in the same order as [`EncoderParams::tensors`].
    pub fn vars(&self) -> Vec<Var> {
        let mut out = vec![self.w_self, self.w_neigh];
        out.extend(self.w_edge);
        out.push(self.bias);
        out
    }
}

/// One layer on the tape. With `w_edge` present this is
/// `W1 (h_v + W3 S_v) + W2 mean_u (h_u + W3 S_{u->v}) + b`, otherwise
/// `W1 h_v + W2 mean_u h_u + b`; ReLU follows when `activate` is set.
///
/// The projections are applied before aggregation, which is exact by
/// linearity and keeps the aggregation at output width.
pub fn sage_layer(tape: &mut Tape, h: Var, ctx: &SageContext, p: &LayerVars, activate: bool) -> Result<Var> {
    let graph = &ctx.graph;
    if tape.shape(h).0 != graph.num_nodes() {
        return Err(Error::shape("sage_layer", tape.shape(h), (graph.num_nodes(), 0)));
    }
    let self_proj = tape.matmul(h, p.w_self)?;
    let neigh_proj = tape.matmul(h, p.w_neigh)?;
    let combined = match p.w_edge {
        None => {
            let agg = tape.neighbor_mean(neigh_proj, graph)?;
            tape.add(self_proj, agg)?
        }
        Some(w_edge) => {
            let (Some(node_score), Some(incoming)) = (ctx.node_score, &ctx.incoming) else {
                return Err(Error::Config("NCSM layer needs topological scores".into()));
            };
            let self_dir = tape.matmul(w_edge, p.w_self)?;
            let score_term = tape.matmul(node_score, self_dir)?;
            let self_term = tape.add(self_proj, score_term)?;
            let neigh_dir = tape.matmul(w_edge, p.w_neigh)?;
            let agg = tape.weighted_neighbor_mean(neigh_proj, graph, Arc::clone(incoming), neigh_dir)?;
            tape.add(self_term, agg)?
        }
    };
    let out = tape.add(combined, p.bias)?;
    Ok(if activate { tape.relu(out) } else { out })
}

/// Applies `layers` in order with ReLU between them and none after the last.
pub fn encode_on_tape(tape: &mut Tape, x: Var, ctx: &SageContext, layers: &[LayerVars]) -> Result<Var> {
    let mut h = x;
    for (i, l) in layers.iter().enumerate() {
        h = sage_layer(tape, h, ctx, l, i + 1 < layers.len())?;
    }
    Ok(h)
}

fn single_layer(h: &Tensor, ctx_of: impl FnOnce(&mut Tape) -> Result<SageContext>, p: &SageLayerParams, activate: bool) -> Result<Tensor> {
    p.validate()?;
    if h.cols() != p.d_in() {
        return Err(Error::shape("sage layer input", h.shape(), (h.rows(), p.d_in())));
    }
    let mut tape = Tape::new();
    let ctx = ctx_of(&mut tape)?;
    let x = tape.constant(h.clone());
    let vars = LayerVars::register(&mut tape, p);
    let out = sage_layer(&mut tape, x, &ctx, &vars, activate)?;
    Ok(tape.value(out).clone())
}

/// Baseline layer evaluated outside of training.
pub fn baseline_sage_forward(h: &Tensor, g: &Arc<Graph>, p: &SageLayerParams, activate: bool) -> Result<Tensor> {
    if p.w_edge.is_some() {
        return Err(Error::Config("baseline layer given an edge projection".into()));
    }
    single_layer(h, |_| Ok(SageContext::baseline(Arc::clone(g))), p, activate)
}

/// NCSM layer evaluated outside of training.
pub fn ncsm_sage_forward(
    h: &Tensor,
    g: &Arc<Graph>,
    s: &TopoScore,
    p: &SageLayerParams,
    activate: bool,
) -> Result<Tensor> {
    if p.w_edge.is_none() {
        return Err(Error::Config("NCSM layer needs an edge projection".into()));
    }
    single_layer(h, |t| SageContext::with_scores(t, Arc::clone(g), s), p, activate)
}

/// Full encoder forward pass; `s` is required for NCSM layers.
pub fn encode(
    g: &Arc<Graph>,
    x: &Tensor,
    cfg: &EncoderConfig,
    params: &EncoderParams,
    s: Option<&TopoScore>,
) -> Result<Tensor> {
    cfg.validate()?;
    if params.layers.len() != cfg.num_layers {
        return Err(Error::Config(format!(
            "{} layer parameter sets for a {}-layer encoder",
            params.layers.len(),
            cfg.num_layers
        )));
    }
    let mut width = x.cols();
    for l in &params.layers {
        l.validate()?;
        if l.kind() != cfg.layer_kind {
            return Err(Error::Config(format!("layer of kind {} in a {} encoder", l.kind(), cfg.layer_kind)));
        }
        if l.d_in() != width {
            return Err(Error::shape("encode", (x.rows(), width), l.w_self.shape()));
        }
        width = l.d_out();
    }
    let mut tape = Tape::new();
    let ctx = match (cfg.layer_kind, s) {
        (LayerKind::NcsmSage, Some(s)) => SageContext::with_scores(&mut tape, Arc::clone(g), s)?,
        (LayerKind::NcsmSage, None) => return Err(Error::Config("NCSM encoder needs topological scores".into())),
        (LayerKind::BaselineSage, _) => SageContext::baseline(Arc::clone(g)),
    };
    let xv = tape.constant(x.clone());
    let vars: Vec<LayerVars> = params.layers.iter().map(|l| LayerVars::register(&mut tape, l)).collect();
    let out = encode_on_tape(&mut tape, xv, &ctx, &vars)?;
    Ok(tape.value(out).clone())
}
