//! Link-prediction heads, the full-batch training loop, and evaluation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, sigmoid, AdamState, Checkpoint, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{sample_negatives, DataSplit, EdgeList, FeatureMatrix, Graph};
use crate::metrics::{auc, MetricsReport};
use crate::sage::{encode_on_tape, EncoderConfig, EncoderParams, LayerKind, LayerVars, SageContext};
use crate::topo::{topo_score, CentralityKind, SimilarityKind, TopoScore};

/// Half-width of the uniform initialization of learned node embeddings.
pub const EMBEDDING_INIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// `sigmoid(<h_u, h_v>)`.
    Dot,
    /// `sigmoid(MLP(h_u * h_v))`.
    HadamardMlp,
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dot => "dot",
            Self::HadamardMlp => "hadamard_mlp",
        })
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(Self::Dot),
            "hadamard_mlp" | "mlp" => Ok(Self::HadamardMlp),
            _ => Err(Error::Config(format!("unknown head {s:?} (expected dot or hadamard_mlp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub alpha: f64,
    pub centrality_kind: CentralityKind,
    pub similarity_kind: SimilarityKind,
    pub head_kind: HeadKind,
    /// Width of the learned embedding table for graphs without features.
    pub embed_dim: usize,
    pub seed: u64,
    pub resample_train_negatives_each_epoch: bool,
    pub encoder: EncoderConfig,
    pub mlp_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 0.01,
            alpha: 0.5,
            centrality_kind: CentralityKind::Eigenvector,
            similarity_kind: SimilarityKind::ResourceAllocation,
            head_kind: HeadKind::HadamardMlp,
            embed_dim: 256,
            seed: 0,
            resample_train_negatives_each_epoch: true,
            encoder: EncoderConfig::default(),
            mlp_hidden: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.embed_dim == 0 || self.mlp_hidden == 0 {
            return Err(Error::Config("embed_dim and mlp_hidden must be positive".into()));
        }
        self.encoder.validate()
    }
}

/// Dense layers of the prediction head, each `(weight d_in x d_out, bias 1 x d_out)`.
/// Empty for the dot head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub kind: HeadKind,
    pub layers: Vec<(Tensor, Tensor)>,
}

impl HeadParams {
    /// The MLP maps `d -> hidden -> hidden -> 1` with ReLU between layers.
    pub fn glorot<R: Rng>(kind: HeadKind, d: usize, hidden: usize, rng: &mut R) -> Self {
        let layers = match kind {
            HeadKind::Dot => Vec::new(),
            HeadKind::HadamardMlp => [(d, hidden), (hidden, hidden), (hidden, 1)]
                .into_iter()
                .map(|(i, o)| (Tensor::glorot(i, o, rng), Tensor::zeros(1, o)))
                .collect(),
        };
        Self { kind, layers }
    }

    fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(|(w, _)| w.rows())
    }
}

/// Probability that `(u, v)` is a link, from the two embedding rows.
pub fn head_score(h_u: &[f64], h_v: &[f64], head: &HeadParams) -> Result<f64> {
    Ok(sigmoid(head_logit(h_u, h_v, head)?))
}

/// Pre-sigmoid value of [`head_score`].
pub fn head_logit(h_u: &[f64], h_v: &[f64], head: &HeadParams) -> Result<f64> {
    if h_u.len() != h_v.len() {
        return Err(Error::shape("head_score", (1, h_u.len()), (1, h_v.len())));
    }
    let prod: Vec<f64> = h_u.iter().zip(h_v).map(|(a, b)| a * b).collect();
    if head.kind == HeadKind::Dot {
        return Ok(prod.iter().sum());
    }
    if head.input_dim() != Some(prod.len()) {
        return Err(Error::shape("head_score", (1, prod.len()), (head.input_dim().unwrap_or(0), 1)));
    }
    let mut x = prod;
    let last = head.layers.len() - 1;
    for (i, (w, b)) in head.layers.iter().enumerate() {
        let mut y = b.data().to_vec();
        for (xi, wrow) in x.iter().zip(0..w.rows()) {
            for (o, wv) in y.iter_mut().zip(w.row(wrow)) {
                *o += xi * wv;
            }
        }
        if i < last {
            y.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        x = y;
    }
    Ok(x[0])
}

/// All trainable tensors of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Learned input table for featureless graphs.
    pub embedding: Option<Tensor>,
    pub encoder: EncoderParams,
    pub head: HeadParams,
}

impl ModelParams {
    pub fn init(cfg: &TrainConfig, num_nodes: usize, feature_dim: Option<usize>, rng: &mut ChaCha8Rng) -> Result<Self> {
        let embedding = match feature_dim {
            Some(_) => None,
            None => Some(Tensor::uniform(num_nodes, cfg.embed_dim, EMBEDDING_INIT, rng)),
        };
        let d_in = feature_dim.unwrap_or(cfg.embed_dim);
        let encoder = EncoderParams::glorot(&cfg.encoder, d_in, rng)?;
        let head = HeadParams::glorot(cfg.head_kind, cfg.encoder.hidden_dim, cfg.mlp_hidden, rng);
        Ok(Self {
            embedding,
            encoder,
            head,
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = self.embedding.iter().collect();
        out.extend(self.encoder.tensors());
        for (w, b) in &self.head.layers {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = self.embedding.iter_mut().collect();
        out.extend(self.encoder.tensors_mut());
        for (w, b) in &mut self.head.layers {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let mut c = Checkpoint::new();
        if let Some(e) = &self.embedding {
            c.push("embedding", e.clone())?;
        }
        self.encoder.write_checkpoint("encoder.", &mut c)?;
        for (i, (w, b)) in self.head.layers.iter().enumerate() {
            c.push(format!("head.layer{i}.weight"), w.clone())?;
            c.push(format!("head.layer{i}.bias"), b.clone())?;
        }
        Ok(c)
    }

    pub fn from_checkpoint(c: &Checkpoint, cfg: &TrainConfig, num_nodes: usize, feature_dim: Option<usize>) -> Result<Self> {
        let embedding = match feature_dim {
            Some(_) => None,
            None => Some(c.expect("embedding", (num_nodes, cfg.embed_dim))?.clone()),
        };
        let d_in = feature_dim.unwrap_or(cfg.embed_dim);
        let encoder = EncoderParams::read_checkpoint("encoder.", c, &cfg.encoder, d_in)?;
        let layers = match cfg.head_kind {
            HeadKind::Dot => Vec::new(),
            HeadKind::HadamardMlp => {
                let (d, h) = (cfg.encoder.hidden_dim, cfg.mlp_hidden);
                [(d, h), (h, h), (h, 1)]
                    .into_iter()
                    .enumerate()
                    .map(|(i, (r, o))| {
                        Ok((
                            c.expect(&format!("head.layer{i}.weight"), (r, o))?.clone(),
                            c.expect(&format!("head.layer{i}.bias"), (1, o))?.clone(),
                        ))
                    })
                    .collect::<Result<_>>()?
            }
        };
        Ok(Self {
            embedding,
            encoder,
            head: HeadParams {
                kind: cfg.head_kind,
                layers,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    /// Validation AUC of the embeddings the epoch's update started from.
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// `epoch,loss,val_auc` lines; the AUC column is empty without a
    /// validation set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_auc\n");
        for r in &self.epochs {
            match r.val_auc {
                Some(a) => out.push_str(&format!("{},{},{}\n", r.epoch, r.loss, a)),
                None => out.push_str(&format!("{},{},\n", r.epoch, r.loss)),
            }
        }
        out
    }
}

/// Parameters, the configuration they were trained with, and the node
/// embeddings they produce on the training graph.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub params: ModelParams,
    pub embeddings: Tensor,
    pub topo: Option<TopoScore>,
}

/// Inputs fixed for the whole run: graph, scores, and node features.
struct Inputs {
    graph: Arc<Graph>,
    topo: Option<TopoScore>,
    features: Option<Arc<Tensor>>,
}

impl Inputs {
    fn new(graph: &Graph, x: Option<&FeatureMatrix>, cfg: &TrainConfig) -> Result<Self> {
        let features = match x {
            Some(x) if x.rows() != graph.num_nodes() => {
                return Err(Error::Alignment(format!(
                    "{} feature rows for {} nodes",
                    x.rows(),
                    graph.num_nodes()
                )))
            }
            Some(x) => Some(Arc::new(Tensor::from_vec(x.rows(), x.cols(), x.values().to_vec())?)),
            None => None,
        };
        let topo = match cfg.encoder.layer_kind {
            LayerKind::NcsmSage => Some(topo_score(graph, cfg.centrality_kind, cfg.similarity_kind, cfg.alpha)?),
            LayerKind::BaselineSage => None,
        };
        Ok(Self {
            graph: Arc::new(graph.clone()),
            topo,
            features,
        })
    }

    fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.cols())
    }
}

/// Handles of every parameter on one tape, in [`ModelParams::tensors`] order.
struct ModelVars {
    embedding: Option<Var>,
    layers: Vec<LayerVars>,
    head: Vec<(Var, Var)>,
    head_kind: HeadKind,
}

impl ModelVars {
    fn register(tape: &mut Tape, p: &ModelParams) -> Self {
        Self {
            embedding: p.embedding.as_ref().map(|e| tape.param(e.clone())),
            layers: p.encoder.layers.iter().map(|l| LayerVars::register(tape, l)).collect(),
            head: p
                .head
                .layers
                .iter()
                .map(|(w, b)| (tape.param(w.clone()), tape.param(b.clone())))
                .collect(),
            head_kind: p.head.kind,
        }
    }

    fn all(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self.embedding.into_iter().collect();
        for l in &self.layers {
            out.extend(l.vars());
        }
        for &(w, b) in &self.head {
            out.push(w);
            out.push(b);
        }
        out
    }
}

fn encode_model(tape: &mut Tape, inputs: &Inputs, vars: &ModelVars) -> Result<Var> {
    let ctx = match &inputs.topo {
        Some(s) => SageContext::with_scores(tape, Arc::clone(&inputs.graph), s)?,
        None => SageContext::baseline(Arc::clone(&inputs.graph)),
    };
    let x = match (&inputs.features, vars.embedding) {
        (Some(f), _) => tape.constant_shared(Arc::clone(f)),
        (None, Some(e)) => e,
        (None, None) => return Err(Error::Config("featureless graph without an embedding table".into())),
    };
    encode_on_tape(tape, x, &ctx, &vars.layers)
}

fn pair_index(pairs: &[&EdgeList]) -> (Arc<[usize]>, Arc<[usize]>) {
    let src: Vec<usize> = pairs.iter().flat_map(|p| p.iter().map(|(u, _)| u)).collect();
    let dst: Vec<usize> = pairs.iter().flat_map(|p| p.iter().map(|(_, v)| v)).collect();
    (src.into(), dst.into())
}

/// Head logits for the pairs `(src[i], dst[i])` as an `m x 1` column.
fn head_on_tape(tape: &mut Tape, h: Var, src: Arc<[usize]>, dst: Arc<[usize]>, vars: &ModelVars) -> Result<Var> {
    let hu = tape.gather_rows(h, src)?;
    let hv = tape.gather_rows(h, dst)?;
    let mut z = tape.hadamard(hu, hv)?;
    match vars.head_kind {
        HeadKind::Dot => {
            let ones = tape.constant(Tensor::filled(tape.shape(z).1, 1, 1.0));
            tape.matmul(z, ones)
        }
        HeadKind::HadamardMlp => {
            let last = vars.head.len() - 1;
            for (i, &(w, b)) in vars.head.iter().enumerate() {
                let zw = tape.matmul(z, w)?;
                z = tape.add(zw, b)?;
                if i < last {
                    z = tape.relu(z);
                }
            }
            Ok(z)
        }
    }
}

fn check_pairs(pairs: &EdgeList, n: usize) -> Result<()> {
    match pairs.iter().find(|&(u, v)| u >= n || v >= n) {
        Some((u, v)) => Err(Error::Alignment(format!("pair ({u}, {v}) outside a graph of {n} nodes"))),
        None => Ok(()),
    }
}

/// Trains a model on `split.train_graph` with full-batch Adam.
///
/// Each epoch scores every training positive and an equal number of sampled
/// non-edges of the training graph; negatives for epoch `e` are drawn with
/// seed `cfg.seed + e` (or `cfg.seed` for every epoch when resampling is off).
pub fn train(split: &DataSplit, x: Option<&FeatureMatrix>, cfg: &TrainConfig) -> Result<(TrainedModel, TrainHistory)> {
    cfg.validate()?;
    if split.train_pos.is_empty() {
        return Err(Error::Domain("no training edges".into()));
    }
    let n = split.num_nodes();
    for p in [&split.train_pos, &split.val_pos, &split.val_neg] {
        check_pairs(p, n)?;
    }
    let inputs = Inputs::new(&split.train_graph, x, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(cfg, n, inputs.feature_dim(), &mut rng)?;
    let shapes: Vec<_> = params.tensors().iter().map(|t| t.shape()).collect();
    let mut adam = AdamState::new(&shapes);

    let no_exclusions = EdgeList::new();
    let num_neg = split.train_pos.len();
    let mut negatives = None;
    let has_val = !split.val_pos.is_empty() && !split.val_neg.is_empty();
    let (val_src, val_dst) = pair_index(&[&split.val_pos, &split.val_neg]);
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        if cfg.resample_train_negatives_each_epoch || negatives.is_none() {
            let seed = if cfg.resample_train_negatives_each_epoch {
                cfg.seed.wrapping_add(epoch as u64)
            } else {
                cfg.seed
            };
            negatives = Some(sample_negatives(&split.train_graph, num_neg, seed, &no_exclusions)?);
        }
        let neg = negatives.as_ref().expect("sampled above");
        let (src, dst) = pair_index(&[&split.train_pos, neg]);
        let labels: Vec<f64> = (0..src.len()).map(|i| if i < split.train_pos.len() { 1.0 } else { 0.0 }).collect();

        let mut tape = Tape::new();
        let vars = ModelVars::register(&mut tape, &params);
        let h = encode_model(&mut tape, &inputs, &vars)?;
        let logits = head_on_tape(&mut tape, h, src, dst, &vars)?;
        let y = tape.constant(Tensor::column(labels));
        let loss = tape.bce_with_logits(logits, y)?;
        let loss_value = tape.value(loss).item();
        if !loss_value.is_finite() {
            return Err(Error::TrainingAborted {
                epoch,
                reason: format!("loss is {loss_value}"),
            });
        }

        // Recorded after the loss, so the backward pass never visits it.
        let val_auc = if has_val {
            let v = head_on_tape(&mut tape, h, Arc::clone(&val_src), Arc::clone(&val_dst), &vars)?;
            let scores = tape.value(v).data();
            let (pos, neg) = scores.split_at(split.val_pos.len());
            Some(auc(pos, neg).map_err(|e| Error::TrainingAborted {
                epoch,
                reason: e.to_string(),
            })?)
        } else {
            None
        };

        tape.backward(loss)?;
        let grads: Vec<Tensor> = vars.all().into_iter().map(|v| tape.grad_or_zeros(v)).collect();
        drop(tape);
        let mut tensors = params.tensors_mut();
        adam_step(&mut tensors, &grads, &mut adam, cfg.lr).map_err(|e| Error::TrainingAborted {
            epoch,
            reason: e.to_string(),
        })?;
        history.epochs.push(EpochRecord {
            epoch,
            loss: loss_value,
            val_auc,
        });
        log::debug!("epoch {epoch}: loss {loss_value:.6} val_auc {val_auc:?}");
    }

    if !params.is_finite() {
        return Err(Error::TrainingAborted {
            epoch: cfg.epochs,
            reason: "non-finite parameters".into(),
        });
    }
    let embeddings = embed(&inputs, &params)?;
    Ok((
        TrainedModel {
            config: cfg.clone(),
            params,
            embeddings,
            topo: inputs.topo,
        },
        history,
    ))
}

fn embed(inputs: &Inputs, params: &ModelParams) -> Result<Tensor> {
    let mut tape = Tape::new();
    let vars = ModelVars::register(&mut tape, params);
    let h = encode_model(&mut tape, inputs, &vars)?;
    Ok(tape.value(h).clone())
}

/// Loss of a freshly initialized model on the first epoch's balanced batch,
/// before any update. Shares initialization and sampling with [`train`].
pub fn initial_loss(split: &DataSplit, x: Option<&FeatureMatrix>, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    let inputs = Inputs::new(&split.train_graph, x, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = ModelParams::init(cfg, split.num_nodes(), inputs.feature_dim(), &mut rng)?;
    let seed = if cfg.resample_train_negatives_each_epoch {
        cfg.seed.wrapping_add(1)
    } else {
        cfg.seed
    };
    let neg = sample_negatives(&split.train_graph, split.train_pos.len(), seed, &EdgeList::new())?;
    let (src, dst) = pair_index(&[&split.train_pos, &neg]);
    let labels: Vec<f64> = (0..src.len()).map(|i| if i < split.train_pos.len() { 1.0 } else { 0.0 }).collect();
    let mut tape = Tape::new();
    let vars = ModelVars::register(&mut tape, &params);
    let h = encode_model(&mut tape, &inputs, &vars)?;
    let logits = head_on_tape(&mut tape, h, src, dst, &vars)?;
    let y = tape.constant(Tensor::column(labels));
    let loss = tape.bce_with_logits(logits, y)?;
    Ok(tape.value(loss).item())
}

impl TrainedModel {
    /// Rebuilds a model from checkpointed parameters, recomputing embeddings
    /// on `train_graph`.
    pub fn from_params(cfg: &TrainConfig, params: ModelParams, train_graph: &Graph, x: Option<&FeatureMatrix>) -> Result<Self> {
        cfg.validate()?;
        let inputs = Inputs::new(train_graph, x, cfg)?;
        let embeddings = embed(&inputs, &params)?;
        Ok(Self {
            config: cfg.clone(),
            params,
            embeddings,
            topo: inputs.topo,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        self.params.to_checkpoint()?.save(path)
    }

    pub fn load_checkpoint(
        path: impl AsRef<Path>,
        cfg: &TrainConfig,
        train_graph: &Graph,
        x: Option<&FeatureMatrix>,
    ) -> Result<Self> {
        let ckpt = Checkpoint::load(&path)?;
        let params = ModelParams::from_checkpoint(&ckpt, cfg, train_graph.num_nodes(), x.map(FeatureMatrix::cols))
            .map_err(|e| e.in_file(path.as_ref()))?;
        Self::from_params(cfg, params, train_graph, x)
    }

    /// Head logits for each pair, computed from the cached embeddings.
    pub fn logits(&self, pairs: &EdgeList) -> Result<Vec<f64>> {
        check_pairs(pairs, self.embeddings.rows())?;
        pairs
            .iter()
            .map(|(u, v)| head_logit(self.embeddings.row(u), self.embeddings.row(v), &self.params.head))
            .collect()
    }

    /// Link probabilities for each pair.
    pub fn score_pairs(&self, pairs: &EdgeList) -> Result<Vec<f64>> {
        Ok(self.logits(pairs)?.into_iter().map(sigmoid).collect())
    }
}

/// AUC, AP and Hits@k of the model on held-out pairs.
///
/// Pairs are ranked by head logit. The sigmoid is monotone but saturates to
/// exactly 1.0 in double precision, which would create artificial ties.
pub fn evaluate(model: &TrainedModel, pos: &EdgeList, neg: &EdgeList, k: usize) -> Result<MetricsReport> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Domain("evaluation needs positive and negative pairs".into()));
    }
    let p = model.logits(pos)?;
    let q = model.logits(neg)?;
    MetricsReport::compute(&p, &q, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::split_edges;

    fn ring_with_chords(n: usize) -> Graph {
        let mut pairs = Vec::new();
        for i in 0..n {
            pairs.push((i, (i + 1) % n));
            pairs.push((i, (i + 2) % n));
        }
        Graph::from_edges(&EdgeList::from_pairs(pairs).unwrap(), n).unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            embed_dim: 8,
            mlp_hidden: 8,
            encoder: EncoderConfig {
                num_layers: 2,
                hidden_dim: 8,
                layer_kind: LayerKind::NcsmSage,
            },
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn dot_head_examples() {
        let head = HeadParams {
            kind: HeadKind::Dot,
            layers: Vec::new(),
        };
        assert_eq!(head_score(&[1.0, 0.0], &[0.0, 1.0], &head).unwrap(), 0.5);
        let h = [1.0, 1.0, 1.0];
        assert!((head_score(&h, &h, &head).unwrap() - 0.95257).abs() < 1e-5);
        assert!(head_score(&[1.0], &[1.0, 2.0], &head).is_err());
    }

    #[test]
    fn heads_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for kind in [HeadKind::Dot, HeadKind::HadamardMlp] {
            let head = HeadParams::glorot(kind, 6, 5, &mut rng);
            assert_eq!(head_score(&a, &b, &head).unwrap(), head_score(&b, &a, &head).unwrap());
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { epochs: 0, ..small_cfg() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..small_cfg() }.validate().is_err());
        assert!(TrainConfig { alpha: 1.5, ..small_cfg() }.validate().is_err());
        let d = TrainConfig::default();
        assert_eq!((d.epochs, d.lr, d.alpha, d.embed_dim), (500, 0.01, 0.5, 256));
        assert_eq!(d.head_kind, HeadKind::HadamardMlp);
    }

    #[test]
    fn one_epoch_records_one_entry() {
        let g = ring_with_chords(30);
        let split = split_edges(&g, 0.1, 0.1, 3).unwrap();
        let cfg = TrainConfig { epochs: 1, ..small_cfg() };
        let (model, hist) = train(&split, None, &cfg).unwrap();
        assert_eq!(hist.epochs.len(), 1);
        assert_eq!(model.embeddings.shape(), (30, 8));
        assert!(hist.to_csv().starts_with("epoch,loss,val_auc\n1,"));
    }

    #[test]
    fn training_is_deterministic() {
        let g = ring_with_chords(24);
        let split = split_edges(&g, 0.1, 0.2, 9).unwrap();
        let cfg = small_cfg();
        let (a, ha) = train(&split, None, &cfg).unwrap();
        let (b, hb) = train(&split, None, &cfg).unwrap();
        assert_eq!(ha, hb);
        let ra = evaluate(&a, &split.test_pos, &split.test_neg, 20).unwrap();
        let rb = evaluate(&b, &split.test_pos, &split.test_neg, 20).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ra, evaluate(&a, &split.test_pos, &split.test_neg, 20).unwrap());
    }

    #[test]
    fn first_history_loss_is_initial_loss() {
        let g = ring_with_chords(20);
        let split = split_edges(&g, 0.1, 0.1, 2).unwrap();
        let cfg = small_cfg();
        let (_, hist) = train(&split, None, &cfg).unwrap();
        assert_eq!(hist.epochs[0].loss, initial_loss(&split, None, &cfg).unwrap());
    }

    #[test]
    fn empty_inputs_rejected() {
        let g = ring_with_chords(12);
        let split = split_edges(&g, 0.1, 0.1, 2).unwrap();
        let (model, _) = train(&split, None, &TrainConfig { epochs: 1, ..small_cfg() }).unwrap();
        assert!(matches!(
            evaluate(&model, &EdgeList::new(), &split.test_neg, 20),
            Err(Error::Domain(_))
        ));
        let mut empty = split.clone();
        empty.train_pos = EdgeList::new();
        assert!(matches!(train(&empty, None, &small_cfg()), Err(Error::Domain(_))));
    }

    #[test]
    fn checkpoint_restores_embeddings() {
        let g = ring_with_chords(16);
        let split = split_edges(&g, 0.1, 0.1, 4).unwrap();
        let cfg = small_cfg();
        let (model, _) = train(&split, None, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        model.save_checkpoint(&path).unwrap();
        let back = TrainedModel::load_checkpoint(&path, &cfg, &split.train_graph, None).unwrap();
        assert_eq!(back.params, model.params);
        assert_eq!(back.embeddings, model.embeddings);
        let wider = TrainConfig { mlp_hidden: 9, ..small_cfg() };
        assert!(TrainedModel::load_checkpoint(&path, &wider, &split.train_graph, None).is_err());
    }
}
