use std::sync::Arc;

use super::kernels::{self, SPARSE_DENSITY};
use super::Tensor;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Lower clamp applied to probabilities inside [`Tape::bce_loss`].
pub const PROB_CLAMP: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul { a: Var, b: Var, sparse_lhs: bool },
    Add { a: Var, b: Var, broadcast: bool },
    Hadamard(Var, Var),
    ConcatCols(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    GatherRows { src: Var, index: Arc<[usize]> },
    NeighborMean { h: Var, graph: Arc<Graph> },
    WeightedNeighborMean {
        h: Var,
        direction: Var,
        scores: Arc<[f64]>,
        graph: Arc<Graph>,
    },
    Bce { pred: Var, labels: Var },
    BceWithLogits { logits: Var, labels: Var },
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records a computation for reverse-mode differentiation.
///
/// Leaves created with [`Tape::param`] receive gradients; [`Tape::constant`]
/// leaves do not. A tape supports a single [`Tape::backward`] pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.push_shared(Arc::new(value), op, requires_grad)
    }

    fn push_shared(&mut self, value: Arc<Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Constant leaf sharing storage with the caller.
    pub fn constant_shared(&mut self, value: Arc<Tensor>) -> Var {
        self.push_shared(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Gradient of the last `backward` target with respect to `v`, if `v` is a
    /// trainable leaf that the target depends on.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Like [`Tape::grad`], but returns zeros when the target does not depend
    /// on `v`.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v).cloned().unwrap_or_else(|| {
            let (r, c) = self.shape(v);
            Tensor::zeros(r, c)
        })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = ta.shape();
        let (k2, n) = tb.shape();
        if k != k2 {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let node_a = &self.nodes[a.0];
        let sparse_lhs = matches!(node_a.op, Op::Leaf)
            && !node_a.requires_grad
            && kernels::density(ta.data()) < SPARSE_DENSITY;
        let mut out = Tensor::zeros(m, n);
        if sparse_lhs {
            kernels::sparse_lhs_matmul(m, k, n, ta.data(), tb.data(), out.data_mut());
        } else {
            kernels::gemm(
                m,
                k,
                n,
                ta.data(),
                (k as isize, 1),
                tb.data(),
                (n as isize, 1),
                out.data_mut(),
                0.0,
            );
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul { a, b, sparse_lhs }, rg))
    }

    /// Elementwise sum; `b` may also be a `1 x cols` row broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let broadcast = if ta.shape() == tb.shape() {
            false
        } else if tb.rows() == 1 && tb.cols() == ta.cols() {
            true
        } else {
            return Err(Error::shape("add", ta.shape(), tb.shape()));
        };
        let mut out = ta.clone();
        if broadcast {
            let bias = tb.data();
            for r in 0..out.rows() {
                for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
                    *o += b;
                }
            }
        } else {
            out.add_assign(tb);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add { a, b, broadcast }, rg))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::shape("hadamard", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Hadamard(a, b), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rows() != tb.rows() {
            return Err(Error::shape("concat_cols", ta.shape(), tb.shape()));
        }
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for r in 0..ta.rows() {
            data.extend_from_slice(ta.row(r));
            data.extend_from_slice(tb.row(r));
        }
        let out = Tensor::from_vec(ta.rows(), ta.cols() + tb.cols(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::ConcatCols(a, b), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data).unwrap();
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| sigmoid(x)).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data).unwrap();
        let rg = self.rg(&[a]);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x * factor).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data).unwrap();
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, factor), rg)
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Mean of all entries, as a 1x1 tensor.
    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len().max(1) as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    /// Rows `index[i]` of `src`, stacked.
    pub fn gather_rows(&mut self, src: Var, index: Arc<[usize]>) -> Result<Var> {
        let t = self.value(src);
        if let Some(&bad) = index.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::shape("gather_rows", t.shape(), (bad, 0)));
        }
        let mut data = Vec::with_capacity(index.len() * t.cols());
        for &i in index.iter() {
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::from_vec(index.len(), t.cols(), data)?;
        let rg = self.rg(&[src]);
        Ok(self.push(out, Op::GatherRows { src, index }, rg))
    }

    /// Row `v` of the result is the mean of rows `h[u]` over neighbors `u` of
    /// `v`; isolated nodes get a zero row.
    pub fn neighbor_mean(&mut self, h: Var, graph: &Arc<Graph>) -> Result<Var> {
        let t = self.value(h);
        if t.rows() != graph.num_nodes() {
            return Err(Error::shape("neighbor_mean", t.shape(), (graph.num_nodes(), t.cols())));
        }
        let d = t.cols();
        let mut out = Tensor::zeros(t.rows(), d);
        for v in 0..graph.num_nodes() {
            let nbrs = graph.neighbors(v);
            if nbrs.is_empty() {
                continue;
            }
            let row = out.row_mut(v);
            for &u in nbrs {
                for (o, x) in row.iter_mut().zip(t.row(u)) {
                    *o += x;
                }
            }
            let inv = 1.0 / nbrs.len() as f64;
            for o in row.iter_mut() {
                *o *= inv;
            }
        }
        let rg = self.rg(&[h]);
        Ok(self.push(
            out,
            Op::NeighborMean {
                h,
                graph: Arc::clone(graph),
            },
            rg,
        ))
    }

    /// Row `v` of the result is the mean over neighbors `u` of
    /// `h[u] + scores[k] * direction`, where `k` is the slot `v -> u` and
    /// `direction` is a `1 x cols` row. With `scores[k]` holding the score of
    /// the message `u -> v`, this aggregates per-edge contributions
    /// `scores[k] * direction` alongside the neighbor rows.
    pub fn weighted_neighbor_mean(
        &mut self,
        h: Var,
        graph: &Arc<Graph>,
        scores: Arc<[f64]>,
        direction: Var,
    ) -> Result<Var> {
        let t = self.value(h);
        let dir = self.value(direction);
        if t.rows() != graph.num_nodes() {
            return Err(Error::shape(
                "weighted_neighbor_mean",
                t.shape(),
                (graph.num_nodes(), t.cols()),
            ));
        }
        if dir.shape() != (1, t.cols()) {
            return Err(Error::shape("weighted_neighbor_mean", dir.shape(), (1, t.cols())));
        }
        if scores.len() != graph.num_slots() {
            return Err(Error::shape(
                "weighted_neighbor_mean",
                (scores.len(), 1),
                (graph.num_slots(), 1),
            ));
        }
        let d = t.cols();
        let c = dir.data();
        let mut out = Tensor::zeros(t.rows(), d);
        for v in 0..graph.num_nodes() {
            let range = graph.slot_range(v);
            if range.is_empty() {
                continue;
            }
            let deg = range.len();
            let row = out.row_mut(v);
            for k in range {
                let u = graph.neighbor_array()[k];
                let s = scores[k];
                for ((o, x), cj) in row.iter_mut().zip(t.row(u)).zip(c) {
                    *o += x + s * cj;
                }
            }
            let inv = 1.0 / deg as f64;
            for o in row.iter_mut() {
                *o *= inv;
            }
        }
        let rg = self.rg(&[h, direction]);
        Ok(self.push(
            out,
            Op::WeightedNeighborMean {
                h,
                direction,
                scores,
                graph: Arc::clone(graph),
            },
            rg,
        ))
    }

    /// Mean binary cross-entropy of probabilities `pred` against 0/1 `labels`.
    /// Probabilities are clamped to `[1e-12, 1 - 1e-12]`.
    pub fn bce_loss(&mut self, pred: Var, labels: Var) -> Result<Var> {
        let (tp, ty) = (self.value(pred), self.value(labels));
        if tp.shape() != ty.shape() {
            return Err(Error::shape("bce_loss", tp.shape(), ty.shape()));
        }
        let n = tp.len().max(1) as f64;
        let total: f64 = tp
            .data()
            .iter()
            .zip(ty.data())
            .map(|(&p, &y)| {
                let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum();
        let rg = self.rg(&[pred]);
        Ok(self.push(Tensor::scalar(total / n), Op::Bce { pred, labels }, rg))
    }

    /// Binary cross-entropy of `sigmoid(logits)` against `labels`, evaluated
    /// in the overflow-free softplus form.
    pub fn bce_with_logits(&mut self, logits: Var, labels: Var) -> Result<Var> {
        let (tx, ty) = (self.value(logits), self.value(labels));
        if tx.shape() != ty.shape() {
            return Err(Error::shape("bce_with_logits", tx.shape(), ty.shape()));
        }
        let n = tx.len().max(1) as f64;
        let total: f64 = tx
            .data()
            .iter()
            .zip(ty.data())
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum();
        let rg = self.rg(&[logits]);
        Ok(self.push(Tensor::scalar(total / n), Op::BceWithLogits { logits, labels }, rg))
    }

    /// Reverse pass from the scalar `loss`. Gradients of trainable leaves are
    /// then available through [`Tape::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::BackwardTwice);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::shape("backward", shape, (1, 1)));
        }
        self.backward_done = true;
        let mut grads: Vec<Option<Tensor>> = Vec::new();
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            if matches!(self.nodes[i].op, Op::Leaf) {
                grads[i] = Some(g);
            }
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let val = |v: Var| -> &Tensor { &self.nodes[v.0].value };
        let wants = |v: Var| self.nodes[v.0].requires_grad;

        match &node.op {
            Op::Leaf => {}
            &Op::MatMul { a, b, sparse_lhs } => {
                let (ta, tb) = (val(a), val(b));
                let (m, k) = ta.shape();
                let n = tb.cols();
                if wants(a) {
                    let ga = slot(grads, a, ta.shape());
                    // dA = G B^T
                    kernels::gemm(m, n, k, g.data(), (n as isize, 1), tb.data(), (1, n as isize), ga.data_mut(), 1.0);
                }
                if wants(b) {
                    let gb = slot(grads, b, tb.shape());
                    // dB = A^T G
                    if sparse_lhs {
                        kernels::sparse_lhs_transpose_accumulate(m, k, n, ta.data(), g.data(), gb.data_mut());
                    } else {
                        kernels::gemm(k, m, n, ta.data(), (1, k as isize), g.data(), (n as isize, 1), gb.data_mut(), 1.0);
                    }
                }
            }
            &Op::Add { a, b, broadcast } => {
                if wants(a) {
                    slot(grads, a, g.shape()).add_assign(g);
                }
                if wants(b) {
                    if broadcast {
                        let gb = slot(grads, b, (1, g.cols()));
                        for r in 0..g.rows() {
                            for (o, x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                                *o += x;
                            }
                        }
                    } else {
                        slot(grads, b, g.shape()).add_assign(g);
                    }
                }
            }
            &Op::Hadamard(a, b) => {
                if wants(a) {
                    let other = val(b);
                    let ga = slot(grads, a, g.shape());
                    for ((o, x), y) in ga.data_mut().iter_mut().zip(g.data()).zip(other.data()) {
                        *o += x * y;
                    }
                }
                if wants(b) {
                    let other = val(a);
                    let gb = slot(grads, b, g.shape());
                    for ((o, x), y) in gb.data_mut().iter_mut().zip(g.data()).zip(other.data()) {
                        *o += x * y;
                    }
                }
            }
            &Op::ConcatCols(a, b) => {
                let ca = val(a).cols();
                if wants(a) {
                    let ga = slot(grads, a, val(a).shape());
                    for r in 0..g.rows() {
                        for (o, x) in ga.row_mut(r).iter_mut().zip(&g.row(r)[..ca]) {
                            *o += x;
                        }
                    }
                }
                if wants(b) {
                    let gb = slot(grads, b, val(b).shape());
                    for r in 0..g.rows() {
                        for (o, x) in gb.row_mut(r).iter_mut().zip(&g.row(r)[ca..]) {
                            *o += x;
                        }
                    }
                }
            }
            &Op::Relu(a) => {
                let input = val(a);
                let ga = slot(grads, a, g.shape());
                for ((o, x), inp) in ga.data_mut().iter_mut().zip(g.data()).zip(input.data()) {
                    if *inp > 0.0 {
                        *o += x;
                    }
                }
            }
            &Op::Sigmoid(a) => {
                let ga = slot(grads, a, g.shape());
                for ((o, x), s) in ga.data_mut().iter_mut().zip(g.data()).zip(node.value.data()) {
                    *o += x * s * (1.0 - s);
                }
            }
            &Op::Scale(a, factor) => {
                let ga = slot(grads, a, g.shape());
                for (o, x) in ga.data_mut().iter_mut().zip(g.data()) {
                    *o += x * factor;
                }
            }
            &Op::Sum(a) | &Op::Mean(a) => {
                let shape = val(a).shape();
                let mut d = g.item();
                if matches!(node.op, Op::Mean(_)) {
                    d /= (shape.0 * shape.1).max(1) as f64;
                }
                for o in slot(grads, a, shape).data_mut() {
                    *o += d;
                }
            }
            Op::GatherRows { src, index } => {
                let gs = slot(grads, *src, val(*src).shape());
                for (r, &i) in index.iter().enumerate() {
                    for (o, x) in gs.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
            }
            Op::NeighborMean { h, graph } => {
                scatter_neighbor_mean_grad(graph, g, slot(grads, *h, val(*h).shape()));
            }
            Op::WeightedNeighborMean {
                h,
                direction,
                scores,
                graph,
            } => {
                if wants(*h) {
                    scatter_neighbor_mean_grad(graph, g, slot(grads, *h, val(*h).shape()));
                }
                if wants(*direction) {
                    let gd = slot(grads, *direction, (1, g.cols()));
                    for v in 0..graph.num_nodes() {
                        let range = graph.slot_range(v);
                        if range.is_empty() {
                            continue;
                        }
                        let mean_score = scores[range.clone()].iter().sum::<f64>() / range.len() as f64;
                        for (o, x) in gd.data_mut().iter_mut().zip(g.row(v)) {
                            *o += mean_score * x;
                        }
                    }
                }
            }
            &Op::Bce { pred, labels } => {
                let (tp, ty) = (val(pred), val(labels));
                let scale = g.item() / tp.len().max(1) as f64;
                let gp = slot(grads, pred, tp.shape());
                for ((o, &p), &y) in gp.data_mut().iter_mut().zip(tp.data()).zip(ty.data()) {
                    // The clamp is flat outside its range.
                    if p > PROB_CLAMP && p < 1.0 - PROB_CLAMP {
                        *o += scale * (-y / p + (1.0 - y) / (1.0 - p));
                    }
                }
            }
            &Op::BceWithLogits { logits, labels } => {
                let (tx, ty) = (val(logits), val(labels));
                let scale = g.item() / tx.len().max(1) as f64;
                let gx = slot(grads, logits, tx.shape());
                for ((o, &x), &y) in gx.data_mut().iter_mut().zip(tx.data()).zip(ty.data()) {
                    *o += scale * (sigmoid(x) - y);
                }
            }
        }
    }
}

fn slot(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
}

/// `dH[u] += sum over neighbors v of u of G[v] / deg(v)`.
fn scatter_neighbor_mean_grad(graph: &Graph, g: &Tensor, gh: &mut Tensor) {
    for u in 0..graph.num_nodes() {
        let out = gh.row_mut(u);
        for &v in graph.neighbors(u) {
            let inv = 1.0 / graph.degree(v) as f64;
            for (o, x) in out.iter_mut().zip(g.row(v)) {
                *o += x * inv;
            }
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeList;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type LossFn = Box<dyn Fn(&mut Tape, &[Var]) -> Var>;

    /// Largest relative error between analytic gradients and central
    /// differences with step 1e-5, over every entry of every parameter.
    fn fd_check(params: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&mut tape, &vars);
        tape.backward(loss).unwrap();
        let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad_or_zeros(v)).collect();

        let eval = |ps: &[Tensor]| {
            let mut t = Tape::new();
            let vs: Vec<Var> = ps.iter().map(|p| t.param(p.clone())).collect();
            let l = f(&mut t, &vs);
            t.value(l).item()
        };
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for (pi, p) in params.iter().enumerate() {
            for j in 0..p.len() {
                let mut plus = params.to_vec();
                plus[pi].data_mut()[j] += eps;
                let mut minus = params.to_vec();
                minus[pi].data_mut()[j] -= eps;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
                let a = analytic[pi].data()[j];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(err);
            }
        }
        worst
    }

    fn rand_t(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::uniform(r, c, 1.0, rng)
    }

    fn cycle_with_chord() -> Arc<Graph> {
        let e = EdgeList::from_pairs(vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)]).unwrap();
        // Node 5 is isolated.
        Arc::new(Graph::from_edges(&e, 6).unwrap())
    }

    #[test]
    fn square_sum_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_rows(&[&[1.0, 2.0]]));
        let sq = t.hadamard(x, x).unwrap();
        let loss = t.sum(sq);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn unreached_parameter_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let p = t.param(Tensor::from_rows(&[&[1.0, 1.0]]));
        let loss = t.sum(x);
        t.backward(loss).unwrap();
        assert!(t.grad(p).is_none());
        assert_eq!(t.grad_or_zeros(p), Tensor::zeros(1, 2));
    }

    #[test]
    fn backward_twice_and_non_scalar() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_rows(&[&[1.0, 2.0]]));
        assert!(matches!(t.backward(x), Err(Error::Shape { .. })));
        let s = t.sum(x);
        t.backward(s).unwrap();
        assert!(matches!(t.backward(s), Err(Error::BackwardTwice)));
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(2, 3));
        let b = t.constant(Tensor::zeros(2, 3));
        let col = t.constant(Tensor::zeros(3, 1));
        assert!(t.matmul(a, b).is_err());
        assert!(t.add(a, col).is_err());
        assert!(t.hadamard(a, col).is_err());
        assert!(t.concat_cols(a, col).is_err());
        assert!(t.gather_rows(a, Arc::from(vec![2usize])).is_err());
        let g = cycle_with_chord();
        assert!(t.neighbor_mean(a, &g).is_err());
    }

    #[test]
    fn matmul_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (rand_t(4, 3, &mut rng), rand_t(3, 5, &mut rng));
        let mut t = Tape::new();
        let (va, vb) = (t.constant(a.clone()), t.constant(b.clone()));
        let c = t.matmul(va, vb).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let expected: f64 = (0..3).map(|k| a.get(i, k) * b.get(k, j)).sum();
                assert!((t.value(c).get(i, j) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sparse_and_dense_matmul_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = Tensor::zeros(20, 30);
        for _ in 0..25 {
            let (i, j) = (rng.gen_range(0..20), rng.gen_range(0..30));
            a.set(i, j, 1.0);
        }
        let w = rand_t(30, 4, &mut rng);
        let mut t = Tape::new();
        let va = t.constant(a.clone());
        let vw = t.param(w.clone());
        let out = t.matmul(va, vw).unwrap();
        let loss = t.sum(out);
        t.backward(loss).unwrap();

        let mut dense = Tape::new();
        let va = dense.param(a);
        let vw2 = dense.param(w);
        let out2 = dense.matmul(va, vw2).unwrap();
        let loss2 = dense.sum(out2);
        dense.backward(loss2).unwrap();
        assert!(t.value(out).max_abs_diff(dense.value(out2)) < 1e-13);
        assert!(t.grad(vw).unwrap().max_abs_diff(dense.grad(vw2).unwrap()) < 1e-13);
    }

    #[test]
    fn primitive_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = rand_t(3, 4, &mut rng);
        let b = rand_t(4, 2, &mut rng);
        let c = rand_t(3, 4, &mut rng);
        let row = rand_t(1, 4, &mut rng);

        let checks: Vec<(&str, Vec<Tensor>, LossFn)> = vec![
            ("matmul", vec![a.clone(), b.clone()], Box::new(|t, v| {
                let m = t.matmul(v[0], v[1]).unwrap();
                let s = t.hadamard(m, m).unwrap();
                t.sum(s)
            })),
            ("add_broadcast", vec![a.clone(), row.clone()], Box::new(|t, v| {
                let s = t.add(v[0], v[1]).unwrap();
                let q = t.hadamard(s, s).unwrap();
                t.mean(q)
            })),
            ("hadamard", vec![a.clone(), c.clone()], Box::new(|t, v| {
                let h = t.hadamard(v[0], v[1]).unwrap();
                let h = t.hadamard(h, v[0]).unwrap();
                t.sum(h)
            })),
            ("concat", vec![a.clone(), c.clone(), rand_t(8, 1, &mut rng)], Box::new(|t, v| {
                let cat = t.concat_cols(v[0], v[1]).unwrap();
                let m = t.matmul(cat, v[2]).unwrap();
                let s = t.sigmoid(m);
                t.sum(s)
            })),
            ("relu_scale", vec![a.clone()], Box::new(|t, v| {
                let r = t.relu(v[0]);
                let r = t.scale(r, -2.5);
                let q = t.hadamard(r, r).unwrap();
                t.sum(q)
            })),
            ("gather", vec![a.clone()], Box::new(|t, v| {
                let g = t.gather_rows(v[0], Arc::from(vec![2usize, 0, 2])).unwrap();
                let q = t.hadamard(g, g).unwrap();
                t.sum(q)
            })),
        ];
        for (name, params, f) in checks {
            let err = fd_check(&params, f);
            assert!(err <= 1e-4, "{name}: relative error {err}");
        }
    }

    #[test]
    fn aggregation_gradients_match_finite_differences() {
        let g = cycle_with_chord();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = rand_t(6, 3, &mut rng);
        let dir = rand_t(1, 3, &mut rng);
        let scores: Arc<[f64]> = (0..g.num_slots()).map(|_| rng.gen_range(0.0..1.0)).collect();

        let g1 = Arc::clone(&g);
        let err = fd_check(std::slice::from_ref(&h), move |t, v| {
            let m = t.neighbor_mean(v[0], &g1).unwrap();
            let q = t.hadamard(m, m).unwrap();
            t.sum(q)
        });
        assert!(err <= 1e-4, "neighbor_mean: {err}");

        let g2 = Arc::clone(&g);
        let err = fd_check(&[h, dir], move |t, v| {
            let m = t.weighted_neighbor_mean(v[0], &g2, Arc::clone(&scores), v[1]).unwrap();
            let q = t.hadamard(m, m).unwrap();
            t.sum(q)
        });
        assert!(err <= 1e-4, "weighted_neighbor_mean: {err}");
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = rand_t(6, 1, &mut rng);
        let labels = Tensor::column(vec![1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let y1 = labels.clone();
        let err = fd_check(std::slice::from_ref(&x), move |t, v| {
            let p = t.sigmoid(v[0]);
            let y = t.constant(y1.clone());
            t.bce_loss(p, y).unwrap()
        });
        assert!(err <= 1e-4, "bce: {err}");
        let err = fd_check(&[x], move |t, v| {
            let y = t.constant(labels.clone());
            t.bce_with_logits(v[0], y).unwrap()
        });
        assert!(err <= 1e-4, "bce_with_logits: {err}");
    }

    #[test]
    fn random_three_layer_composition() {
        let g = cycle_with_chord();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x = rand_t(6, 4, &mut rng);
            let params = vec![
                rand_t(4, 5, &mut rng),
                rand_t(4, 5, &mut rng),
                rand_t(1, 5, &mut rng),
                rand_t(5, 3, &mut rng),
                rand_t(5, 3, &mut rng),
                rand_t(3, 1, &mut rng),
            ];
            let scores: Arc<[f64]> = (0..g.num_slots()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let labels = Tensor::column((0..6).map(|i| (i % 2) as f64).collect());
            let g = Arc::clone(&g);
            let err = fd_check(&params, move |t, v| {
                let xv = t.constant(x.clone());
                let s1 = t.matmul(xv, v[0]).unwrap();
                let n1 = t.matmul(xv, v[1]).unwrap();
                let n1 = t.neighbor_mean(n1, &g).unwrap();
                let h1 = t.add(s1, n1).unwrap();
                let h1 = t.add(h1, v[2]).unwrap();
                let h1 = t.sigmoid(h1);
                let s2 = t.matmul(h1, v[3]).unwrap();
                let dir = t.matmul(v[2], v[4]).unwrap();
                let n2 = t.matmul(h1, v[4]).unwrap();
                let n2 = t.weighted_neighbor_mean(n2, &g, Arc::clone(&scores), dir).unwrap();
                let h2 = t.add(s2, n2).unwrap();
                let h2 = t.relu(h2);
                let out = t.matmul(h2, v[5]).unwrap();
                let y = t.constant(labels.clone());
                t.bce_with_logits(out, y).unwrap()
            });
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn bce_is_non_negative_and_zero_at_labels() {
        let mut t = Tape::new();
        let p = t.constant(Tensor::column(vec![1.0, 0.0, 1.0]));
        let y = t.constant(Tensor::column(vec![1.0, 0.0, 1.0]));
        let l = t.bce_loss(p, y).unwrap();
        assert!(t.value(l).item() >= 0.0 && t.value(l).item() < 1e-11);
        let q = t.constant(Tensor::column(vec![0.0, 1.0, 0.5]));
        let l2 = t.bce_loss(q, y).unwrap();
        assert!(t.value(l2).item().is_finite() && t.value(l2).item() > 1.0);
    }

    #[test]
    fn isolated_node_aggregates_to_zero() {
        let g = cycle_with_chord();
        let mut t = Tape::new();
        let h = t.constant(Tensor::filled(6, 2, 3.0));
        let dir = t.constant(Tensor::filled(1, 2, 1.0));
        let m = t.neighbor_mean(h, &g).unwrap();
        assert_eq!(t.value(m).row(5), &[0.0, 0.0]);
        let w = t.weighted_neighbor_mean(h, &g, Arc::from(vec![0.5; g.num_slots()]), dir).unwrap();
        assert_eq!(t.value(w).row(5), &[0.0, 0.0]);
        assert_eq!(t.value(w).row(0), &[3.5, 3.5]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
    }
}
