//! Brute-force oracles shared by the integration suites. Everything here works
//! from a dense adjacency matrix and the textbook definitions, independently
//! of the library's CSR code paths.
#![allow(dead_code)]

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use ncsm::autodiff::{Tape, Tensor, Var};
use ncsm::graph::{EdgeList, Graph};
use rand::Rng;

pub fn graph_from(pairs: &[(usize, usize)], n: usize) -> Graph {
    Graph::from_edges(&EdgeList::from_pairs(pairs.to_vec()).unwrap(), n).unwrap()
}

/// G(n, p) with every unordered pair drawn independently.
pub fn erdos_renyi<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    graph_from(&pairs, n)
}

pub fn dense(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.num_nodes();
    let mut a = vec![vec![false; n]; n];
    for (u, v) in g.edges() {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

fn deg(a: &[Vec<bool>], u: usize) -> usize {
    a[u].iter().filter(|&&x| x).count()
}

fn common(a: &[Vec<bool>], u: usize, v: usize) -> Vec<usize> {
    (0..a.len()).filter(|&w| a[u][w] && a[v][w]).collect()
}

pub fn oracle_degree(a: &[Vec<bool>]) -> Vec<f64> {
    let n = a.len();
    (0..n).map(|u| deg(a, u) as f64 / (n - 1) as f64).collect()
}

pub fn oracle_jaccard(a: &[Vec<bool>], u: usize, v: usize) -> f64 {
    let union = (0..a.len()).filter(|&w| a[u][w] || a[v][w]).count();
    if union == 0 {
        0.0
    } else {
        common(a, u, v).len() as f64 / union as f64
    }
}

pub fn oracle_adamic_adar(a: &[Vec<bool>], u: usize, v: usize) -> f64 {
    common(a, u, v).iter().map(|&w| 1.0 / (deg(a, w) as f64).ln()).sum()
}

pub fn oracle_resource_allocation(a: &[Vec<bool>], u: usize, v: usize) -> f64 {
    common(a, u, v).iter().map(|&w| 1.0 / deg(a, w) as f64).sum()
}

fn bfs(a: &[Vec<bool>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; a.len()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for w in 0..a.len() {
            if a[u][w] && dist[w].is_none() {
                dist[w] = Some(dist[u].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    dist
}

/// Every shortest `s`-`t` path, listed explicitly.
pub fn shortest_paths(a: &[Vec<bool>], s: usize, t: usize) -> Vec<Vec<usize>> {
    let ds = bfs(a, s);
    let dt = bfs(a, t);
    let Some(len) = ds[t] else { return Vec::new() };
    let mut out = Vec::new();
    let mut stack = vec![vec![s]];
    while let Some(path) = stack.pop() {
        let u = *path.last().unwrap();
        if u == t {
            out.push(path);
            continue;
        }
        let du = ds[u].unwrap();
        for w in 0..a.len() {
            if a[u][w] && ds[w] == Some(du + 1) && dt[w].map(|d| du + 1 + d) == Some(len) {
                let mut next = path.clone();
                next.push(w);
                stack.push(next);
            }
        }
    }
    out
}

/// Sum over unordered pairs `{s, t}` of the fraction of shortest paths that
/// pass through `v` as an interior node.
pub fn oracle_betweenness(a: &[Vec<bool>]) -> Vec<f64> {
    let n = a.len();
    let mut b = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            let paths = shortest_paths(a, s, t);
            if paths.is_empty() {
                continue;
            }
            let total = paths.len() as f64;
            for (v, bv) in b.iter_mut().enumerate() {
                let through = paths.iter().filter(|p| p[1..p.len() - 1].contains(&v)).count();
                *bv += through as f64 / total;
            }
        }
    }
    b
}

pub fn is_connected(a: &[Vec<bool>]) -> bool {
    bfs(a, 0).iter().all(Option::is_some)
}

/// Unit-norm eigenvector of the largest eigenvalue, signed to a positive sum.
pub fn oracle_eigenvector(a: &[Vec<bool>]) -> Vec<f64> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| if a[i][j] { 1.0 } else { 0.0 });
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().enumerate().max_by(|x: &(usize, &f64), y| x.1.total_cmp(y.1)).unwrap().0;
    let mut x: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if x.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    x.iter_mut().for_each(|v| *v *= sign / norm);
    x
}

/// Pairwise comparison count with ties worth one half.
pub fn oracle_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in pos {
        for &q in neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Sum over ranked thresholds of recall increment times precision, ranking by
/// descending score with ties in input order.
pub fn oracle_average_precision(scores: &[f64], labels: &[bool]) -> f64 {
    let total = labels.iter().filter(|&&l| l).count() as f64;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap().then(i.cmp(&j)));
    let (mut ap, mut tp, mut prev_recall) = (0.0, 0.0, 0.0);
    for (n, &i) in idx.iter().enumerate() {
        if labels[i] {
            tp += 1.0;
        }
        let recall = tp / total;
        ap += (recall - prev_recall) * (tp / (n + 1) as f64);
        prev_recall = recall;
    }
    ap
}

/// A positive is a hit when fewer than `k` negatives score at least as high.
pub fn oracle_hits(pos: &[f64], neg: &[f64], k: usize) -> f64 {
    let hits = pos.iter().filter(|&&p| neg.iter().filter(|&&q| q >= p).count() < k).count();
    hits as f64 / pos.len() as f64
}

/// Worst relative disagreement between reverse-mode gradients and central
/// differences with step `1e-5`, over every entry of every parameter.
pub fn fd_check(params: &[Tensor], f: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
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
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}
