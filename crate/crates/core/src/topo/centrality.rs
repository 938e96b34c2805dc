use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CentralityKind, NodeScores};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
pub const DEFAULT_EIGEN_MAX_ITER: usize = 1000;

/// Above this many nodes, callers going through [`super::centrality`] get the
/// pivot-sampled betweenness estimate.
pub const APPROX_BETWEENNESS_NODE_LIMIT: usize = 50_000;

/// `d_u / (n - 1)`.
pub fn degree_centrality(g: &Graph) -> Result<NodeScores> {
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::Domain(format!(
            "degree centrality needs at least 2 nodes, graph has {n}"
        )));
    }
    let denom = (n - 1) as f64;
    Ok(NodeScores {
        kind: CentralityKind::Degree,
        values: (0..n).map(|u| g.degree(u) as f64 / denom).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct EigenvectorResult {
    pub scores: NodeScores,
    /// Rayleigh quotient `x^T A x` of the unit-norm result.
    pub eigenvalue: f64,
    /// `max_u |(Ax)_u - eigenvalue * x_u|`.
    pub residual: f64,
    pub iterations: usize,
}

/// Unit-L2 principal eigenvector of the adjacency matrix.
pub fn eigenvector_centrality(g: &Graph, tol: f64, max_iter: usize) -> Result<NodeScores> {
    eigenvector_centrality_detailed(g, tol, max_iter).map(|r| r.scores)
}

/// Power iteration from the uniform vector. Iterates `A + I`, which has the
/// same eigenvectors as `A` but a strictly dominant top eigenvalue, so
/// bipartite graphs (paths, stars) converge instead of oscillating. Stops when
/// the sup-norm change between iterates drops to `tol`.
pub fn eigenvector_centrality_detailed(g: &Graph, tol: f64, max_iter: usize) -> Result<EigenvectorResult> {
    let n = g.num_nodes();
    if g.num_edges() == 0 {
        return Err(Error::Domain("eigenvector centrality of an edgeless graph".into()));
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        for u in 0..n {
            next[u] = x[u] + g.neighbors(u).iter().map(|&v| x[v]).sum::<f64>();
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut change = 0.0f64;
        for (xi, yi) in x.iter_mut().zip(&next) {
            let y = yi / norm;
            change = change.max((y - *xi).abs());
            *xi = y;
        }
        if change <= tol {
            converged = true;
            break;
        }
    }

    let ax: Vec<f64> = (0..n)
        .map(|u| g.neighbors(u).iter().map(|&v| x[v]).sum())
        .collect();
    let eigenvalue: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    let residual = x
        .iter()
        .zip(&ax)
        .map(|(xi, axi)| (axi - eigenvalue * xi).abs())
        .fold(0.0, f64::max);
    if !converged {
        return Err(Error::Convergence { iterations, residual });
    }
    Ok(EigenvectorResult {
        scores: NodeScores {
            kind: CentralityKind::Eigenvector,
            values: x,
        },
        eigenvalue,
        residual,
        iterations,
    })
}

const SOURCES_PER_BLOCK: usize = 32;
const BLOCKS_PER_ROUND: usize = 64;

/// Exact unnormalized betweenness, each unordered pair `{s, t}` counted once.
///
/// Brandes' dependency accumulation, one BFS per source. Sources are grouped
/// into fixed blocks whose partial sums are added in block order, so the
/// result does not depend on the rayon thread count.
pub fn betweenness_centrality(g: &Graph) -> NodeScores {
    let sources: Vec<usize> = (0..g.num_nodes()).collect();
    let mut values = accumulate_dependencies(g, &sources);
    for v in &mut values {
        *v /= 2.0;
    }
    NodeScores {
        kind: CentralityKind::Betweenness,
        values,
    }
}

/// Betweenness estimated from `pivots` uniformly chosen sources, scaled by
/// `n / pivots`. Intended for graphs too large for the exact computation.
pub fn betweenness_centrality_sampled(g: &Graph, pivots: usize, seed: u64) -> NodeScores {
    let n = g.num_nodes();
    let k = pivots.min(n);
    if k == 0 {
        return NodeScores {
            kind: CentralityKind::Betweenness,
            values: vec![0.0; n],
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = sample(&mut rng, n, k).into_vec();
    sources.sort_unstable();
    let scale = n as f64 / k as f64 / 2.0;
    let mut values = accumulate_dependencies(g, &sources);
    for v in &mut values {
        *v *= scale;
    }
    NodeScores {
        kind: CentralityKind::Betweenness,
        values,
    }
}

fn accumulate_dependencies(g: &Graph, sources: &[usize]) -> Vec<f64> {
    let n = g.num_nodes();
    let mut total = vec![0.0; n];
    let blocks: Vec<&[usize]> = sources.chunks(SOURCES_PER_BLOCK).collect();
    for round in blocks.chunks(BLOCKS_PER_ROUND) {
        let partials: Vec<Vec<f64>> = round
            .par_iter()
            .map(|block| {
                let mut ws = BrandesWorkspace::new(n);
                let mut acc = vec![0.0; n];
                for &s in block.iter() {
                    ws.single_source(g, s, &mut acc);
                }
                acc
            })
            .collect();
        for p in partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
    }
    total
}

struct BrandesWorkspace {
    sigma: Vec<f64>,
    dist: Vec<i64>,
    delta: Vec<f64>,
    order: Vec<usize>,
    queue: VecDeque<usize>,
}

impl BrandesWorkspace {
    fn new(n: usize) -> Self {
        Self {
            sigma: vec![0.0; n],
            dist: vec![-1; n],
            delta: vec![0.0; n],
            order: Vec::with_capacity(n),
            queue: VecDeque::with_capacity(n),
        }
    }

    fn single_source(&mut self, g: &Graph, s: usize, acc: &mut [f64]) {
        for &v in &self.order {
            self.sigma[v] = 0.0;
            self.dist[v] = -1;
            self.delta[v] = 0.0;
        }
        self.order.clear();

        self.sigma[s] = 1.0;
        self.dist[s] = 0;
        self.queue.push_back(s);
        while let Some(v) = self.queue.pop_front() {
            self.order.push(v);
            let dv = self.dist[v];
            for &w in g.neighbors(v) {
                if self.dist[w] < 0 {
                    self.dist[w] = dv + 1;
                    self.queue.push_back(w);
                }
                if self.dist[w] == dv + 1 {
                    self.sigma[w] += self.sigma[v];
                }
            }
        }

        // Predecessors of w are exactly its neighbors one level closer to s.
        for &w in self.order.iter().rev() {
            let coeff = (1.0 + self.delta[w]) / self.sigma[w];
            let dw = self.dist[w];
            for &v in g.neighbors(w) {
                if self.dist[v] == dw - 1 {
                    self.delta[v] += self.sigma[v] * coeff;
                }
            }
            if w != s {
                acc[w] += self.delta[w];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeList;
    use approx::assert_abs_diff_eq;

    fn graph(pairs: &[(usize, usize)], n: usize) -> Graph {
        Graph::from_edges(&EdgeList::from_pairs(pairs.to_vec()).unwrap(), n).unwrap()
    }

    fn triangle() -> Graph {
        graph(&[(0, 1), (1, 2), (0, 2)], 3)
    }

    fn path3() -> Graph {
        graph(&[(0, 1), (1, 2)], 3)
    }

    fn star5() -> Graph {
        graph(&[(0, 1), (0, 2), (0, 3), (0, 4)], 5)
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degree_centrality(&triangle()).unwrap().values, vec![1.0; 3]);
        assert_eq!(degree_centrality(&path3()).unwrap().values, vec![0.5, 1.0, 0.5]);
        assert_eq!(
            degree_centrality(&star5()).unwrap().values,
            vec![1.0, 0.25, 0.25, 0.25, 0.25]
        );
        assert!(degree_centrality(&Graph::empty(1)).is_err());
    }

    #[test]
    fn eigenvector_examples() {
        let tri = eigenvector_centrality(&triangle(), 1e-12, 1000).unwrap();
        for v in tri.values {
            assert_abs_diff_eq!(v, 1.0 / 3f64.sqrt(), epsilon = 1e-10);
        }
        // Values from a dense symmetric eigensolver on the adjacency matrix.
        let star = eigenvector_centrality_detailed(&star5(), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(star.scores.values[0], 1.0 / 2f64.sqrt(), epsilon = 1e-10);
        for &v in &star.scores.values[1..] {
            assert_abs_diff_eq!(v, 1.0 / 8f64.sqrt(), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(star.eigenvalue, 2.0, epsilon = 1e-10);
        let path = eigenvector_centrality(&path3(), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(path.values[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(path.values[1], 1.0 / 2f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(path.values[2], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn eigenvector_errors() {
        assert!(matches!(
            eigenvector_centrality(&Graph::empty(3), 1e-10, 100),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eigenvector_centrality(&star5(), 1e-15, 2),
            Err(Error::Convergence { iterations: 2, .. })
        ));
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness_centrality(&path3()).values, vec![0.0, 1.0, 0.0]);
        assert_eq!(betweenness_centrality(&triangle()).values, vec![0.0; 3]);
        assert_eq!(betweenness_centrality(&star5()).values, vec![6.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(betweenness_centrality(&Graph::empty(3)).values, vec![0.0; 3]);
    }

    #[test]
    fn sampled_betweenness_with_all_pivots_is_exact() {
        let g = graph(&[(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)], 5);
        let exact = betweenness_centrality(&g).values;
        let sampled = betweenness_centrality_sampled(&g, 5, 9).values;
        for (a, b) in exact.iter().zip(&sampled) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }
}
