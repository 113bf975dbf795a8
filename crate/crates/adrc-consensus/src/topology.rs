//! Directed communication topologies over one leader (vertex 0) and `m`
//! followers (vertices 1..=m), with the Laplacian machinery the gain design
//! rests on: the follower block `L1` of the graph Laplacian, the diagonal
//! weighting `W` solving `L1' W = 1`, and the coupling constants
//! `mu = lambda_min(W L1 + L1' W)` and `mu0 = mu / max_i W_i`.

use crate::linalg::{self, LinalgError, Matrix};
use crate::tol;
use std::collections::VecDeque;
use thiserror::Error;

/// Configuration cap on the follower count; everything here is dense and
/// design-time, so the cap is about catching typos, not performance.
pub const MAX_AGENTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("at least one follower is required")]
    NoAgents,
    #[error("{m} followers exceeds the supported maximum of {max}", max = MAX_AGENTS)]
    TooManyAgents { m: usize },
    #[error("edge ({from} -> {to}) references vertex beyond follower count {m}")]
    VertexOutOfRange { from: usize, to: usize, m: usize },
    #[error("self-loop on vertex {v}")]
    SelfLoop { v: usize },
    #[error("edge ({from} -> 0) points into the leader, which accepts no input")]
    LeaderInEdge { from: usize },
    #[error("graph has no directed spanning tree rooted at the leader")]
    NoSpanningTree,
    #[error("weight equation L1' W = 1 could not be solved: {0}")]
    WeightSolve(#[from] LinalgError),
    #[error("weight W[{agent}] = {value} is not positive; graph lacks a spanning tree")]
    NonpositiveWeight { agent: usize, value: f64 },
    #[error("weight residual {residual:.3e} exceeds {bound:.3e}")]
    WeightResidual { residual: f64, bound: f64 },
    #[error("coupling constant mu = {mu} is not positive")]
    NonpositiveMu { mu: f64 },
}

/// Unweighted directed graph on vertices `0..=m`, where 0 is the leader.
/// An edge `(j, i)` means information flows from `j` to `i`, i.e. agent `i`
/// observes `j`; the adjacency entry used by the protocol is
/// `a_ij = 1` iff `(j, i)` is an edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    m: usize,
    edges: Vec<(usize, usize)>,
    /// `in_nbrs[i - 1]`: sorted follower in-neighbors (j >= 1) of agent i.
    in_nbrs: Vec<Vec<usize>>,
    /// `leader_edge[i - 1]`: whether the leader feeds agent i directly.
    leader_edge: Vec<bool>,
}

impl Digraph {
    /// Validate and build. Duplicate edges collapse (adjacency is 0/1).
    pub fn new(m: usize, edges: &[(usize, usize)]) -> Result<Digraph, TopologyError> {
        if m == 0 {
            return Err(TopologyError::NoAgents);
        }
        if m > MAX_AGENTS {
            return Err(TopologyError::TooManyAgents { m });
        }
        let mut sorted: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(from, to) in edges {
            if from > m || to > m {
                return Err(TopologyError::VertexOutOfRange { from, to, m });
            }
            if from == to {
                return Err(TopologyError::SelfLoop { v: from });
            }
            if to == 0 {
                return Err(TopologyError::LeaderInEdge { from });
            }
            sorted.push((from, to));
        }
        sorted.sort_unstable();
        sorted.dedup();

        let mut in_nbrs = vec![Vec::new(); m];
        let mut leader_edge = vec![false; m];
        for &(from, to) in &sorted {
            if from == 0 {
                leader_edge[to - 1] = true;
            } else {
                in_nbrs[to - 1].push(from);
            }
        }
        Ok(Digraph {
            m,
            edges: sorted,
            in_nbrs,
            leader_edge,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted follower in-neighbors of agent `i` (1-based).
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_nbrs[i - 1]
    }

    /// Whether the leader feeds agent `i` directly (`a_i0 = 1`).
    pub fn has_leader_edge(&self, i: usize) -> bool {
        self.leader_edge[i - 1]
    }

    /// Whether every follower is reachable from the leader along directed
    /// edges — the spanning-tree condition the design requires.
    pub fn check_spanning_tree(&self) -> bool {
        let mut seen = vec![false; self.m + 1];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        let mut reached = 0usize;
        while let Some(v) = queue.pop_front() {
            for &(from, to) in &self.edges {
                if from == v && !seen[to] {
                    seen[to] = true;
                    reached += 1;
                    queue.push_back(to);
                }
            }
        }
        reached == self.m
    }

    /// Laplacian `L = D - A` over all `m + 1` vertices and its blocks: with
    /// the leader ordered first, `L = [[0, 0], [L0, L1]]`. Built in integer
    /// arithmetic and cast at the end, so entries are exact.
    pub fn build_laplacian(&self) -> Laplacian {
        let size = self.m + 1;
        let mut a = vec![vec![0i64; size]; size];
        for &(from, to) in &self.edges {
            a[to][from] = 1;
        }
        let mut full = Matrix::zeros(size, size);
        for i in 0..size {
            let degree: i64 = a[i].iter().sum();
            for j in 0..size {
                let val = if i == j { degree - a[i][j] } else { -a[i][j] };
                full[(i, j)] = val as f64;
            }
        }
        let mut l1 = Matrix::zeros(self.m, self.m);
        let mut l0 = vec![0.0; self.m];
        for i in 0..self.m {
            l0[i] = full[(i + 1, 0)];
            for j in 0..self.m {
                l1[(i, j)] = full[(i + 1, j + 1)];
            }
        }
        Laplacian { full, l0, l1 }
    }
}

/// Laplacian of a leader-follower digraph, partitioned as
/// `L = [[0, 0], [L0, L1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    /// Full `(m+1) x (m+1)` Laplacian.
    pub full: Matrix,
    /// Leader column of the follower rows (length `m`).
    pub l0: Vec<f64>,
    /// Follower-to-follower block (`m x m`), nonsingular iff the graph has
    /// a directed spanning tree rooted at the leader.
    pub l1: Matrix,
}

/// Diagonal weighting `W` with `L1' W = 1_m`; every entry is strictly
/// positive exactly when the spanning-tree condition holds.
pub fn compute_w(l1: &Matrix) -> Result<Vec<f64>, TopologyError> {
    let m = l1.rows();
    let ones = vec![1.0; m];
    let w = linalg::solve_linear(&l1.transpose(), &ones)?;
    for (idx, &wi) in w.iter().enumerate() {
        if wi <= 0.0 {
            return Err(TopologyError::NonpositiveWeight {
                agent: idx + 1,
                value: wi,
            });
        }
    }
    // Defensive residual check; Gaussian elimination on these small integer
    // systems is essentially exact.
    let lt = l1.transpose();
    let mut residual = 0.0f64;
    for i in 0..m {
        let mut s = -1.0;
        for j in 0..m {
            s += lt[(i, j)] * w[j];
        }
        residual = residual.max(s.abs());
    }
    if residual > tol::WEIGHT_RESIDUAL {
        return Err(TopologyError::WeightResidual {
            residual,
            bound: tol::WEIGHT_RESIDUAL,
        });
    }
    Ok(w)
}

/// Coupling constants `(mu, mu0)`: `mu` is the smallest eigenvalue of the
/// symmetric matrix `W L1 + L1' W`, and `mu0 = mu * lambda_min(W^-1)
/// = mu / max_i W_i` is the scalar handed to the Riccati design.
pub fn compute_mu(l1: &Matrix, w: &[f64]) -> Result<(f64, f64), TopologyError> {
    let m = l1.rows();
    assert_eq!(w.len(), m, "weight length mismatch");
    // S = W L1 + (W L1)' is symmetric by construction.
    let mut s = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            s[(i, j)] = w[i] * l1[(i, j)] + w[j] * l1[(j, i)];
        }
    }
    let mu = linalg::min_eigenvalue_symmetric(&s)?;
    if mu <= 0.0 {
        return Err(TopologyError::NonpositiveMu { mu });
    }
    let w_max = w.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok((mu, mu / w_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Benchmark topology: a tree 0 -> 1 -> {2 -> 3, 4 -> 5} plus the cycle
    /// closure 3 -> 1.
    pub(crate) fn benchmark_edges() -> Vec<(usize, usize)> {
        vec![(0, 1), (1, 2), (2, 3), (3, 1), (1, 4), (4, 5)]
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(matches!(
            Digraph::new(0, &[]),
            Err(TopologyError::NoAgents)
        ));
        assert!(matches!(
            Digraph::new(2, &[(1, 1)]),
            Err(TopologyError::SelfLoop { v: 1 })
        ));
        assert!(matches!(
            Digraph::new(2, &[(1, 0)]),
            Err(TopologyError::LeaderInEdge { from: 1 })
        ));
        assert!(matches!(
            Digraph::new(2, &[(1, 3)]),
            Err(TopologyError::VertexOutOfRange { .. })
        ));
        assert!(matches!(
            Digraph::new(17, &[(0, 1)]),
            Err(TopologyError::TooManyAgents { m: 17 })
        ));
    }

    #[test]
    fn spanning_tree_detection() {
        let g = Digraph::new(2, &[(0, 1), (1, 2)]).unwrap();
        assert!(g.check_spanning_tree());
        // Agent 2 unreachable: only an edge among followers.
        let g = Digraph::new(2, &[(0, 1)]).unwrap();
        assert!(!g.check_spanning_tree());
        // Wrong direction: 2 -> 1 does not help agent 2.
        let g = Digraph::new(2, &[(0, 1), (2, 1)]).unwrap();
        assert!(!g.check_spanning_tree());
    }

    #[test]
    fn chain_laplacian_blocks_are_exact() {
        let g = Digraph::new(2, &[(0, 1), (1, 2)]).unwrap();
        let lap = g.build_laplacian();
        // Leader row is zero.
        assert_eq!(lap.full.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(lap.l0, vec![-1.0, 0.0]);
        assert_eq!(lap.l1.row(0), &[1.0, 0.0]);
        assert_eq!(lap.l1.row(1), &[-1.0, 1.0]);
    }

    #[test]
    fn chain_weights_and_coupling() {
        let g = Digraph::new(2, &[(0, 1), (1, 2)]).unwrap();
        let lap = g.build_laplacian();
        let w = compute_w(&lap.l1).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        let (mu, mu0) = compute_mu(&lap.l1, &w).unwrap();
        // W L1 + L1' W = [[4, -1], [-1, 2]]: smallest eigenvalue 3 - sqrt(2).
        let want = 3.0 - std::f64::consts::SQRT_2;
        assert!((mu - want).abs() < 1e-10, "mu = {mu}");
        assert!((mu0 - want / 2.0).abs() < 1e-10, "mu0 = {mu0}");
    }

    #[test]
    fn single_follower_direct_edge() {
        let g = Digraph::new(1, &[(0, 1)]).unwrap();
        let lap = g.build_laplacian();
        let w = compute_w(&lap.l1).unwrap();
        assert_eq!(w, vec![1.0]);
        let (mu, mu0) = compute_mu(&lap.l1, &w).unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        assert!((mu0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn benchmark_topology_weights() {
        let g = Digraph::new(5, &benchmark_edges()).unwrap();
        assert!(g.check_spanning_tree());
        let lap = g.build_laplacian();
        let expect_l1 = [
            [2.0, 0.0, -1.0, 0.0, 0.0],
            [-1.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, -1.0, 1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, -1.0, 1.0],
        ];
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(lap.l1[(i, j)], expect_l1[i][j], "L1[{i}][{j}]");
            }
        }
        let w = compute_w(&lap.l1).unwrap();
        let want = [5.0, 7.0, 6.0, 2.0, 1.0];
        for i in 0..5 {
            assert!((w[i] - want[i]).abs() < 1e-10, "w[{i}] = {}", w[i]);
        }
        let (mu, mu0) = compute_mu(&lap.l1, &w).unwrap();
        assert!((mu - 1.453_047_932_796_945_9).abs() < 1e-9, "mu = {mu}");
        assert!((mu0 - 0.207_578_276_113_849_4).abs() < 1e-9, "mu0 = {mu0}");
    }

    #[test]
    fn weights_fail_without_spanning_tree() {
        let g = Digraph::new(2, &[(0, 1)]).unwrap();
        let lap = g.build_laplacian();
        // L1 = [[1, 0], [0, 0]] is singular.
        assert!(compute_w(&lap.l1).is_err());
    }

    #[test]
    fn in_neighbor_lists_are_deterministic() {
        let g = Digraph::new(3, &[(2, 3), (0, 1), (1, 3), (1, 2)]).unwrap();
        assert_eq!(g.in_neighbors(3), &[1, 2]);
        assert_eq!(g.in_neighbors(1), &[] as &[usize]);
        assert!(g.has_leader_edge(1));
        assert!(!g.has_leader_edge(3));
    }
}
