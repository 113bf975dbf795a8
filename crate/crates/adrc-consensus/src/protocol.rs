//! The consensus protocol: a saturated output-feedback term built from
//! neighbor differences of observer estimates, minus a saturated
//! compensation of the estimated total disturbance, optionally plus the
//! leader's input as feedforward. Also hosts the end-to-end gain design:
//! graph -> weights -> coupling constant -> Riccati feedback row.

use crate::linalg::{self, LinalgError, RiccatiSolution};
use crate::topology::{Digraph, Laplacian, TopologyError};
use thiserror::Error;

/// Everything the design pipeline produces for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub laplacian: Laplacian,
    /// Diagonal weighting solving `L1' W = 1`.
    pub w: Vec<f64>,
    /// Smallest eigenvalue of `W L1 + L1' W`.
    pub mu: f64,
    /// `mu / max_i W_i`, the Riccati coupling constant.
    pub mu0: f64,
    pub riccati: RiccatiSolution,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("Riccati design failed: {0}")]
    Riccati(#[from] LinalgError),
}

/// Continuously differentiable odd saturation: identity on `[-theta, theta]`,
/// a quadratic blend on `(theta, theta + 1]`, constant `theta + 1/2` beyond.
pub fn saturation(theta: f64, s: f64) -> f64 {
    debug_assert!(theta > 0.0, "saturation level must be positive");
    if s < 0.0 {
        return -saturation(theta, -s);
    }
    if s <= theta {
        s
    } else if s <= theta + 1.0 {
        -0.5 * s * s + (theta + 1.0) * s - 0.5 * theta * theta
    } else {
        theta + 0.5
    }
}

/// Neighborhood estimate disagreement for agent `i` (1-based), component
/// wise over the first `n` observer states:
/// `theta_q = sum_{j in N_i} (x̂̄_{iq} - x̂̄_{jq}) + a_i0 (x̂̄_{iq} - x_{0q})`.
/// The leader contributes its true state; it runs no observer.
pub fn aggregate_theta(
    graph: &Digraph,
    n: usize,
    agent: usize,
    xhats: &[&[f64]],
    x0: &[f64],
) -> Vec<f64> {
    let own = xhats[agent - 1];
    let mut theta = vec![0.0; n];
    for &j in graph.in_neighbors(agent) {
        let nbr = xhats[j - 1];
        for q in 0..n {
            theta[q] += own[q] - nbr[q];
        }
    }
    if graph.has_leader_edge(agent) {
        for q in 0..n {
            theta[q] += own[q] - x0[q];
        }
    }
    theta
}

/// The protocol input for one agent:
/// `u = sat_M(K . theta) - sat_N(x̂̄_{n+1}) [+ u0]`.
pub fn control_law(
    k_row: &[f64],
    m_level: f64,
    n_level: f64,
    theta: &[f64],
    xhat_np1: f64,
    u0_feedforward: Option<f64>,
) -> f64 {
    debug_assert_eq!(k_row.len(), theta.len());
    let mut k_theta = 0.0;
    for (k, th) in k_row.iter().zip(theta) {
        k_theta += k * th;
    }
    saturation(m_level, k_theta) - saturation(n_level, xhat_np1) + u0_feedforward.unwrap_or(0.0)
}

/// End-to-end gain design for a chain order `n` over a given topology.
/// Fails when the graph lacks a directed spanning tree or the Riccati
/// solve cannot certify a solution.
pub fn design_gains(graph: &Digraph, n: usize) -> Result<Design, DesignError> {
    if !graph.check_spanning_tree() {
        return Err(TopologyError::NoSpanningTree.into());
    }
    let laplacian = graph.build_laplacian();
    let w = crate::topology::compute_w(&laplacian.l1)?;
    let (mu, mu0) = crate::topology::compute_mu(&laplacian.l1, &w)?;
    let riccati = linalg::solve_care(n, mu0)?;
    Ok(Design {
        laplacian,
        w,
        mu,
        mu0,
        riccati,
    })
}
