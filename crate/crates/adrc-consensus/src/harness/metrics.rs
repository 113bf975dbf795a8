//! Run metrics: practical-consensus tracking errors, total-disturbance
//! estimation errors, and state-norm peaks.
//!
//! The tail window is the second half of the horizon, `t ≥ T/2`: the
//! consensus notion is practical (errors enter a residual band after a
//! transient), so sup norms are taken after the transient has passed.
//! Tracking is measured between measured outputs, `|y_i − y_0|` with
//! `y_0 = x_{0,1}`, because the protocol only ever sees measured outputs.

use super::scenario::Scenario;
use crate::engine::Trace;
use crate::observer::estimation_errors;
use crate::plant::{total_disturbance_oracle, OracleError};

#[derive(Debug, Clone, PartialEq)]
pub struct AgentMetrics {
    /// 1-based agent index.
    pub agent: usize,
    /// `sup_{t ≥ T/2} |y_i(t) − y_0(t)|`.
    pub tail_sup_tracking: f64,
    /// `sup_{t ≥ T/2}` of the total-disturbance estimation error against
    /// the reconstruction oracle.
    pub tail_sup_estimation: f64,
    /// `sup_t ‖x_i(t)‖₂` over the whole horizon (plant states only).
    pub max_state_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Tuning gain the trace was produced with.
    pub r: f64,
    pub agents: Vec<AgentMetrics>,
    /// Largest per-agent state-norm peak.
    pub max_state_norm: f64,
    /// A finished trace implies a non-divergent run; kept for callers that
    /// aggregate reports from fallible sources.
    pub diverged: bool,
}

/// Compute the report for a finished trace. The scenario supplies the
/// channel functions and signals the oracle needs.
pub fn compute_metrics(trace: &Trace, scn: &Scenario) -> Result<MetricsReport, OracleError> {
    let n = trace.n();
    let tail_start = trace.time(trace.len() - 1) / 2.0;
    let mut agents = Vec::with_capacity(trace.m());
    for agent in 1..=trace.m() {
        let oracle = total_disturbance_oracle(&scn.followers[agent - 1], n, trace, agent)?;
        let est = estimation_errors(trace, agent, &oracle);
        let mut tracking = 0.0f64;
        let mut norm = 0.0f64;
        for k in 0..trace.len() {
            let x = trace.x(k, agent);
            norm = norm.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
            if trace.time(k) >= tail_start {
                tracking = tracking.max((trace.y(k, agent) - trace.x0(k)[0]).abs());
            }
        }
        agents.push(AgentMetrics {
            agent,
            tail_sup_tracking: tracking,
            tail_sup_estimation: est.tail_sup,
            max_state_norm: norm,
        });
    }
    let max_state_norm = agents
        .iter()
        .map(|a| a.max_state_norm)
        .fold(0.0f64, f64::max);
    Ok(MetricsReport {
        r: trace.meta.r,
        agents,
        max_state_norm,
        diverged: false,
    })
}
