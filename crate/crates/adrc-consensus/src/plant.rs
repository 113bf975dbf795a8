//! Agent dynamics: heterogeneous integrator chains with lower-triangular
//! channel nonlinearities, per-channel external disturbances and output
//! measurement noise, plus the leader's reference chain.
//!
//! The module also hosts the *total disturbance oracle*: an a-posteriori
//! reconstruction of the lumped disturbance state from a recorded trace by
//! second-order finite differences (with the exact pointwise form replacing
//! the first differencing level for chains of order 2). Observer estimates
//! are judged against this reconstruction, which deliberately shares no code
//! path with the closed-loop integration.

use crate::engine::Trace;
use crate::expr::{EvalError, Expr, Signal};
use thiserror::Error;

/// Maximum supported chain order; scenario validation enforces it.
pub const MAX_ORDER: usize = 8;

/// Follower state variable names by channel, shared by the parser's
/// triangularity enforcement and the evaluator's bindings.
pub const X_NAMES: [&str; MAX_ORDER] = ["x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8"];

/// Leader state variable names, usable by the leader input expression.
pub const S_NAMES: [&str; MAX_ORDER] = ["s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8"];

/// One follower: channel nonlinearities `h[j]` over `(x1..x_{j+1}, d, t)`,
/// the matching per-channel disturbance signals, measurement noise and the
/// initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct FollowerSpec {
    /// `h[j]` perturbs channel `j + 1`; it may reference `x1..x_{j+1}`,
    /// `d` and `t`.
    pub h: Vec<Expr>,
    /// Disturbance signal bound to `d` inside `h[j]`, with symbolic
    /// derivatives up to the chain order.
    pub d: Vec<Signal>,
    /// Measurement noise with derivatives up to chain order + 1.
    pub w: Signal,
    pub x_init: Vec<f64>,
}

/// The leader: an unperturbed chain driven by a known input over its own
/// state (`s1..sn`) and time.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderSpec {
    pub u0: Expr,
    pub x_init: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("trace has {len} samples; the difference stencils need at least 3")]
    TraceTooShort { len: usize },
    #[error("pointwise level-2 reconstruction requires chain order 2, got {n}")]
    WrongOrder { n: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Follower vector field: `dx_j = x_{j+1} + h_j(x_1..x_j, d_j(t))` for
/// `j < n` and `dx_n = u + h_n(x_1..x_n, d_n(t))`.
pub fn follower_derivative(
    spec: &FollowerSpec,
    n: usize,
    t: f64,
    x: &[f64],
    u: f64,
    out: &mut [f64],
) -> Result<(), EvalError> {
    debug_assert!(n >= 1 && n <= MAX_ORDER);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), n);
    let mut bind: Vec<(&str, f64)> = Vec::with_capacity(n + 2);
    bind.push(("t", t));
    for j in 1..=n {
        // Bindings grow with the channel: [t, x1.. xj, d], with d rebound last.
        if j > 1 {
            bind.pop();
        }
        bind.push((X_NAMES[j - 1], x[j - 1]));
        let d_val = spec.d[j - 1].eval_deriv(0, t)?;
        bind.push(("d", d_val));
        let h_val = spec.h[j - 1].eval(&bind)?;
        out[j - 1] = h_val + if j < n { x[j] } else { u };
    }
    Ok(())
}

/// The leader's input evaluated on its current state.
pub fn leader_input(spec: &LeaderSpec, n: usize, t: f64, x0: &[f64]) -> Result<f64, EvalError> {
    debug_assert_eq!(x0.len(), n);
    let mut bind: Vec<(&str, f64)> = Vec::with_capacity(n + 1);
    for q in 0..n {
        bind.push((S_NAMES[q], x0[q]));
    }
    bind.push(("t", t));
    spec.u0.eval(&bind)
}

/// Leader vector field: a pure chain closed by `u0`.
pub fn leader_derivative(
    spec: &LeaderSpec,
    n: usize,
    t: f64,
    x0: &[f64],
    out: &mut [f64],
) -> Result<(), EvalError> {
    debug_assert_eq!(out.len(), n);
    let u0 = leader_input(spec, n, t, x0)?;
    for q in 0..n - 1 {
        out[q] = x0[q + 1];
    }
    out[n - 1] = u0;
    Ok(())
}

/// Measured (noisy) output `y = x_1 + w(t)`.
pub fn measured_output(spec: &FollowerSpec, t: f64, x: &[f64]) -> Result<f64, EvalError> {
    Ok(x[0] + spec.w.eval_deriv(0, t)?)
}

/// Second-order numerical differentiation on a uniform grid: central
/// differences inside, one-sided three-point stencils at the ends.
pub fn differentiate_series(f: &[f64], h: f64) -> Vec<f64> {
    assert!(f.len() >= 3, "difference stencils need at least 3 samples");
    assert!(h > 0.0);
    let n = f.len();
    let mut out = vec![0.0; n];
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for k in 1..n - 1 {
        out[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    out
}

/// Transformed first state `x̄_1 = x_1 + w` along a trace, recomputed from
/// the recorded physical state and the noise signal (not the recorded `y`).
fn xbar1_series(spec: &FollowerSpec, trace: &Trace, agent: usize) -> Result<Vec<f64>, OracleError> {
    let mut out = Vec::with_capacity(trace.len());
    for k in 0..trace.len() {
        out.push(trace.x(k, agent)[0] + spec.w.eval_deriv(0, trace.time(k))?);
    }
    Ok(out)
}

/// Exact pointwise second level for order-2 chains:
/// `x̄_2 = x_2 + h_1(x_1, d_1(t)) + w'(t)`.
pub fn xbar2_pointwise(
    spec: &FollowerSpec,
    n: usize,
    trace: &Trace,
    agent: usize,
) -> Result<Vec<f64>, OracleError> {
    if n != 2 {
        return Err(OracleError::WrongOrder { n });
    }
    let mut out = Vec::with_capacity(trace.len());
    for k in 0..trace.len() {
        let t = trace.time(k);
        let x = trace.x(k, agent);
        let d1 = spec.d[0].eval_deriv(0, t)?;
        let h1 = spec.h[0].eval(&[("t", t), (X_NAMES[0], x[0]), ("d", d1)])?;
        out.push(x[1] + h1 + spec.w.eval_deriv(1, t)?);
    }
    Ok(out)
}

/// Finite-difference second level `x̄_2 = D(x̄_1)`, the generic counterpart
/// of [`xbar2_pointwise`] used for cross-validation of the two forms.
pub fn xbar2_differenced(
    spec: &FollowerSpec,
    trace: &Trace,
    agent: usize,
) -> Result<Vec<f64>, OracleError> {
    if trace.len() < 3 {
        return Err(OracleError::TraceTooShort { len: trace.len() });
    }
    let xbar1 = xbar1_series(spec, trace, agent)?;
    Ok(differentiate_series(&xbar1, trace.sample_dt()))
}

/// Reconstruct the total disturbance `x̄_{n+1}` along a trace: differentiate
/// `x̄_1 = x_1 + w` up the chain (`x̄_{j+1} = D(x̄_j)`, with the exact
/// pointwise form for level 2 when `n = 2`), then remove the input from the
/// last level: `x̄_{n+1} = D(x̄_n) - u`.
pub fn total_disturbance_oracle(
    spec: &FollowerSpec,
    n: usize,
    trace: &Trace,
    agent: usize,
) -> Result<Vec<f64>, OracleError> {
    if trace.len() < 3 {
        return Err(OracleError::TraceTooShort { len: trace.len() });
    }
    let h = trace.sample_dt();
    let mut level = if n == 2 {
        xbar2_pointwise(spec, n, trace, agent)?
    } else {
        let mut level = xbar1_series(spec, trace, agent)?;
        for _ in 1..n {
            level = differentiate_series(&level, h);
        }
        level
    };
    level = differentiate_series(&level, h);
    for k in 0..trace.len() {
        level[k] -= trace.u(k, agent);
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn sig(src: &str, order: usize) -> Signal {
        Signal::new(parse(src, &[]).expect("test signal"), order)
    }

    /// First benchmark follower (exponential-growth class).
    fn follower_exponential() -> FollowerSpec {
        FollowerSpec {
            h: vec![
                parse("0.15*exp(x1) + 0.2*cos(x1)^3 + d^2", &["x1", "d"]).unwrap(),
                parse("0.3*x1 + 0.2*exp(0.01*x2) + d", &["x1", "x2", "d"]).unwrap(),
            ],
            d: vec![
                sig("0.5477225575051661*sin(2*t)", 2),
                sig("0.2*sin(t)", 2),
            ],
            w: sig("cos(t)", 3),
            x_init: vec![0.1, -0.4],
        }
    }

    #[test]
    fn follower_vector_field_matches_hand_arithmetic() {
        let spec = follower_exponential();
        let mut out = [0.0; 2];
        follower_derivative(&spec, 2, 0.0, &[0.1, -0.4], 0.0, &mut out).expect("eval");
        // Channel 1: x2 + 0.15 e^{x1} + 0.2 cos^3(x1) + d^2, d(0) = 0.
        let c = 0.1f64.cos();
        let want1 = -0.4 + 0.15 * 0.1f64.exp() + 0.2 * (c * c * c);
        assert!((out[0] - want1).abs() < 1e-15, "got {} want {want1}", out[0]);
        // Channel 2: u + 0.3 x1 + 0.2 e^{0.01 x2} + d, d(0) = 0, u = 0.
        let want2 = 0.3 * 0.1 + 0.2 * (0.01f64 * -0.4).exp();
        assert!((out[1] - want2).abs() < 1e-15, "got {} want {want2}", out[1]);

        // The input enters only the last channel.
        let mut with_u = [0.0; 2];
        follower_derivative(&spec, 2, 0.0, &[0.1, -0.4], 1.5, &mut with_u).expect("eval");
        assert_eq!(with_u[0], out[0]);
        assert!((with_u[1] - (out[1] + 1.5)).abs() < 1e-15);
    }

    #[test]
    fn leader_chain_and_input() {
        let leader = LeaderSpec {
            u0: parse("-s1 - 2*s2 + cos(s1^2 + s2^2)", &["s1", "s2"]).unwrap(),
            x_init: vec![0.3, 0.2],
        };
        let u0 = leader_input(&leader, 2, 0.0, &[0.3, 0.2]).expect("eval");
        let want = -0.3 - 2.0 * 0.2 + (0.3f64 * 0.3 + 0.2 * 0.2).cos();
        assert!((u0 - want).abs() < 1e-15);
        let mut out = [0.0; 2];
        leader_derivative(&leader, 2, 0.0, &[0.3, 0.2], &mut out).expect("eval");
        assert_eq!(out[0], 0.2);
        assert_eq!(out[1], u0);
    }

    #[test]
    fn measured_output_adds_noise() {
        let spec = follower_exponential();
        let y = measured_output(&spec, 0.0, &[0.1, -0.4]).expect("eval");
        assert!((y - (0.1 + 1.0)).abs() < 1e-15, "w(0) = cos 0 = 1");
    }

    #[test]
    fn difference_stencils_are_second_order_exact() {
        // All three stencils are exact on quadratics.
        let h = 0.1;
        let f: Vec<f64> = (0..20).map(|k| {
            let t = k as f64 * h;
            3.0 * t * t - 2.0 * t + 1.0
        }).collect();
        let df = differentiate_series(&f, h);
        for (k, d) in df.iter().enumerate() {
            let t = k as f64 * h;
            assert!((d - (6.0 * t - 2.0)).abs() < 1e-12, "k={k}: {d}");
        }
    }
}
