//! Deterministic fixed-step closed-loop integration.
//!
//! The full state is stacked as `[x0 | x_1, x̂_1 | x_2, x̂_2 | ...]`: the
//! leader's `n` states, then per follower its `n` plant states followed by
//! its `n + 1` observer states. Every derivative evaluation follows one
//! fixed order — leader input, measured outputs, protocol inputs, then the
//! leader / plant / observer vector fields agent by agent — so a run is a
//! pure function of the scenario and reruns are bit-identical. Noise and
//! disturbance signals are evaluated inside every RK4 stage; nothing is
//! sampled-and-held.

use crate::expr::EvalError;
use crate::observer::{eso_derivative, EsoGains};
use crate::plant::{follower_derivative, leader_input, measured_output, FollowerSpec, LeaderSpec};
use crate::protocol::{aggregate_theta, control_law};
use crate::tol;
use crate::topology::Digraph;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state diverged at t = {t}: component {index} exceeded {limit:e} in magnitude")]
    Divergence { t: f64, index: usize, limit: f64 },
    #[error("non-finite state component {index} at t = {t}")]
    NonFinite { t: f64, index: usize },
    #[error("expression evaluation failed at t = {t}: {source}")]
    Eval { t: f64, source: EvalError },
}

/// Integration settings. `t_final` is rounded to a whole number of steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `record_stride`-th step (plus the initial state).
    pub record_stride: usize,
}

/// The assembled closed loop: plants, observers and protocol wiring.
#[derive(Debug, Clone)]
pub struct System {
    pub n: usize,
    pub m: usize,
    pub graph: Digraph,
    pub leader: LeaderSpec,
    pub followers: Vec<FollowerSpec>,
    pub eso: EsoGains,
    /// Riccati feedback row applied to the aggregated estimates.
    pub k_row: Vec<f64>,
    /// Saturation level of the consensus term.
    pub m_level: f64,
    /// Per-agent saturation levels of the disturbance compensation.
    pub n_levels: Vec<f64>,
    /// Whether the leader's input is added to every agent's input.
    pub leader_feedforward: bool,
}

/// Per-instant protocol values shared by the vector field and the recorder.
#[derive(Debug, Clone, PartialEq)]
pub struct StageValues {
    pub u0: f64,
    /// Measured outputs `y_i`.
    pub y: Vec<f64>,
    /// Applied inputs `u_i`.
    pub u: Vec<f64>,
}

impl System {
    pub fn state_dim(&self) -> usize {
        self.n + self.m * (2 * self.n + 1)
    }

    fn x_start(&self, agent: usize) -> usize {
        self.n + (agent - 1) * (2 * self.n + 1)
    }

    fn xhat_start(&self, agent: usize) -> usize {
        self.x_start(agent) + self.n
    }

    /// Leader and follower states from their configured initial values,
    /// observers at zero.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.state_dim()];
        y[..self.n].copy_from_slice(&self.leader.x_init);
        for (idx, f) in self.followers.iter().enumerate() {
            let s = self.x_start(idx + 1);
            y[s..s + self.n].copy_from_slice(&f.x_init);
        }
        y
    }

    /// Evaluate the protocol pipeline at one instant, in the fixed order:
    /// leader input, then measured outputs (ascending agents), then inputs
    /// (ascending agents).
    pub fn stage(&self, t: f64, state: &[f64]) -> Result<StageValues, SimError> {
        let wrap = |source: EvalError| SimError::Eval { t, source };
        let x0 = &state[..self.n];
        let u0 = leader_input(&self.leader, self.n, t, x0).map_err(wrap)?;
        let mut y = Vec::with_capacity(self.m);
        for i in 1..=self.m {
            let s = self.x_start(i);
            y.push(
                measured_output(&self.followers[i - 1], t, &state[s..s + self.n]).map_err(wrap)?,
            );
        }
        let xhats: Vec<&[f64]> = (1..=self.m)
            .map(|i| {
                let s = self.xhat_start(i);
                &state[s..s + self.n + 1]
            })
            .collect();
        let ff = self.leader_feedforward.then_some(u0);
        let mut u = Vec::with_capacity(self.m);
        for i in 1..=self.m {
            let theta = aggregate_theta(&self.graph, self.n, i, &xhats, x0);
            u.push(control_law(
                &self.k_row,
                self.m_level,
                self.n_levels[i - 1],
                &theta,
                xhats[i - 1][self.n],
                ff,
            ));
        }
        Ok(StageValues { u0, y, u })
    }

    /// Full closed-loop vector field, written into `out`.
    pub fn derivative(&self, t: f64, state: &[f64], out: &mut [f64]) -> Result<(), SimError> {
        debug_assert_eq!(state.len(), self.state_dim());
        debug_assert_eq!(out.len(), self.state_dim());
        let wrap = |source: EvalError| SimError::Eval { t, source };
        let sv = self.stage(t, state)?;

        // Leader chain closed by the input already evaluated in `stage`.
        for q in 0..self.n - 1 {
            out[q] = state[q + 1];
        }
        out[self.n - 1] = sv.u0;

        for i in 1..=self.m {
            let xs = self.x_start(i);
            let os = self.xhat_start(i);
            follower_derivative(
                &self.followers[i - 1],
                self.n,
                t,
                &state[xs..xs + self.n],
                sv.u[i - 1],
                &mut out[xs..xs + self.n],
            )
            .map_err(wrap)?;
            // The observer sees exactly the y and u applied to the plant.
            let (xhat, out_xhat) = (
                &state[os..os + self.n + 1],
                &mut out[os..os + self.n + 1],
            );
            eso_derivative(&self.eso, self.n, xhat, sv.y[i - 1], sv.u[i - 1], out_xhat);
        }
        Ok(())
    }
}

/// One classical Runge-Kutta step of width `dt` for an arbitrary vector
/// field `f(t, state, out)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>, SimError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), SimError>,
{
    let dim = y.len();
    let mut k1 = vec![0.0; dim];
    f(t, y, &mut k1)?;
    let mut tmp: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * dt * k1[i]).collect();
    let mut k2 = vec![0.0; dim];
    f(t + 0.5 * dt, &tmp, &mut k2)?;
    for i in 0..dim {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    let mut k3 = vec![0.0; dim];
    f(t + 0.5 * dt, &tmp, &mut k3)?;
    for i in 0..dim {
        tmp[i] = y[i] + dt * k3[i];
    }
    let mut k4 = vec![0.0; dim];
    f(t + dt, &tmp, &mut k4)?;
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        out.push(y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    Ok(out)
}

/// Run provenance and settings, embedded in every trace.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    pub scenario_name: String,
    /// Hash of the canonical scenario serialization.
    pub scenario_hash: u64,
    pub r: f64,
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub eso_k: Vec<f64>,
    pub k_row: Vec<f64>,
    pub mu0: f64,
    /// Human-readable log of command-line overrides applied on top of the
    /// scenario file.
    pub overrides: Vec<String>,
    pub warnings: Vec<String>,
}

/// Recorded closed-loop history on a uniform time grid. Rows hold, in
/// order: leader states, then per agent its plant states, observer states,
/// input and measured output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    n: usize,
    m: usize,
    sample_dt: f64,
    times: Vec<f64>,
    data: Vec<f64>,
    pub meta: TraceMeta,
}

impl Trace {
    fn row_width(n: usize, m: usize) -> usize {
        n + m * (2 * n + 3)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of recorded samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Spacing of the recorded grid (`dt * record_stride`).
    pub fn sample_dt(&self) -> f64 {
        self.sample_dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    /// Full data row at sample `k` (everything but the timestamp).
    pub fn row(&self, k: usize) -> &[f64] {
        let w = Self::row_width(self.n, self.m);
        &self.data[k * w..(k + 1) * w]
    }

    pub fn x0(&self, k: usize) -> &[f64] {
        &self.row(k)[..self.n]
    }

    fn agent_start(&self, agent: usize) -> usize {
        self.n + (agent - 1) * (2 * self.n + 3)
    }

    /// Plant states of `agent` (1-based) at sample `k`.
    pub fn x(&self, k: usize, agent: usize) -> &[f64] {
        let s = self.agent_start(agent);
        &self.row(k)[s..s + self.n]
    }

    /// Observer states of `agent` at sample `k` (length `n + 1`).
    pub fn xhat(&self, k: usize, agent: usize) -> &[f64] {
        let s = self.agent_start(agent) + self.n;
        &self.row(k)[s..s + self.n + 1]
    }

    pub fn u(&self, k: usize, agent: usize) -> f64 {
        self.row(k)[self.agent_start(agent) + 2 * self.n + 1]
    }

    pub fn y(&self, k: usize, agent: usize) -> f64 {
        self.row(k)[self.agent_start(agent) + 2 * self.n + 2]
    }
}

/// Integrate the closed loop. Aborts with the blow-up time as soon as any
/// state component leaves `[-limit, limit]` (`tol::DIVERGENCE`) or turns
/// non-finite. A step size above `tol::STIFFNESS_FACTOR / r` is legal but
/// recorded as a warning in the trace metadata.
pub fn run(sys: &System, cfg: &SimConfig, mut meta: TraceMeta) -> Result<Trace, SimError> {
    assert!(cfg.dt > 0.0 && cfg.dt.is_finite(), "dt must be positive");
    assert!(cfg.t_final >= cfg.dt, "t_final must cover at least one step");
    assert!(cfg.record_stride >= 1, "record_stride must be at least 1");

    if cfg.dt > tol::STIFFNESS_FACTOR / sys.eso.r {
        meta.warnings.push(format!(
            "dt = {} exceeds {} / r = {}; observer modes near -{} may be under-resolved",
            cfg.dt,
            tol::STIFFNESS_FACTOR,
            tol::STIFFNESS_FACTOR / sys.eso.r,
            sys.eso.r
        ));
    }

    let steps = ((cfg.t_final / cfg.dt).round() as usize).max(1);
    let stride = cfg.record_stride;
    let width = Trace::row_width(sys.n, sys.m);
    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut data = Vec::with_capacity((steps / stride + 2) * width);

    let record = |t: f64, state: &[f64], times: &mut Vec<f64>, data: &mut Vec<f64>| -> Result<(), SimError> {
        let sv = sys.stage(t, state)?;
        times.push(t);
        data.extend_from_slice(&state[..sys.n]);
        for i in 1..=sys.m {
            let xs = sys.x_start(i);
            data.extend_from_slice(&state[xs..xs + 2 * sys.n + 1]);
            data.push(sv.u[i - 1]);
            data.push(sv.y[i - 1]);
        }
        Ok(())
    };

    let mut y = sys.initial_state();
    record(0.0, &y, &mut times, &mut data)?;
    for step in 0..steps {
        let t = step as f64 * cfg.dt;
        y = rk4_step(&mut |t, s, o| sys.derivative(t, s, o), t, &y, cfg.dt)?;
        let t_next = (step + 1) as f64 * cfg.dt;
        for (index, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(SimError::NonFinite { t: t_next, index });
            }
            if v.abs() > tol::DIVERGENCE {
                return Err(SimError::Divergence {
                    t: t_next,
                    index,
                    limit: tol::DIVERGENCE,
                });
            }
        }
        if (step + 1) % stride == 0 {
            record(t_next, &y, &mut times, &mut data)?;
        }
    }

    Ok(Trace {
        n: sys.n,
        m: sys.m,
        sample_dt: cfg.dt * stride as f64,
        times,
        data,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Signal};

    fn sig(src: &str, order: usize) -> Signal {
        Signal::new(parse(src, &[]).expect("test signal"), order)
    }

    /// Order-1 single-follower loop with configurable channel dynamics.
    fn tiny_system(h1: &str, m_level: f64) -> System {
        let n = 1;
        System {
            n,
            m: 1,
            graph: Digraph::new(1, &[(0, 1)]).unwrap(),
            leader: LeaderSpec {
                u0: parse("0", &["s1"]).unwrap(),
                x_init: vec![0.0],
            },
            followers: vec![FollowerSpec {
                h: vec![parse(h1, &["x1", "d"]).unwrap()],
                d: vec![sig("0", n)],
                w: sig("0", n + 1),
                x_init: vec![0.1],
            }],
            eso: EsoGains {
                k: vec![2.0, 1.0],
                r: 10.0,
            },
            k_row: vec![-1.0],
            m_level,
            n_levels: vec![m_level],
            leader_feedforward: false,
        }
    }

    #[test]
    fn rk4_reaches_fourth_order_on_exponential() {
        // One step of dy/dt = y from 1: compare against e^dt.
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
            out[0] = y[0];
            Ok(())
        };
        let mut err_prev = f64::NAN;
        for &dt in &[0.1, 0.05, 0.025] {
            let y1 = rk4_step(&mut f, 0.0, &[1.0], dt).unwrap();
            let err = (y1[0] - dt.exp()).abs();
            if !err_prev.is_nan() {
                let order = (err_prev / err).log2();
                assert!(order > 4.5, "local order {order}"); // local error ~ dt^5
            }
            err_prev = err;
        }
    }

    #[test]
    fn reruns_are_bit_identical() {
        let sys = tiny_system("0.3*sin(x1) + d", 5.0);
        let cfg = SimConfig {
            dt: 1e-3,
            t_final: 2.0,
            record_stride: 10,
        };
        let a = run(&sys, &cfg, TraceMeta::default()).unwrap();
        let b = run(&sys, &cfg, TraceMeta::default()).unwrap();
        assert_eq!(a.data, b.data, "identical runs must agree bit-for-bit");
        assert_eq!(a.times, b.times);
    }

    #[test]
    fn recording_grid_is_uniform() {
        let sys = tiny_system("0", 5.0);
        let cfg = SimConfig {
            dt: 1e-3,
            t_final: 1.0,
            record_stride: 100,
        };
        let trace = run(&sys, &cfg, TraceMeta::default()).unwrap();
        assert_eq!(trace.len(), 11);
        assert!((trace.sample_dt() - 0.1).abs() < 1e-15);
        for k in 0..trace.len() {
            assert!((trace.time(k) - k as f64 * 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_plant_with_weak_input_diverges() {
        // dx = 5x with |u| <= 0.2 cannot be contained: divergence abort.
        let sys = tiny_system("5*x1", 0.1);
        let cfg = SimConfig {
            dt: 1e-3,
            t_final: 10.0,
            record_stride: 1,
        };
        match run(&sys, &cfg, TraceMeta::default()) {
            Err(SimError::Divergence { t, .. }) => {
                assert!(t > 3.0 && t < 6.0, "blow-up time {t}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn stiffness_warning_is_recorded() {
        let mut sys = tiny_system("0", 5.0);
        sys.eso.r = 100.0;
        let cfg = SimConfig {
            dt: 0.01,
            t_final: 0.1,
            record_stride: 1,
        };
        let trace = run(&sys, &cfg, TraceMeta::default()).unwrap();
        assert_eq!(trace.meta.warnings.len(), 1);
        assert!(trace.meta.warnings[0].contains("under-resolved"));

        let fine = SimConfig {
            dt: 1e-3,
            t_final: 0.1,
            record_stride: 1,
        };
        let trace = run(&sys, &fine, TraceMeta::default()).unwrap();
        assert!(trace.meta.warnings.is_empty());
    }

    #[test]
    fn observer_tracks_known_disturbance_in_closed_loop() {
        // Channel feels d = sin t directly: the total disturbance equals
        // sin t, and after the transient the ESO estimate must track it.
        // The error transfer at unit frequency is roughly k1/(k2 r), so
        // r = 40 puts the expected tail amplitude near 0.05.
        let mut sys = tiny_system("d", 5.0);
        sys.eso.r = 40.0;
        sys.followers[0].d[0] = sig("sin(t)", 1);
        sys.followers[0].x_init = vec![0.0];
        let cfg = SimConfig {
            dt: 1e-3,
            t_final: 10.0,
            record_stride: 1,
        };
        let trace = run(&sys, &cfg, TraceMeta::default()).unwrap();
        let mut worst = 0.0f64;
        for k in 0..trace.len() {
            let t = trace.time(k);
            if t < 5.0 {
                continue;
            }
            let err = (trace.xhat(k, 1)[1] - t.sin()).abs();
            worst = worst.max(err);
        }
        assert!(worst < 0.1, "tail estimation error {worst}");
    }
}
