//! The built-in verification suite: fast, self-contained checks of every
//! layer, runnable from the CLI. Each check is independent; all results
//! are reported even when early checks fail.
//!
//! The suite also exposes its rig scenarios (`eso_rig_scenario`,
//! `zero_disturbance_scenario`, `smooth_scenario`, …) so integration tests
//! can drive the same configurations.

use super::metrics::compute_metrics;
use super::scenario::Scenario;
use super::scenarios;
use super::{run_scenario, HarnessError};
use crate::engine::rk4_step;
use crate::linalg::{hurwitz_check, solve_lyapunov, Matrix};
use crate::protocol::saturation;
use crate::topology::Digraph;
use crate::{expr, tol};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Run every check; failures never abort the suite.
pub fn run_all() -> Vec<CheckResult> {
    let checks: Vec<(&'static str, fn() -> Result<String, String>)> = vec![
        ("topology/benchmark-weights", check_benchmark_weights),
        ("topology/spanning-tree-detection", check_spanning_tree_detection),
        ("matrixkit/riccati-benchmark", check_riccati_benchmark),
        ("matrixkit/lyapunov-residual", check_lyapunov_residual),
        ("matrixkit/hurwitz-classifier", check_hurwitz_classifier),
        ("protocol/saturation-shape", check_saturation_shape),
        ("observer/eso-gain-scaling", check_eso_gain_scaling),
        ("engine/rk4-exponential", check_rk4_exponential),
        ("engine/zero-scenario", check_zero_scenario),
        ("engine/zero-disturbance-estimation", check_zero_disturbance),
        ("engine/determinism", check_determinism),
        ("engine/step-halving-order", check_step_halving_order),
        ("engine/benchmark-derivative-smoke", check_benchmark_derivative),
        ("scenario/round-trip", check_scenario_round_trip),
        ("scenario/validation-rejects-bad-gains", check_rejects_bad_gains),
    ];
    checks
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(detail) => CheckResult {
                name,
                passed: true,
                detail,
            },
            Err(detail) => CheckResult {
                name,
                passed: false,
                detail,
            },
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Shared rigs
// ---------------------------------------------------------------------------

/// Benchmark follower graph (leader = 0).
pub fn benchmark_edges() -> Vec<(usize, usize)> {
    vec![(0, 1), (1, 2), (2, 3), (3, 1), (1, 4), (4, 5)]
}

/// Single second-order follower whose total disturbance is exactly
/// `sin t`: channel 1 clean, channel 2 driven by the disturbance alone,
/// no noise. Used to measure the observer's `1/r` error law.
pub fn eso_rig_scenario(r: f64) -> Scenario {
    let src = format!(
        "\
[meta]
name = eso_rig
order = 2

[topology]
followers = 1
0 -> 1

[leader]
x0 = 0, 0
u0 = \"0\"

[agent.1]
x0 = 0, 0
h1 = \"0\"
d1 = \"0\"
h2 = \"d\"
d2 = \"sin(t)\"
w = \"0\"

[observer]
k = 3, 3, 1
r = {r}

[protocol]
leader_feedforward = false

[sim]
dt = 0.001
t_final = 20
record_stride = 10
"
    );
    Scenario::parse(&src).expect("rig scenario is valid")
}

/// Tail-sup estimation error of the rig against the analytic disturbance.
pub fn eso_rig_error(r: f64) -> Result<f64, HarnessError> {
    let scn = eso_rig_scenario(r);
    let trace = run_scenario(&scn)?;
    let tail_start = trace.time(trace.len() - 1) / 2.0;
    let mut worst = 0.0f64;
    for k in 0..trace.len() {
        let t = trace.time(k);
        if t >= tail_start {
            worst = worst.max((trace.xhat(k, 1)[2] - t.sin()).abs());
        }
    }
    Ok(worst)
}

/// Benchmark topology and initial values with every channel function,
/// disturbance, and noise forced to zero: the total disturbance vanishes
/// identically while the leader still moves.
pub fn zero_disturbance_scenario() -> Scenario {
    let mut scn = Scenario::parse(scenarios::S4_PARA1).expect("shipped scenario");
    scn.name = "zero_disturbance".into();
    let n = scn.n;
    for f in &mut scn.followers {
        for h in &mut f.h {
            *h = expr::Expr::constant(0.0);
        }
        for d in &mut f.d {
            *d = expr::Signal::new(expr::Expr::constant(0.0), n);
        }
        f.w = expr::Signal::new(expr::Expr::constant(0.0), n + 1);
    }
    scn
}

/// Noise-free benchmark dynamics at tenth-scale initial values: the observer
/// transient peak stays strictly inside both saturation knees (the extended
/// estimate peaks near 27 |y(0)| for these gains), so the closed loop is
/// smooth and suitable for measuring integrator order.
pub fn smooth_scenario() -> Scenario {
    let mut scn = Scenario::parse(scenarios::S4_PARA1).expect("shipped scenario");
    scn.name = "smooth".into();
    let n = scn.n;
    for f in &mut scn.followers {
        f.w = expr::Signal::new(expr::Expr::constant(0.0), n + 1);
        for v in &mut f.x_init {
            *v *= 0.1;
        }
    }
    for v in &mut scn.leader.x_init {
        *v *= 0.1;
    }
    scn
}

/// Integrate `scn` over `t_final` at step `dt`, recording only the final
/// sample, and return that full data row.
pub fn final_row(mut scn: Scenario, t_final: f64, dt: f64) -> Result<Vec<f64>, HarnessError> {
    scn.sim.dt = dt;
    scn.sim.t_final = t_final;
    scn.sim.record_stride = (t_final / dt).round() as usize;
    let trace = run_scenario(&scn)?;
    Ok(trace.row(trace.len() - 1).to_vec())
}

/// Observed order of convergence from three runs at `dt`, `dt/2`, `dt/4`.
pub fn convergence_order(scn: &Scenario, t_final: f64, dt: f64) -> Result<f64, HarnessError> {
    let a = final_row(scn.clone(), t_final, dt)?;
    let b = final_row(scn.clone(), t_final, dt / 2.0)?;
    let c = final_row(scn.clone(), t_final, dt / 4.0)?;
    let dist = |u: &[f64], v: &[f64]| {
        u.iter()
            .zip(v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    let d1 = dist(&a, &b);
    let d2 = dist(&b, &c);
    if d2 <= 1e-13 {
        // Below measurable resolution: treat as fully converged.
        return Ok(f64::INFINITY);
    }
    Ok((d1 / d2).log2())
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

fn check_benchmark_weights() -> Result<String, String> {
    let graph = Digraph::new(5, &benchmark_edges()).map_err(|e| e.to_string())?;
    let design = crate::protocol::design_gains(&graph, 2).map_err(|e| e.to_string())?;
    let expect = [5.0, 7.0, 6.0, 2.0, 1.0];
    for (i, (&got, &want)) in design.w.iter().zip(&expect).enumerate() {
        if (got - want).abs() > tol::WEIGHT_RESIDUAL {
            return Err(format!("W[{i}] = {got}, expected {want}"));
        }
    }
    let mu0_ref = 0.2075782761138494;
    if (design.mu0 - mu0_ref).abs() > 1e-9 {
        return Err(format!("mu0 = {}, expected {mu0_ref}", design.mu0));
    }
    Ok(format!(
        "W = (5, 7, 6, 2, 1), mu = {:.9}, mu0 = {:.9}",
        design.mu, design.mu0
    ))
}

fn check_spanning_tree_detection() -> Result<String, String> {
    let mut edges = benchmark_edges();
    edges.retain(|&e| e != (4, 5));
    let graph = Digraph::new(5, &edges).map_err(|e| e.to_string())?;
    if graph.check_spanning_tree() {
        return Err("graph without a path to agent 5 passed the spanning-tree check".into());
    }
    Ok("unreachable follower detected".into())
}

fn check_riccati_benchmark() -> Result<String, String> {
    let graph = Digraph::new(5, &benchmark_edges()).map_err(|e| e.to_string())?;
    let design = crate::protocol::design_gains(&graph, 2).map_err(|e| e.to_string())?;
    let p_ref = [[2.3216, 2.1949], [2.1949, 5.0956]];
    for i in 0..2 {
        for j in 0..2 {
            let got = design.riccati.p[(i, j)];
            if (got - p_ref[i][j]).abs() > 2e-3 {
                return Err(format!("P[{i}][{j}] = {got}, expected {}", p_ref[i][j]));
            }
        }
    }
    let k_ref = [-2.1949, -5.0956];
    for (j, &want) in k_ref.iter().enumerate() {
        let got = design.riccati.k[j];
        if (got - want).abs() > 2e-3 {
            return Err(format!("K[{j}] = {got}, expected {want}"));
        }
    }
    if design.riccati.residual > tol::CARE_RESIDUAL {
        return Err(format!("Riccati residual {}", design.riccati.residual));
    }
    Ok(format!(
        "K = ({:.4}, {:.4}), residual = {:.2e}",
        design.riccati.k[0], design.riccati.k[1], design.riccati.residual
    ))
}

fn check_lyapunov_residual() -> Result<String, String> {
    // Companion matrix of the benchmark observer polynomial s^3+3s^2+3s+1.
    let u = Matrix::from_rows(&[&[-3.0, 1.0, 0.0], &[-3.0, 0.0, 1.0], &[-1.0, 0.0, 0.0]]);
    let q = Matrix::identity(3);
    let x = solve_lyapunov(&u, &q).map_err(|e| e.to_string())?;
    let residual = u
        .transpose()
        .matmul(&x)
        .add(&x.matmul(&u))
        .add(&q)
        .max_abs();
    if residual > tol::LYAPUNOV_RESIDUAL {
        return Err(format!("residual {residual}"));
    }
    if !x.is_positive_definite() {
        return Err("solution is not positive definite".into());
    }
    Ok(format!("residual = {residual:.2e}, solution positive definite"))
}

fn check_hurwitz_classifier() -> Result<String, String> {
    match hurwitz_check(&[1.0, 3.0, 3.0, 1.0]) {
        Ok(true) => {}
        other => return Err(format!("(3,3,1) classified as {other:?}")),
    }
    match hurwitz_check(&[1.0, 1.0, 0.0, 1.0]) {
        Ok(false) => {}
        other => return Err(format!("(1,0,1) classified as {other:?}")),
    }
    Ok("benchmark gains stable, zero-coefficient polynomial rejected".into())
}

fn check_saturation_shape() -> Result<String, String> {
    let theta = 5.0;
    if saturation(theta, 4.9) != 4.9 {
        return Err("not the identity inside the band".into());
    }
    if (saturation(theta, 5.5) - 5.375).abs() > 1e-12 {
        return Err(format!("blend value {}", saturation(theta, 5.5)));
    }
    if saturation(theta, 100.0) != theta + 0.5 {
        return Err("cap is not theta + 1/2".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let s: f64 = rng.gen_range(-20.0..20.0);
        if (saturation(theta, -s) + saturation(theta, s)).abs() > 1e-12 {
            return Err(format!("odd symmetry violated at s = {s}"));
        }
    }
    let h = 1e-6;
    for (knee, want_slope) in [(theta, 1.0), (theta + 1.0, 0.0)] {
        let fd = (saturation(theta, knee + h) - saturation(theta, knee - h)) / (2.0 * h);
        if (fd - want_slope).abs() > 1e-6 {
            return Err(format!("slope at {knee} is {fd}, expected {want_slope}"));
        }
    }
    Ok("identity band, C1 knees, cap, and odd symmetry all hold".into())
}

fn check_eso_gain_scaling() -> Result<String, String> {
    let e10 = eso_rig_error(10.0).map_err(|e| e.to_string())?;
    let e20 = eso_rig_error(20.0).map_err(|e| e.to_string())?;
    let e40 = eso_rig_error(40.0).map_err(|e| e.to_string())?;
    if !(e20 <= 0.75 * e10 && e40 <= 0.75 * e20) {
        return Err(format!("errors did not scale: {e10:.4}, {e20:.4}, {e40:.4}"));
    }
    Ok(format!(
        "tail errors {e10:.4} -> {e20:.4} -> {e40:.4} under gain doubling"
    ))
}

fn check_rk4_exponential() -> Result<String, String> {
    let mut f = |_t: f64, y: &[f64], out: &mut [f64]| {
        out[0] = -y[0];
        Ok(())
    };
    let mut y = vec![1.0];
    for step in 0..10 {
        y = rk4_step(&mut f, 0.1 * step as f64, &y, 0.1).map_err(|e| e.to_string())?;
    }
    if (y[0] - 0.3678794).abs() > 1e-6 {
        return Err(format!("x(1) = {}", y[0]));
    }
    Ok(format!("x(1) = {:.9} vs exp(-1)", y[0]))
}

fn check_zero_scenario() -> Result<String, String> {
    let src = "\
[meta]
name = zero
order = 2

[topology]
followers = 2
0 -> 1
1 -> 2

[leader]
x0 = 0, 0
u0 = \"0\"

[agent.1]
x0 = 0, 0
h1 = \"0\"
d1 = \"0\"
h2 = \"0\"
d2 = \"0\"
w = \"0\"

[agent.2]
x0 = 0, 0
h1 = \"0\"
d1 = \"0\"
h2 = \"0\"
d2 = \"0\"
w = \"0\"

[observer]
k = 3, 3, 1
r = 10

[sim]
dt = 0.001
t_final = 1
record_stride = 100
";
    let scn = Scenario::parse(src).map_err(|e| e.to_string())?;
    let trace = run_scenario(&scn).map_err(|e| e.to_string())?;
    for k in 0..trace.len() {
        if trace.row(k).iter().any(|&v| v != 0.0) {
            return Err(format!("nonzero sample at t = {}", trace.time(k)));
        }
    }
    let report = compute_metrics(&trace, &scn).map_err(|e| e.to_string())?;
    if report.agents.iter().any(|a| {
        a.tail_sup_tracking != 0.0 || a.tail_sup_estimation != 0.0 || a.max_state_norm != 0.0
    }) {
        return Err("metrics of the zero trace are not identically zero".into());
    }
    Ok("all-zero trace and all-zero metrics".into())
}

fn check_zero_disturbance() -> Result<String, String> {
    let scn = zero_disturbance_scenario();
    let trace = run_scenario(&scn).map_err(|e| e.to_string())?;
    let report = compute_metrics(&trace, &scn).map_err(|e| e.to_string())?;
    let worst = report
        .agents
        .iter()
        .map(|a| a.tail_sup_estimation)
        .fold(0.0f64, f64::max);
    if worst > 1e-3 {
        return Err(format!("tail estimation error {worst:.2e} exceeds 1e-3"));
    }
    Ok(format!("worst tail estimation error {worst:.2e}"))
}

fn check_determinism() -> Result<String, String> {
    let mut scn = Scenario::parse(scenarios::S4_PARA1).map_err(|e| e.to_string())?;
    scn.sim.t_final = 2.0;
    let a = run_scenario(&scn).map_err(|e| e.to_string())?;
    let b = run_scenario(&scn).map_err(|e| e.to_string())?;
    if a != b {
        return Err("repeated runs differ".into());
    }
    Ok("repeated runs are bit-identical".into())
}

fn check_step_halving_order() -> Result<String, String> {
    let order = convergence_order(&smooth_scenario(), 1.0, 4e-3).map_err(|e| e.to_string())?;
    if order < 3.5 {
        return Err(format!("observed order {order:.2}"));
    }
    Ok(format!("observed order {order:.2}"))
}

fn check_benchmark_derivative() -> Result<String, String> {
    let scn = Scenario::parse(scenarios::S4_PARA1).map_err(|e| e.to_string())?;
    let design = scn.design().map_err(|e| e.to_string())?;
    let sys = scn.to_system(&design);
    let state = sys.initial_state();
    let mut out = vec![0.0; state.len()];
    sys.derivative(0.0, &state, &mut out)
        .map_err(|e| e.to_string())?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err("non-finite derivative component".into());
    }
    // Golden samples, frozen by hand from the scenario definitions:
    // leader chain, agent 1 first channel, and agent 1 observer at zero
    // observer state (output error y1(0) = 0.1 + cos 0 = 1.1). Agent 1's
    // input at t = 0 reduces to sat_5(K (0 - x0)) because both its own and
    // neighbor 3's observer states start at zero; the second observer
    // channel feeds that input through alongside its correction term.
    let u1 = crate::protocol::saturation(
        5.0,
        design.riccati.k[0] * -0.3 + design.riccati.k[1] * -0.2,
    );
    let golden = [
        (0usize, 0.2),
        (1, -0.7 + 0.13f64.cos()),
        (2, -0.4 + 0.15 * 0.1f64.exp() + 0.2 * 0.1f64.cos().powi(3)),
        (4, 30.0 * 1.1),
        (5, u1 + 300.0 * 1.1),
        (6, 1000.0 * 1.1),
    ];
    for &(idx, want) in &golden {
        if (out[idx] - want).abs() > 1e-9 {
            return Err(format!("component {idx} = {}, expected {want}", out[idx]));
        }
    }
    Ok("initial derivative matches hand-computed samples".into())
}

fn check_scenario_round_trip() -> Result<String, String> {
    for (name, src) in [
        ("s4_para1", scenarios::S4_PARA1),
        ("s4_para2", scenarios::S4_PARA2),
        ("s4_theory", scenarios::S4_THEORY),
    ] {
        let s = Scenario::parse(src).map_err(|e| format!("{name}: {e}"))?;
        let again =
            Scenario::parse(&s.canonical()).map_err(|e| format!("{name} reparse: {e}"))?;
        if again != s {
            return Err(format!("{name} does not round-trip"));
        }
    }
    Ok("all shipped scenarios round-trip through canonical form".into())
}

fn check_rejects_bad_gains() -> Result<String, String> {
    let src = scenarios::S4_PARA1.replace("k = 3, 3, 1", "k = 1, 0, 1");
    match Scenario::parse(&src) {
        Err(super::ScenarioError::Invalid { issues })
            if issues.iter().any(|(_, m)| m.contains("Hurwitz")) =>
        {
            Ok("non-Hurwitz observer gains rejected with a named issue".into())
        }
        other => Err(format!("expected a Hurwitz issue, got {other:?}")),
    }
}
