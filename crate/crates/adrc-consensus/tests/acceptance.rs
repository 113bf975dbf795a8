//! Acceptance gate: one test per shipped guarantee, each ending in a single
//! `ACCEPTANCE <k> PASS` line with the measured figures. Run with
//! `cargo test --test acceptance -- --nocapture` to see every line.
//!
//! Tolerances and budgets are pinned here, next to the checks they gate.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use adrc_consensus::harness::{
    compute_metrics, run_scenario, scenarios, verify, MetricsReport, Scenario,
};
use adrc_consensus::linalg::{hurwitz_check, solve_care};
use adrc_consensus::plant::{xbar2_differenced, xbar2_pointwise};
use adrc_consensus::protocol::saturation;
use adrc_consensus::tol;
use adrc_consensus::topology::{compute_w, Digraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Entrywise budget on the reproduced Riccati solution and feedback row.
const GAIN_TOL: f64 = 2e-3;
/// Budget on the integer weight vector (solved in floating point).
const WEIGHT_TOL: f64 = 1e-10;
/// Required shrink factor of the estimation error when the gain doubles.
const GAIN_DOUBLING_FACTOR: f64 = 0.75;
/// Knee slope mismatch accepted for the C1 saturation profile.
const KNEE_TOL: f64 = 1e-6;
/// Value mismatch accepted where the quadratic blend meets the cap (the
/// blend polynomial evaluates the shared endpoint in floating point).
const CAP_BOUNDARY_TOL: f64 = 1e-12;
/// Minimum raw error ratio per step halving for the second-order oracle
/// cross-check (the ideal value is 4).
const ORACLE_HALVING_RATIO: f64 = 3.5;
/// Minimum observed convergence order of the integrator on a smooth run
/// (the ideal value is 4).
const INTEGRATOR_ORDER: f64 = 3.5;
/// Allowed tracking degradation under the intensified disturbance set.
/// The tail tracking floor scales with the disturbance-derivative
/// intensity, which the intensified set roughly triples (its noise third
/// derivative alone is 8x the baseline); measured ratios cluster at 3.0.
const ROBUSTNESS_FACTOR: f64 = 3.5;

const RICCATI_BUDGET: Duration = Duration::from_secs(1);
const END_TO_END_BUDGET: Duration = Duration::from_secs(30);
const RIG_BUDGET: Duration = Duration::from_secs(10);

fn para1() -> Scenario {
    Scenario::parse(scenarios::S4_PARA1).expect("shipped scenario parses")
}

fn para1_metrics_at(r: f64) -> MetricsReport {
    let mut scn = para1();
    scn.eso.r = r;
    let trace = run_scenario(&scn).expect("benchmark run completes");
    compute_metrics(&trace, &scn).expect("metrics computable")
}

/// The r = 50 benchmark run is shared between the gain-improvement and
/// robustness criteria; first caller pays for it.
fn para1_at_50() -> &'static MetricsReport {
    static CELL: OnceLock<MetricsReport> = OnceLock::new();
    CELL.get_or_init(|| para1_metrics_at(50.0))
}

#[test]
fn criterion_1_riccati_reproduction() {
    let start = Instant::now();
    let mu0 = 1.0 / (2.1949 * 2.1949);
    let sol = solve_care(2, mu0).expect("benchmark Riccati solves");
    let elapsed = start.elapsed();

    let p_want = [[2.3216, 2.1949], [2.1949, 5.0956]];
    for i in 0..2 {
        for j in 0..2 {
            let got = sol.p[(i, j)];
            assert!(
                (got - p_want[i][j]).abs() <= GAIN_TOL,
                "P[{i}{j}] = {got}, want {} within {GAIN_TOL}",
                p_want[i][j]
            );
        }
    }
    let k_want = [-2.1949, -5.0956];
    for (q, &want) in k_want.iter().enumerate() {
        assert!(
            (sol.k[q] - want).abs() <= GAIN_TOL,
            "K[{q}] = {}, want {want} within {GAIN_TOL}",
            sol.k[q]
        );
    }
    assert!(sol.residual <= tol::CARE_RESIDUAL, "residual {}", sol.residual);
    assert!(elapsed < RICCATI_BUDGET, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 1 PASS: Riccati P and K reproduced within {GAIN_TOL} \
         (residual {:.2e}, {} iterations, {elapsed:?})",
        sol.residual, sol.iterations
    );
}

#[test]
fn criterion_2_weight_vector_reproduction() {
    let graph = Digraph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 1), (1, 4), (4, 5)])
        .expect("benchmark topology");
    let w = compute_w(&graph.build_laplacian().l1).expect("weights exist");
    let want = [5.0, 7.0, 6.0, 2.0, 1.0];
    for (i, (&got, &expect)) in w.iter().zip(&want).enumerate() {
        assert!(
            (got - expect).abs() <= WEIGHT_TOL,
            "W[{i}] = {got}, want {expect} within {WEIGHT_TOL}"
        );
    }
    println!("ACCEPTANCE 2 PASS: weight vector ({w:?}) matches (5, 7, 6, 2, 1) within {WEIGHT_TOL}");
}

/// Multiply polynomial coefficient rows (descending powers).
fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Monic polynomial with randomly drawn roots, all of real-part magnitude
/// at least 0.05. When `stable` is false exactly one factor sits in the
/// right half-plane.
fn random_poly(rng: &mut ChaCha8Rng, degree: usize, stable: bool) -> Vec<f64> {
    let mut coeffs = vec![1.0];
    let mut left = degree;
    let mut first = true;
    while left > 0 {
        let re_mag = 0.05 + 1.95 * rng.gen::<f64>();
        let re = if !stable && first { re_mag } else { -re_mag };
        if left >= 2 && rng.gen::<bool>() {
            let im = 0.1 + 2.0 * rng.gen::<f64>();
            coeffs = conv(&coeffs, &[1.0, -2.0 * re, re * re + im * im]);
            left -= 2;
        } else {
            coeffs = conv(&coeffs, &[1.0, -re]);
            left -= 1;
        }
        first = false;
    }
    coeffs
}

#[test]
fn criterion_3_hurwitz_validation() {
    assert_eq!(
        hurwitz_check(&[1.0, 3.0, 3.0, 1.0]).expect("determinate"),
        true,
        "benchmark observer polynomial must pass"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = 200;
    for case in 0..cases {
        let stable = case % 2 == 0;
        let degree = rng.gen_range(1..=6);
        let coeffs = random_poly(&mut rng, degree, stable);
        let got = hurwitz_check(&coeffs)
            .unwrap_or_else(|e| panic!("case {case} indeterminate ({e}): {coeffs:?}"));
        assert_eq!(got, stable, "case {case} misclassified: {coeffs:?}");
    }
    println!(
        "ACCEPTANCE 3 PASS: (3, 3, 1) accepted; {cases} root-constructed \
         polynomials of degree <= 6 classified correctly"
    );
}

#[test]
fn criterion_4_benchmark_gain_improvement() {
    let start = Instant::now();
    let m10 = para1_metrics_at(10.0);
    let m50 = para1_at_50();
    let elapsed = start.elapsed();

    let mut worst_track = (0.0f64, 0.0f64);
    let mut worst_est = (0.0f64, 0.0f64);
    for (a10, a50) in m10.agents.iter().zip(&m50.agents) {
        assert!(
            a50.tail_sup_tracking < a10.tail_sup_tracking,
            "agent {}: tracking {} at r=50 not below {} at r=10",
            a10.agent,
            a50.tail_sup_tracking,
            a10.tail_sup_tracking
        );
        assert!(
            a50.tail_sup_estimation < a10.tail_sup_estimation,
            "agent {}: estimation {} at r=50 not below {} at r=10",
            a10.agent,
            a50.tail_sup_estimation,
            a10.tail_sup_estimation
        );
        if a10.tail_sup_tracking > worst_track.0 {
            worst_track = (a10.tail_sup_tracking, a50.tail_sup_tracking);
        }
        if a10.tail_sup_estimation > worst_est.0 {
            worst_est = (a10.tail_sup_estimation, a50.tail_sup_estimation);
        }
    }
    let norm = m10.max_state_norm.max(m50.max_state_norm);
    assert!(
        norm <= tol::STATE_NORM_GUARD,
        "state norm {norm} exceeds the boundedness guard"
    );
    assert!(elapsed < END_TO_END_BUDGET, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 4 PASS: r 10 -> 50 shrinks worst tracking {:.4} -> {:.4} \
         and worst estimation {:.3} -> {:.3}; max state norm {:.2} <= {} ({elapsed:.2?})",
        worst_track.0, worst_track.1, worst_est.0, worst_est.1, norm,
        tol::STATE_NORM_GUARD
    );
}

#[test]
fn criterion_5_robustness_variant() {
    let scn = Scenario::parse(scenarios::S4_PARA2).expect("shipped scenario parses");
    assert_eq!(scn.eso.r, 50.0, "variant is defined at r = 50");
    let trace = run_scenario(&scn).expect("intensified run completes");
    let report = compute_metrics(&trace, &scn).expect("metrics computable");
    let base = para1_at_50();

    assert!(
        report.max_state_norm.is_finite() && report.max_state_norm <= tol::STATE_NORM_GUARD,
        "state norm {} not bounded",
        report.max_state_norm
    );
    let mut worst_ratio = 0.0f64;
    for (hard, easy) in report.agents.iter().zip(&base.agents) {
        assert!(hard.tail_sup_tracking.is_finite());
        assert!(
            hard.tail_sup_tracking <= ROBUSTNESS_FACTOR * easy.tail_sup_tracking,
            "agent {}: tracking {} exceeds {ROBUSTNESS_FACTOR} x {}",
            hard.agent,
            hard.tail_sup_tracking,
            easy.tail_sup_tracking
        );
        worst_ratio = worst_ratio.max(hard.tail_sup_tracking / easy.tail_sup_tracking);
    }
    println!(
        "ACCEPTANCE 5 PASS: intensified disturbances stay bounded \
         (max state norm {:.2}); worst tracking ratio {:.2} <= {ROBUSTNESS_FACTOR}",
        report.max_state_norm, worst_ratio
    );
}

#[test]
fn criterion_6_eso_gain_law() {
    let start = Instant::now();
    let e10 = verify::eso_rig_error(10.0).expect("rig run at r = 10");
    let e20 = verify::eso_rig_error(20.0).expect("rig run at r = 20");
    let e40 = verify::eso_rig_error(40.0).expect("rig run at r = 40");
    let elapsed = start.elapsed();

    assert!(
        e20 <= GAIN_DOUBLING_FACTOR * e10,
        "e(20) = {e20} not within {GAIN_DOUBLING_FACTOR} of e(10) = {e10}"
    );
    assert!(
        e40 <= GAIN_DOUBLING_FACTOR * e20,
        "e(40) = {e40} not within {GAIN_DOUBLING_FACTOR} of e(20) = {e20}"
    );
    assert!(elapsed < RIG_BUDGET, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 6 PASS: estimation error {e10:.4} -> {e20:.4} -> {e40:.4} \
         over r = 10, 20, 40; each doubling shrinks it below {GAIN_DOUBLING_FACTOR}x \
         ({elapsed:.2?})"
    );
}

#[test]
fn criterion_7_saturation_profile() {
    for &theta in &[0.1, 1.0, 5.0] {
        // Identity on [-theta, theta], sampled inclusively at both ends.
        for k in 0..=100 {
            let s = -theta + 2.0 * theta * (k as f64 / 100.0);
            assert_eq!(saturation(theta, s), s, "identity fails at {s}");
        }
        // Caps at +-(theta + 1/2) everywhere past the blend; the boundary
        // point itself comes from the quadratic piece and may differ by a
        // rounding error.
        for &s in &[theta + 1.5, 2.0 * theta + 3.0, 1e6] {
            assert_eq!(saturation(theta, s), theta + 0.5);
            assert_eq!(saturation(theta, -s), -(theta + 0.5));
        }
        let boundary = saturation(theta, theta + 1.0);
        assert!(
            (boundary - (theta + 0.5)).abs() <= CAP_BOUNDARY_TOL,
            "blend endpoint {boundary} off the cap by more than {CAP_BOUNDARY_TOL}"
        );
        // Odd symmetry on random samples across all three pieces.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = (2.0 * theta + 2.0) * (2.0 * rng.gen::<f64>() - 1.0);
            assert_eq!(saturation(theta, -s), -saturation(theta, s));
        }
        // C1 at the knees: one-sided difference quotients agree.
        let h = 1e-6;
        for &knee in &[theta, theta + 1.0, -theta, -(theta + 1.0)] {
            let right = (saturation(theta, knee + h) - saturation(theta, knee)) / h;
            let left = (saturation(theta, knee) - saturation(theta, knee - h)) / h;
            assert!(
                (right - left).abs() <= KNEE_TOL,
                "slope jump {} at knee {knee} (theta = {theta})",
                (right - left).abs()
            );
        }
    }
    println!(
        "ACCEPTANCE 7 PASS: saturation is the identity inside the band, caps at \
         theta + 1/2, stays odd, and is C1 at all knees within {KNEE_TOL}"
    );
}

#[test]
fn criterion_8_oracle_consistency() {
    // Steps coarser than 2e-3 are pre-asymptotic here: the observer
    // transient inflates the difference-scheme constant early on.
    let mut sups = Vec::new();
    for &dt in &[2e-3, 1e-3, 5e-4] {
        let mut scn = para1();
        scn.sim.dt = dt;
        scn.sim.t_final = 2.0;
        scn.sim.record_stride = 1;
        let trace = run_scenario(&scn).expect("short benchmark run");
        let mut worst = 0.0f64;
        for agent in 1..=scn.m {
            let spec = &scn.followers[agent - 1];
            let exact = xbar2_pointwise(spec, scn.n, &trace, agent).expect("pointwise form");
            let diffed = xbar2_differenced(spec, &trace, agent).expect("differenced form");
            for (p, d) in exact.iter().zip(&diffed) {
                worst = worst.max((p - d).abs());
            }
        }
        sups.push(worst);
    }
    let r1 = sups[0] / sups[1];
    let r2 = sups[1] / sups[2];
    assert!(
        r1 >= ORACLE_HALVING_RATIO && r2 >= ORACLE_HALVING_RATIO,
        "sup differences {sups:?} give ratios {r1:.2}, {r2:.2}"
    );
    println!(
        "ACCEPTANCE 8 PASS: pointwise and differenced reconstructions agree to \
         {:.2e} at dt = 5e-4, shrinking by {r1:.2}x and {r2:.2}x per halving \
         (>= {ORACLE_HALVING_RATIO})",
        sups[2]
    );
}

#[test]
fn criterion_9_determinism_and_convergence() {
    let mut scn = para1();
    scn.sim.t_final = 2.0;
    let a = run_scenario(&scn).expect("first run");
    let b = run_scenario(&scn).expect("second run");
    assert!(a == b, "repeated runs differ");

    let order = verify::convergence_order(&verify::smooth_scenario(), 1.0, 4e-3)
        .expect("smooth runs complete");
    assert!(
        order >= INTEGRATOR_ORDER,
        "observed convergence order {order:.2}"
    );
    println!(
        "ACCEPTANCE 9 PASS: reruns are bit-identical; step-halving order \
         {order:.2} >= {INTEGRATOR_ORDER} on the smooth scenario"
    );
}
