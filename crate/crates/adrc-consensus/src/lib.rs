//! Deterministic simulator and gain-design toolkit for leader-follower
//! output consensus of heterogeneous integrator-chain agents under active
//! disturbance rejection control (ADRC).
//!
//! Each follower is an `n`-th order integrator chain perturbed by lower
//! triangular nonlinearities, external disturbances and measurement noise.
//! A high-gain extended state observer (ESO) per agent estimates the noisy
//! output's chain of derivatives together with a lumped "total disturbance";
//! the consensus protocol combines neighbor estimate differences through a
//! Riccati-designed gain and cancels the total disturbance estimate, with
//! saturations keeping the input bounded.
//!
//! Module map:
//!
//! * [`expr`] — tiny expression DSL (parse / eval / symbolic derivative) used
//!   by scenario files to define dynamics, disturbances and noise.
//! * [`linalg`] — dense matrix kernel: Gaussian solve, Jacobi eigenvalues,
//!   Lyapunov and Riccati solvers, Routh-Hurwitz test.
//! * [`topology`] — directed communication graphs, Laplacian blocks, the
//!   diagonal weighting `W` and the coupling constants `mu` / `mu0`.
//! * [`plant`] — leader and follower dynamics plus the finite-difference
//!   total-disturbance oracle used to validate observer estimates.
//! * [`observer`] — the extended state observer and estimation-error tooling.
//! * [`protocol`] — saturation shaping, neighbor aggregation, the control law
//!   and the end-to-end gain design pipeline.
//! * [`engine`] — fixed-step RK4 closed-loop integrator with divergence
//!   detection and deterministic trace recording.
//! * [`harness`] — scenario file I/O, metrics, parameter sweeps, CSV/SVG
//!   emitters and the built-in verification suite.

pub mod engine;
pub mod expr;
pub mod harness;
pub mod linalg;
pub mod observer;
pub mod plant;
pub mod protocol;
pub mod tol;
pub mod topology;

pub use engine::{SimError, Trace};
pub use expr::{Expr, Signal};
pub use harness::{MetricsReport, Scenario, ScenarioError};
pub use linalg::{Matrix, RiccatiSolution};
pub use topology::Digraph;
