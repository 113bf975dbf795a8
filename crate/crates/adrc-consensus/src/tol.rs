//! Numeric tolerances used across the crate, collected in one place so that
//! solver contracts and their tests cannot drift apart.

/// Pivot threshold for Gaussian elimination, relative to the largest
/// absolute entry of the matrix: below it the system is reported singular.
pub const PIVOT_REL: f64 = 1e-12;

/// Residual bound guaranteed by `solve_linear` on well-conditioned systems,
/// scaled by `1 + max|b_i|`.
pub const LINEAR_RESIDUAL: f64 = 1e-10;

/// Off-diagonal Frobenius norm at which the cyclic Jacobi sweep stops.
pub const JACOBI_OFFDIAG: f64 = 1e-12;

/// Symmetry defect tolerated by the symmetric eigenvalue and Lyapunov
/// routines before they reject their input.
pub const SYMMETRY: f64 = 1e-10;

/// Residual bound on the algebraic Riccati equation accepted by
/// `solve_care`; Newton-Kleinman iterates until below it.
pub const CARE_RESIDUAL: f64 = 1e-9;

/// Lyapunov equation defect accepted by `solve_lyapunov`.
pub const LYAPUNOV_RESIDUAL: f64 = 1e-10;

/// Threshold below which a Routh array pivot counts as zero and the
/// stability test is reported indeterminate.
pub const ROUTH_PIVOT: f64 = 1e-12;

/// Weight-equation residual `max|L1' W - 1|` accepted when constructing
/// the diagonal weighting of a spanning-tree topology.
pub const WEIGHT_RESIDUAL: f64 = 1e-10;

/// Any state component beyond this magnitude aborts a run as divergent.
pub const DIVERGENCE: f64 = 1e9;

/// Empirical bound on the stacked follower state norm for the shipped
/// benchmark scenarios; exceeding it signals a design or transcription bug
/// long before outright divergence.
pub const STATE_NORM_GUARD: f64 = 50.0;

/// Step-size stiffness guard: integrating with `dt > STIFFNESS_FACTOR / r`
/// is allowed but flagged, as the fastest observer mode ~ exp(-3 r t).
pub const STIFFNESS_FACTOR: f64 = 0.5;

/// For sweeps above this observer gain the step is clamped to
/// `SWEEP_DT_FACTOR / r` to keep RK4 inside its stability region.
pub const SWEEP_R_CLAMP: f64 = 200.0;

/// See [`SWEEP_R_CLAMP`].
pub const SWEEP_DT_FACTOR: f64 = 0.25;
