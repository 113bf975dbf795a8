//! Extended state observer (ESO): per agent, an `n + 1` dimensional
//! estimator of the transformed chain `x̄_1..x̄_n` plus the lumped total
//! disturbance `x̄_{n+1}`, driven by the noisy output and the applied input.
//! Correction gains scale as `k_j r^j`, so one tuning knob `r` trades
//! estimation bandwidth against noise amplification.

use crate::engine::Trace;
use crate::linalg::{self, LinalgError};
use thiserror::Error;

/// Observer gain vector `k = (k_1, ..., k_{n+1})` and tuning gain `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct EsoGains {
    pub k: Vec<f64>,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObserverError {
    #[error("observer gain vector has length {got}, expected chain order + 1 = {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("tuning gain r = {r} must be at least 1")]
    BadTuningGain { r: f64 },
    #[error("observer gain polynomial of degree {degree} is not Hurwitz")]
    NotHurwitz { degree: usize },
    #[error(transparent)]
    Stability(#[from] LinalgError),
}

impl EsoGains {
    /// Monic characteristic polynomial of the gain companion matrix:
    /// `s^{n+1} + k_1 s^n + ... + k_{n+1}`, descending coefficients.
    pub fn char_poly(&self) -> Vec<f64> {
        let mut coeffs = Vec::with_capacity(self.k.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(&self.k);
        coeffs
    }

    /// Check the gain vector length, `r >= 1`, and stability of the gain
    /// polynomial; an indeterminate Routh test counts as failure.
    pub fn validate(&self, n: usize) -> Result<(), ObserverError> {
        if self.k.len() != n + 1 {
            return Err(ObserverError::WrongLength {
                expected: n + 1,
                got: self.k.len(),
            });
        }
        if !(self.r >= 1.0) || !self.r.is_finite() {
            return Err(ObserverError::BadTuningGain { r: self.r });
        }
        match linalg::hurwitz_check(&self.char_poly()) {
            Ok(true) => Ok(()),
            Ok(false) | Err(LinalgError::RouthIndeterminate { .. }) => {
                Err(ObserverError::NotHurwitz { degree: n + 1 })
            }
            Err(e) => Err(ObserverError::Stability(e)),
        }
    }
}

/// Observer vector field. With innovation `e = y - x̂̄_1`:
///
/// ```text
/// d x̂̄_j     = x̂̄_{j+1} + k_j r^j e          for j = 1..n-1
/// d x̂̄_n     = x̂̄_{n+1} + k_n r^n e + u
/// d x̂̄_{n+1} = k_{n+1} r^{n+1} e
/// ```
pub fn eso_derivative(gains: &EsoGains, n: usize, xhat: &[f64], y: f64, u: f64, out: &mut [f64]) {
    debug_assert_eq!(xhat.len(), n + 1);
    debug_assert_eq!(out.len(), n + 1);
    debug_assert_eq!(gains.k.len(), n + 1);
    let e = y - xhat[0];
    let mut rp = 1.0;
    for j in 1..=n {
        rp *= gains.r;
        out[j - 1] = xhat[j] + gains.k[j - 1] * rp * e;
    }
    out[n - 1] += u;
    rp *= gains.r;
    out[n] = gains.k[n] * rp * e;
}

/// Estimation-error series of the total-disturbance component for one
/// agent: `|x̂̄_{n+1}(t_k) - x̄_{n+1}(t_k)|` against an oracle series, with
/// its supremum over the tail window `t >= t_end / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationError {
    pub series: Vec<f64>,
    pub tail_sup: f64,
}

pub fn estimation_errors(trace: &Trace, agent: usize, oracle: &[f64]) -> EstimationError {
    assert_eq!(oracle.len(), trace.len(), "oracle/trace length mismatch");
    let n = trace.n();
    let t_half = trace.time(trace.len() - 1) / 2.0;
    let mut series = Vec::with_capacity(trace.len());
    let mut tail_sup = 0.0f64;
    for k in 0..trace.len() {
        let err = (trace.xhat(k, agent)[n] - oracle[k]).abs();
        series.push(err);
        if trace.time(k) >= t_half {
            tail_sup = tail_sup.max(err);
        }
    }
    EstimationError { series, tail_sup }
}
