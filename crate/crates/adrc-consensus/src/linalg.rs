//! Dense matrix kernel sized for design-time work on small systems
//! (chain order and agent counts in the single/double digits): Gaussian
//! elimination, cyclic Jacobi eigenvalues, a Lyapunov solver via Kronecker
//! vectorization, Newton-Kleinman iteration for the control Riccati
//! equation, and a Routh-Hurwitz stability test. Everything is plain `f64`
//! and deterministic; nothing here is meant for large matrices.

use crate::tol;
use thiserror::Error;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at elimination step {step})")]
    Singular { step: usize, pivot: f64 },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {defect:.3e}")]
    NotSymmetric { i: usize, j: usize, defect: f64 },
    #[error("{what} did not converge within {iterations} iterations")]
    ConvergenceFailure { what: &'static str, iterations: usize },
    #[error(
        "Lyapunov solution has min eigenvalue {min_eig:.3e} < 0; coefficient matrix is not Hurwitz"
    )]
    NotStabilizing { min_eig: f64 },
    #[error("residual {residual:.3e} exceeds tolerance {tol:.3e} in {what}")]
    ResidualTooLarge {
        what: &'static str,
        residual: f64,
        tol: f64,
    },
    #[error("Routh pivot vanished at row {row}; stability is indeterminate (treated as failure)")]
    RouthIndeterminate { row: usize },
    #[error("invalid argument: {msg}")]
    InvalidArgument { msg: String },
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Matrix {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged row in Matrix::from_rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o += v;
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (o, v) in out.data.iter_mut().zip(&other.data) {
            *o -= v;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        let mut out = self.clone();
        for o in out.data.iter_mut() {
            *o *= s;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest symmetry defect `max |a_ij - a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                d = d.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        d
    }

    /// `(A + A') / 2`, used to scrub roundoff drift from solutions that are
    /// symmetric by construction.
    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = 0.5 * (self[(i, j)] + self[(j, i)]);
            }
        }
        out
    }

    /// Positive definiteness via Cholesky factorization.
    pub fn is_positive_definite(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                if i == j {
                    if s <= 0.0 {
                        return false;
                    }
                    l[(i, i)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }
        true
    }

    /// Multi-line fixed-precision rendering for report output.
    pub fn render(&self, precision: usize) -> String {
        let mut cells = Vec::with_capacity(self.rows * self.cols);
        let mut width = 0;
        for v in &self.data {
            let s = format!("{v:.precision$}");
            width = width.max(s.len());
            cells.push(s);
        }
        let mut out = String::new();
        for i in 0..self.rows {
            out.push_str("  [");
            for j in 0..self.cols {
                if j > 0 {
                    out.push_str("  ");
                }
                let cell = &cells[i * self.cols + j];
                for _ in cell.len()..width {
                    out.push(' ');
                }
                out.push_str(cell);
            }
            out.push_str("]\n");
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// Linear solve
// ---------------------------------------------------------------------------

/// Solve `M x = b` by Gaussian elimination with partial pivoting. Pivots
/// below `tol::PIVOT_REL` relative to the largest entry of `M` report the
/// system as singular.
pub fn solve_linear(m: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    assert_eq!(m.rows, m.cols, "solve_linear needs a square matrix");
    assert_eq!(m.rows, b.len(), "right-hand side length mismatch");
    let n = m.rows;
    let scale = m.max_abs().max(1.0);
    let mut a = m.clone();
    let mut x: Vec<f64> = b.to_vec();

    for col in 0..n {
        // Partial pivot: largest magnitude in this column at or below row `col`.
        let mut piv_row = col;
        let mut piv_val = a[(col, col)].abs();
        for r in (col + 1)..n {
            let v = a[(r, col)].abs();
            if v > piv_val {
                piv_val = v;
                piv_row = r;
            }
        }
        if piv_val <= tol::PIVOT_REL * scale {
            return Err(LinalgError::Singular {
                step: col,
                pivot: piv_val,
            });
        }
        if piv_row != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv_row, j)];
                a[(piv_row, j)] = tmp;
            }
            x.swap(col, piv_row);
        }
        let pivot = a[(col, col)];
        for r in (col + 1)..n {
            let factor = a[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[(r, col)] = 0.0;
            for j in (col + 1)..n {
                a[(r, j)] -= factor * a[(col, j)];
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in (col + 1)..n {
            s -= a[(col, j)] * x[j];
        }
        x[col] = s / a[(col, col)];
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations,
/// unsorted. Rejects inputs whose symmetry defect exceeds `tol::SYMMETRY`.
pub fn eigenvalues_symmetric(m: &Matrix) -> Result<Vec<f64>, LinalgError> {
    assert_eq!(m.rows, m.cols, "eigenvalues need a square matrix");
    let n = m.rows;
    for i in 0..n {
        for j in (i + 1)..n {
            let defect = (m[(i, j)] - m[(j, i)]).abs();
            if defect > tol::SYMMETRY * m.max_abs().max(1.0) {
                return Err(LinalgError::NotSymmetric { i, j, defect });
            }
        }
    }
    let mut a = m.symmetrized();
    let stop = tol::JACOBI_OFFDIAG * (1.0 + a.frob_norm());
    let max_sweeps = 100;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if (2.0 * off).sqrt() <= stop {
            return Ok((0..n).map(|i| a[(i, i)]).collect());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Classic two-sided rotation zeroing a[p][q].
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(LinalgError::ConvergenceFailure {
        what: "Jacobi eigenvalue sweep",
        iterations: max_sweeps,
    })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_symmetric(m: &Matrix) -> Result<f64, LinalgError> {
    let eigs = eigenvalues_symmetric(m)?;
    Ok(eigs.into_iter().fold(f64::INFINITY, f64::min))
}

// ---------------------------------------------------------------------------
// Lyapunov equation
// ---------------------------------------------------------------------------

/// Solve `F' X + X F = -Q` for symmetric `Q` by vectorizing into an
/// `n^2 x n^2` linear system (column-major vec, `I (x) F' + F' (x) I`).
/// A singular system or an indefinite solution indicates `F` is not
/// Hurwitz, and is reported as such.
pub fn solve_lyapunov(f: &Matrix, q: &Matrix) -> Result<Matrix, LinalgError> {
    assert_eq!(f.rows, f.cols, "Lyapunov needs square F");
    assert_eq!((q.rows, q.cols), (f.rows, f.cols), "Q dimension mismatch");
    let n = f.rows;
    for i in 0..n {
        for j in (i + 1)..n {
            let defect = (q[(i, j)] - q[(j, i)]).abs();
            if defect > tol::SYMMETRY * q.max_abs().max(1.0) {
                return Err(LinalgError::NotSymmetric { i, j, defect });
            }
        }
    }

    let mut big = Matrix::zeros(n * n, n * n);
    let mut rhs = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            let eq = c * n + r;
            // (F' X)[r][c] = sum_k F[k][r] X[k][c]
            for k in 0..n {
                big[(eq, c * n + k)] += f[(k, r)];
            }
            // (X F)[r][c] = sum_k X[r][k] F[k][c]
            for k in 0..n {
                big[(eq, k * n + r)] += f[(k, c)];
            }
            rhs[eq] = -q[(r, c)];
        }
    }
    let v = solve_linear(&big, &rhs)?;
    let mut x = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            x[(r, c)] = v[c * n + r];
        }
    }
    let x = x.symmetrized();

    let residual = f.transpose().matmul(&x).add(&x.matmul(f)).add(q).max_abs();
    let bound = tol::LYAPUNOV_RESIDUAL * (1.0 + q.max_abs());
    if residual > bound {
        return Err(LinalgError::ResidualTooLarge {
            what: "Lyapunov solve",
            residual,
            tol: bound,
        });
    }
    let min_eig = min_eigenvalue_symmetric(&x)?;
    if min_eig < -tol::SYMMETRY * x.max_abs().max(1.0) {
        return Err(LinalgError::NotStabilizing { min_eig });
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Riccati equation
// ---------------------------------------------------------------------------

/// Solution of `A'P + PA - mu0 P B B' P = -I` for the order-`n` integrator
/// chain (`A` the shift matrix, `B = e_n`).
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    /// Symmetric positive definite solution.
    pub p: Matrix,
    /// Feedback row `K = -B' P` (the negated last row of `P`).
    pub k: Vec<f64>,
    /// Max-abs residual of the Riccati equation at `p`.
    pub residual: f64,
    /// Newton-Kleinman iterations consumed.
    pub iterations: usize,
}

/// Integrator-chain system matrix: ones on the first superdiagonal.
pub fn chain_matrix(n: usize) -> Matrix {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    a
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0f64;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn care_residual(n: usize, mu0: f64, p: &Matrix) -> f64 {
    let a = chain_matrix(n);
    // mu0 * P B B' P = mu0 * (last column of P) (last row of P)
    let mut quad = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            quad[(i, j)] = mu0 * p[(i, n - 1)] * p[(n - 1, j)];
        }
    }
    a.transpose()
        .matmul(p)
        .add(&p.matmul(&a))
        .sub(&quad)
        .add(&Matrix::identity(n))
        .max_abs()
}

/// Solve the chain-integrator Riccati equation by Newton-Kleinman
/// iteration, started from the stabilizing gain that places every
/// closed-loop pole at -1 (binomial coefficients). Each step solves one
/// Lyapunov equation; convergence is quadratic and the result is checked
/// against `tol::CARE_RESIDUAL`.
pub fn solve_care(n: usize, mu0: f64) -> Result<RiccatiSolution, LinalgError> {
    if n == 0 {
        return Err(LinalgError::InvalidArgument {
            msg: "chain order n must be at least 1".into(),
        });
    }
    if !(mu0 > 0.0) || !mu0.is_finite() {
        return Err(LinalgError::InvalidArgument {
            msg: format!("mu0 must be positive and finite, got {mu0}"),
        });
    }
    let a = chain_matrix(n);
    let eye = Matrix::identity(n);

    // (lambda + 1)^n pole placement: row K0 with K0[j] = C(n, j), so that the
    // companion closed loop A - B K0 has characteristic polynomial (s+1)^n.
    let k0: Vec<f64> = (0..n).map(|j| binomial(n, j)).collect();

    let max_iters = 100;
    let mut gain = k0;
    for iter in 1..=max_iters {
        // F = A - B K, i.e. subtract K from the last row.
        let mut f = a.clone();
        for j in 0..n {
            f[(n - 1, j)] -= gain[j];
        }
        // Q = I + K' R K with R = 1/mu0.
        let mut qm = eye.clone();
        for i in 0..n {
            for j in 0..n {
                qm[(i, j)] += gain[i] * gain[j] / mu0;
            }
        }
        let p = solve_lyapunov(&f, &qm)?;
        gain = (0..n).map(|j| mu0 * p[(n - 1, j)]).collect();
        let residual = care_residual(n, mu0, &p);
        if residual <= tol::CARE_RESIDUAL {
            if !p.is_positive_definite() {
                return Err(LinalgError::NotStabilizing {
                    min_eig: min_eigenvalue_symmetric(&p)?,
                });
            }
            let k = (0..n).map(|j| -p[(n - 1, j)]).collect();
            return Ok(RiccatiSolution {
                p,
                k,
                residual,
                iterations: iter,
            });
        }
    }
    Err(LinalgError::ConvergenceFailure {
        what: "Newton-Kleinman Riccati iteration",
        iterations: max_iters,
    })
}

// ---------------------------------------------------------------------------
// Routh-Hurwitz
// ---------------------------------------------------------------------------

/// Routh-Hurwitz test for a monic real polynomial given as
/// `[1, c1, ..., cq]` (descending powers). Returns whether all roots have
/// strictly negative real part. A vanishing Routh pivot makes the test
/// indeterminate and is reported as an error; callers treat it as failure.
pub fn hurwitz_check(coeffs: &[f64]) -> Result<bool, LinalgError> {
    if coeffs.is_empty() || (coeffs[0] - 1.0).abs() > 1e-12 {
        return Err(LinalgError::InvalidArgument {
            msg: "polynomial must be monic: coefficients start with 1".into(),
        });
    }
    let q = coeffs.len() - 1;
    if q == 0 {
        return Ok(true);
    }
    // A Hurwitz polynomial has strictly positive coefficients; any
    // nonpositive one settles the question without touching the array.
    if coeffs.iter().any(|&c| c <= 0.0) {
        return Ok(false);
    }
    let scale = 1.0 + coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));

    let width = q / 2 + 1;
    let mut rows: Vec<Vec<f64>> = vec![vec![0.0; width + 1]; q + 1];
    for (idx, &c) in coeffs.iter().enumerate() {
        rows[idx % 2][idx / 2] = c;
    }
    for i in 2..=q {
        let pivot = rows[i - 1][0];
        if pivot.abs() <= tol::ROUTH_PIVOT * scale {
            return Err(LinalgError::RouthIndeterminate { row: i - 1 });
        }
        for j in 0..width {
            rows[i][j] = (pivot * rows[i - 2][j + 1] - rows[i - 2][0] * rows[i - 1][j + 1]) / pivot;
        }
    }
    Ok(rows.iter().take(q + 1).all(|r| r[0] > 0.0))
}
