//! Local convergence quantities of the Gauss-Seidel iteration: weight
//! entropy, the uniform-point sensitivity `s*`, the Jacobian blocks of the
//! three-block system, the iteration block `G33`, and its spectral radius.
//!
//! Jacobian-based quantities are defined for scalar data (`s = 1`) and are
//! dense, so they are meant for small or subsampled problems.

use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bspline::DesignMatrix;
use crate::error::{Error, Result};
use crate::mewls::{ContinuationSchedule, MewlsProblem, MewlsState};
use crate::wls::residuals;

/// Problems larger than this are refused by [`convergence_report`].
pub const DIAGNOSTIC_MAX_POINTS: usize = 5000;

/// Matrices up to this order fall back to a dense eigenvalue solve when power
/// iteration does not settle.
const DENSE_EIGEN_LIMIT: usize = 1500;

/// Shannon entropy `-sum w_k ln w_k`, with `0 ln 0 = 0`.
pub fn entropy(w: &[f64]) -> f64 {
    -w.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `s* = sum r_k^2 (mean(r^2) - r_k^2) = (sum r^2)^2 / m - sum r^4` for the
/// squared OLS residuals `r2`. Never positive; zero iff all moduli agree.
pub fn s_star(r2: &[f64]) -> f64 {
    if r2.is_empty() {
        return 0.0;
    }
    let mean = r2.iter().sum::<f64>() / r2.len() as f64;
    r2.iter().map(|&x| x * (mean - x)).sum()
}

/// Partial derivatives of `F = (F1, F2, F3)` with respect to `(P, mu, w)`:
///
/// ```text
/// J = | A   0  C |
///     | d^T s  0 |
///     | D   v  I |
/// ```
///
/// `F2` is taken with the constant factor `exp(mu * f2_shift)`, which keeps
/// the exponentials bounded; `d` and `s` carry the same factor.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    /// `B^T W B`, `n x n`.
    pub a: DMatrix<f64>,
    /// `B^T diag(r)`, `n x m`.
    pub c: DMatrix<f64>,
    pub d_vec: DVector<f64>,
    pub s_scalar: f64,
    /// `m x n`.
    pub d_mat: DMatrix<f64>,
    pub v_vec: DVector<f64>,
    pub f2_shift: f64,
}

/// Jacobian blocks at `state` for the design matrix `b` and observations `q`.
pub fn jacobian_blocks(state: &MewlsState, b: &DesignMatrix, q: &[f64]) -> Result<JacobianBlocks> {
    if state.net.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "jacobian blocks need scalar data, got dimension {}",
            state.net.dim()
        )));
    }
    let m = b.nrows();
    if state.weights.len() != m || q.len() != m {
        return Err(Error::InvalidInput("state, design matrix and data disagree in length".into()));
    }
    let r = residuals(b, &state.net, q)?;
    let r2: Vec<f64> = r.iter().map(|x| x * x).collect();
    let (mu, t) = (state.mu, state.target_mse);
    let bd = b.to_dense();
    let n = bd.ncols();

    let mut a = DMatrix::zeros(n, n);
    for k in 0..m {
        let (cols, vals) = b.row(k);
        let wk = state.weights[k];
        for (&i, &bi) in cols.iter().zip(vals) {
            for (&j, &bj) in cols.iter().zip(vals) {
                a[(i, j)] += wk * bi * bj;
            }
        }
    }
    let mut c = bd.transpose();
    for k in 0..m {
        c.column_mut(k).scale_mut(r[k]);
    }

    let shift = if mu >= 0.0 {
        r2.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        r2.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let e: Vec<f64> = r2.iter().map(|&x| (-mu * (x - shift)).exp()).collect();
    let z: f64 = e.iter().sum();
    let what: Vec<f64> = e.iter().map(|x| x / z).collect();

    let mut d_vec = DVector::zeros(n);
    for k in 0..m {
        let coef = 2.0 * e[k] * r[k] * (1.0 + mu * t - mu * r2[k]);
        let (cols, vals) = b.row(k);
        for (&j, &bj) in cols.iter().zip(vals) {
            d_vec[j] += coef * bj;
        }
    }
    let s_scalar: f64 = (0..m).map(|k| r2[k] * e[k] * (t - r2[k])).sum();

    // mean of r_i B_i under the softmax weights
    let mut rb_mean = DVector::<f64>::zeros(n);
    for k in 0..m {
        let (cols, vals) = b.row(k);
        for (&j, &bj) in cols.iter().zip(vals) {
            rb_mean[j] += what[k] * r[k] * bj;
        }
    }
    let mut d_mat = DMatrix::zeros(m, n);
    for k in 0..m {
        let f = 2.0 * mu * what[k];
        for j in 0..n {
            d_mat[(k, j)] = f * (r[k] * bd[(k, j)] - rb_mean[j]);
        }
    }
    let r2_mean: f64 = what.iter().zip(&r2).map(|(w, x)| w * x).sum();
    let v_vec = DVector::from_iterator(m, (0..m).map(|k| what[k] * (r2[k] - r2_mean)));

    Ok(JacobianBlocks {
        a,
        c,
        d_vec,
        s_scalar,
        d_mat,
        v_vec,
        f2_shift: shift,
    })
}

/// Weight block of the Gauss-Seidel iteration matrix,
/// `G33 = (D - s^{-1} v d^T) A^{-1} C`.
pub fn g33(blocks: &JacobianBlocks) -> Result<DMatrix<f64>> {
    let s = blocks.s_scalar;
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Degenerate("dF2/dmu vanishes; residual moduli are all equal".into()));
    }
    let n = blocks.a.nrows();
    let chol = blocks
        .a
        .clone()
        .cholesky()
        .ok_or(Error::SingularSystem { rank: 0, size: n })?;
    let ainv_c = chol.solve(&blocks.c);
    let mut left = blocks.d_mat.clone();
    left.ger(-1.0 / s, &blocks.v_vec, &blocks.d_vec, 1.0);
    Ok(left * ainv_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRadius {
    pub value: f64,
    /// Set when neither power iteration nor the dense solve produced a
    /// converged value.
    pub approximate: bool,
    pub iterations: usize,
}

/// Largest eigenvalue modulus of the square matrix `m`.
///
/// Power iteration from a seeded random start; when it fails to settle
/// within `max_iters` (complex or opposite-sign dominant pairs), matrices up
/// to moderate order are handed to a dense Schur decomposition.
pub fn spectral_radius(m: &DMatrix<f64>, tol: f64, max_iters: usize) -> Result<SpectralRadius> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(SpectralRadius {
            value: 0.0,
            approximate: false,
            iterations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    x.normalize_mut();
    let mut lambda = f64::NAN;
    let mut log_growth = Vec::with_capacity(max_iters);
    for it in 1..=max_iters {
        let y = m * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return Ok(SpectralRadius {
                value: 0.0,
                approximate: false,
                iterations: it,
            });
        }
        // Rayleigh quotient and eigen-residual of the current direction
        let rq = x.dot(&y);
        let resid = (&y - &x * rq).norm();
        log_growth.push(norm.ln());
        if resid <= 1e-2 * tol * rq.abs() && (rq - lambda).abs() <= tol * rq.abs() {
            return Ok(SpectralRadius {
                value: rq.abs(),
                approximate: false,
                iterations: it,
            });
        }
        lambda = rq;
        x = y / norm;
    }
    if n <= DENSE_EIGEN_LIMIT {
        if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, 100 * n.max(10)) {
            let value = schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            return Ok(SpectralRadius {
                value,
                approximate: false,
                iterations: max_iters,
            });
        }
    }
    // geometric mean growth over the second half of the run
    let h = log_growth.len() / 2;
    let tail = &log_growth[h..];
    let value = (tail.iter().sum::<f64>() / tail.len().max(1) as f64).exp();
    Ok(SpectralRadius {
        value,
        approximate: true,
        iterations: max_iters,
    })
}

/// Per-stage record of a diagnostic continuation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub reduction: f64,
    pub rho_g33: f64,
    pub rho_approximate: bool,
    pub iterations: usize,
    pub entropy: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub s_star: f64,
    pub mse_uw: f64,
    pub stages: Vec<StageDiagnostics>,
}

impl ConvergenceReport {
    pub fn iterations(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.iterations).collect()
    }

    pub fn entropy_trace(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.entropy).collect()
    }

    pub fn max_rho(&self) -> f64 {
        self.stages.iter().map(|s| s.rho_g33).fold(0.0, f64::max)
    }
}

/// Runs the continuation of `schedule` on `problem` and evaluates `rho(G33)`
/// at every converged stage.
pub fn convergence_report(problem: &MewlsProblem, schedule: &ContinuationSchedule) -> Result<ConvergenceReport> {
    schedule.validate()?;
    if problem.len() > DIAGNOSTIC_MAX_POINTS {
        return Err(Error::InvalidInput(format!(
            "{} points exceed the diagnostic limit of {DIAGNOSTIC_MAX_POINTS}; subsample first",
            problem.len()
        )));
    }
    let mut state = problem.ols()?;
    let s_star = s_star(&state.r2);
    let mut stages = Vec::with_capacity(schedule.reductions.len());
    for &r in &schedule.reductions {
        let (next, report) = problem.fit_from(&state, state.mse_uw / r, schedule.options())?;
        state = next;
        let blocks = jacobian_blocks(&state, problem.design(), problem.observations())?;
        let rho = spectral_radius(&g33(&blocks)?, 1e-8, 2000)?;
        stages.push(StageDiagnostics {
            reduction: r,
            rho_g33: rho.value,
            rho_approximate: rho.approximate,
            iterations: report.iterations,
            entropy: report.entropy,
            mu: state.mu,
        });
    }
    Ok(ConvergenceReport {
        s_star,
        mse_uw: state.mse_uw,
        stages,
    })
}
