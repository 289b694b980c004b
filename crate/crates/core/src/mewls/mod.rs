//! Maximum-entropy weighted least squares.
//!
//! The fixed point couples three blocks: the weighted normal equations for
//! the control net, the scalar constraint that fixes the multiplier `mu`, and
//! the softmax weight law. [`gauss_seidel_fit`] cycles through them;
//! [`continuation_fit`] walks the target MSE down from the OLS value.

mod mu;

use serde::{Deserialize, Serialize};

pub use mu::{mu_equation, mu_equation_derivative, solve_mu, solve_mu_with, update_weights, MuSolverOptions};

use crate::bspline::{design_matrix, ControlNet, Dataset, DesignMatrix, SurfaceSpec};
use crate::diagnostics::entropy;
use crate::error::{Error, Result};
use crate::wls::{residual_sq_norms, solve_wls_with_stats, weighted_mse, ResidualVector, WeightVector};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 500;

/// Residuals at or below this fraction of the mean squared observation count
/// as zero: the data are reproduced exactly and no weighting can act.
const NEGLIGIBLE_RESIDUAL: f64 = 1e-24;

/// A point of the solver: control net, multiplier, weights, and the squared
/// residuals of the net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MewlsState {
    /// Free control rows (`SurfaceSpec::unknowns` x `s`).
    pub net: ControlNet,
    pub mu: f64,
    pub weights: WeightVector,
    pub r2: ResidualVector,
    pub target_mse: f64,
    /// Uniform-weight MSE of the OLS fit.
    pub mse_uw: f64,
}

/// One Gauss-Seidel sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub iteration: usize,
    /// Largest relative change over the three blocks.
    pub change: f64,
    pub mu: f64,
    pub weight_sum: f64,
    pub entropy: f64,
    pub weighted_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `mse_uw / target_mse`.
    pub reduction: f64,
    pub target_mse: f64,
    pub mse_uw: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    pub mu: f64,
    pub weighted_mse: f64,
    pub entropy: f64,
    /// Rows left out of the last least-squares solve for negligible weight.
    pub dropped_rows: usize,
    pub sweeps: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Reduction factors `r`, each stage targeting `mse_uw / r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub reductions: Vec<f64>,
    pub tol: f64,
    pub max_iters: usize,
}

impl ContinuationSchedule {
    pub fn new(reductions: Vec<f64>, tol: f64, max_iters: usize) -> Result<Self> {
        let s = ContinuationSchedule {
            reductions,
            tol,
            max_iters,
        };
        s.validate()?;
        Ok(s)
    }

    /// `1, 2, 5, 10, 20, 50, ...` up to and including `r_final`.
    pub fn geometric(r_final: f64) -> Result<Self> {
        if !(r_final >= 1.0) || !r_final.is_finite() {
            return Err(Error::InvalidConfig(format!("terminal reduction {r_final} must be a finite value >= 1")));
        }
        let mut reductions = vec![1.0];
        let mut decade = 1.0;
        'outer: loop {
            for m in [2.0, 5.0, 10.0] {
                let r = m * decade;
                if r >= r_final * (1.0 - 1e-12) {
                    break 'outer;
                }
                reductions.push(r);
            }
            decade *= 10.0;
        }
        if r_final > 1.0 {
            reductions.push(r_final);
        }
        Self::new(reductions, DEFAULT_TOL, DEFAULT_MAX_ITERS)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.reductions;
        if r.is_empty() {
            return Err(Error::InvalidConfig("empty continuation schedule".into()));
        }
        if !(r[0] >= 1.0) || r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("reduction factors must be finite and start at or above 1".into()));
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("reduction factors must increase strictly".into()));
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidConfig("tolerance and iteration limit must be positive".into()));
        }
        Ok(())
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }
}

/// A surface and dataset with the design matrix assembled once.
#[derive(Debug, Clone)]
pub struct MewlsProblem {
    spec: SurfaceSpec,
    design: DesignMatrix,
    q: Vec<f64>,
    dim: usize,
    q_scale: f64,
}

impl MewlsProblem {
    pub fn new(spec: &SurfaceSpec, data: &Dataset) -> Result<Self> {
        data.check_against(spec)?;
        let design = design_matrix(spec, data)?;
        let q = data.observations().to_vec();
        let q_scale = q.iter().map(|x| x * x).sum::<f64>() / data.len() as f64;
        Ok(MewlsProblem {
            spec: spec.clone(),
            design,
            q,
            dim: data.dim(),
            q_scale,
        })
    }

    pub fn spec(&self) -> &SurfaceSpec {
        &self.spec
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn observations(&self) -> &[f64] {
        &self.q
    }

    pub fn len(&self) -> usize {
        self.design.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Uniform-weight least-squares fit: `(P*, 0, 1/m)` with `target = mse_uw`.
    pub fn ols(&self) -> Result<MewlsState> {
        let m = self.len();
        let weights = WeightVector::uniform(m);
        let (net, _) = solve_wls_with_stats(&self.design, &weights, &self.q, self.dim)?;
        let r2 = residual_sq_norms(&self.design, &net, &self.q)?;
        let mse_uw = r2.mean();
        Ok(MewlsState {
            net,
            mu: 0.0,
            weights,
            r2,
            target_mse: mse_uw,
            mse_uw,
        })
    }

    fn check_residuals(&self, r2: &ResidualVector) -> Result<()> {
        if r2.max() <= NEGLIGIBLE_RESIDUAL * self.q_scale {
            return Err(Error::Degenerate(format!(
                "the fit reproduces the data (largest squared residual {:e}); residual moduli are all equal",
                r2.max()
            )));
        }
        Ok(())
    }

    /// Gauss-Seidel sweeps from `start` towards the fixed point at
    /// `target_mse`: least squares for `P`, then `mu` warm-started from the
    /// previous value, then the weights.
    pub fn fit_from(&self, start: &MewlsState, target_mse: f64, opts: SolverOptions) -> Result<(MewlsState, FitReport)> {
        if start.weights.len() != self.len() || start.net.rows() != self.design.ncols() {
            return Err(Error::InvalidInput("start state does not match the problem".into()));
        }
        if !(target_mse > 0.0) || target_mse > start.mse_uw * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "target MSE {target_mse:e} must be positive and at most the OLS value {:e}",
                start.mse_uw
            )));
        }
        let mut w = start.weights.clone();
        let mut mu = start.mu;
        let mut prev_net = start.net.clone();
        let mut sweeps = Vec::new();
        let mut change = f64::INFINITY;
        for it in 1..=opts.max_iters {
            let (net, stats) = solve_wls_with_stats(&self.design, &w, &self.q, self.dim)?;
            let r2 = residual_sq_norms(&self.design, &net, &self.q)?;
            self.check_residuals(&r2)?;
            let mu_new = solve_mu(&r2, target_mse, mu)?;
            let w_new = update_weights(&r2, mu_new);

            let dp = max_abs_diff(net.values(), prev_net.values()) / net.max_abs().max(f64::MIN_POSITIVE);
            let dmu = (mu_new - mu).abs() / mu_new.abs().max(1.0);
            let dw = max_abs_diff(&w_new, &w) / w_new.max();
            change = dp.max(dmu).max(dw);

            let wmse = weighted_mse(&r2, &w_new)?;
            sweeps.push(SweepRecord {
                iteration: it,
                change,
                mu: mu_new,
                weight_sum: w_new.sum(),
                entropy: entropy(&w_new),
                weighted_mse: wmse,
            });
            w = w_new;
            mu = mu_new;
            prev_net = net;
            if change <= opts.tol {
                let state = MewlsState {
                    net: prev_net,
                    mu,
                    weights: w,
                    r2,
                    target_mse,
                    mse_uw: start.mse_uw,
                };
                let report = FitReport {
                    reduction: start.mse_uw / target_mse,
                    target_mse,
                    mse_uw: start.mse_uw,
                    iterations: it,
                    converged: true,
                    final_change: change,
                    mu,
                    weighted_mse: wmse,
                    entropy: entropy(&state.weights),
                    dropped_rows: stats.dropped_rows,
                    sweeps,
                };
                return Ok((state, report));
            }
        }
        Err(Error::IterationFailure {
            what: "Gauss-Seidel sweeps",
            iterations: opts.max_iters,
            last_change: change,
            last_iterate: mu,
        })
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Solves the MEWLS system at a fixed target MSE, starting from uniform
/// weights and `mu = 0`.
pub fn gauss_seidel_fit(
    spec: &SurfaceSpec,
    data: &Dataset,
    target_mse: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(MewlsState, FitReport)> {
    let problem = MewlsProblem::new(spec, data)?;
    let ols = problem.ols()?;
    problem.fit_from(&ols, target_mse, SolverOptions { tol, max_iters })
}

/// Runs the stages of `schedule` in order, each warm-started from the
/// previous converged state. A failing stage aborts the run with the last
/// converged state and the reports so far attached.
pub fn continuation_fit(
    spec: &SurfaceSpec,
    data: &Dataset,
    schedule: &ContinuationSchedule,
) -> Result<(MewlsState, Vec<FitReport>)> {
    schedule.validate()?;
    let problem = MewlsProblem::new(spec, data)?;
    continuation_on(&problem, schedule)
}

pub fn continuation_on(problem: &MewlsProblem, schedule: &ContinuationSchedule) -> Result<(MewlsState, Vec<FitReport>)> {
    schedule.validate()?;
    let mut state = problem.ols()?;
    let mut reports = Vec::with_capacity(schedule.reductions.len());
    for (stage, &r) in schedule.reductions.iter().enumerate() {
        let target = state.mse_uw / r;
        match problem.fit_from(&state, target, schedule.options()) {
            Ok((next, report)) => {
                state = next;
                reports.push(report);
            }
            Err(e) => {
                return Err(Error::StageFailed {
                    stage,
                    reduction: r,
                    source: Box::new(e),
                    last_state: Box::new(state),
                    reports,
                })
            }
        }
    }
    Ok((state, reports))
}
