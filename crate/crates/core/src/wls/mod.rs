//! Weighted least squares: the normal system `B^T W B P = B^T W Q`, solved
//! through an orthogonal factorization of `W^{1/2} B`.

mod qr;

use std::ops::Deref;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bspline::{ControlNet, DesignMatrix};
use crate::error::{Error, Result};
use qr::BandedQr;

/// Weights at or below this value are left out of the factorization.
pub const TINY_WEIGHT: f64 = 1e-300;

/// Relative threshold on `|R_jj|` below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

const MIN_CHUNK: usize = 4096;
const MAX_CHUNKS: usize = 16;

/// A discrete probability distribution over the data points.
///
/// Entries are positive in exact arithmetic; strongly down-weighted points may
/// underflow to zero in floating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn uniform(m: usize) -> Self {
        WeightVector(vec![1.0 / m as f64; m])
    }

    /// Normalizes nonnegative raw weights to unit sum.
    pub fn from_unnormalized(raw: Vec<f64>) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        Ok(WeightVector(raw.into_iter().map(|w| w / total).collect()))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_normalized(w: Vec<f64>) -> Self {
        WeightVector(w)
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Squared residual norms `r_k^2 = ||S(u_k, v_k) - Q_k||^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualVector(Vec<f64>);

impl ResidualVector {
    pub fn new(r2: Vec<f64>) -> Result<Self> {
        if r2.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("squared residuals must be finite and nonnegative".into()));
        }
        Ok(ResidualVector(r2))
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ResidualVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Bookkeeping of one weighted solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlsStats {
    /// Rows skipped because their weight was at most [`TINY_WEIGHT`].
    pub dropped_rows: usize,
    pub rank: usize,
}

/// Minimizes `sum_k w_k ||(B P)_k - Q_k||^2` over `P`.
///
/// The weights need not be normalized. All `s` columns of `Q` (row-major,
/// `m x s`) share one factorization.
pub fn solve_wls(b: &DesignMatrix, w: &[f64], q: &[f64], dim: usize) -> Result<ControlNet> {
    solve_wls_with_stats(b, w, q, dim).map(|(net, _)| net)
}

pub fn solve_wls_with_stats(
    b: &DesignMatrix,
    w: &[f64],
    q: &[f64],
    dim: usize,
) -> Result<(ControlNet, WlsStats)> {
    let m = b.nrows();
    let n = b.ncols();
    if dim == 0 || w.len() != m || q.len() != m * dim {
        return Err(Error::InvalidInput(format!(
            "wls shapes disagree: {m} rows, {} weights, {} observations of width {dim}",
            w.len(),
            q.len()
        )));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let bw = b.bandwidth();
    let chunk = MIN_CHUNK.max(m.div_ceil(MAX_CHUNKS));
    let rows: Vec<usize> = (0..m).collect();
    let partial: Vec<(BandedQr, usize)> = rows
        .par_chunks(chunk)
        .map(|ks| {
            let mut f = BandedQr::new(n, bw, dim);
            let mut dropped = 0;
            for &k in ks {
                if w[k] <= TINY_WEIGHT {
                    dropped += 1;
                    continue;
                }
                let (c, v) = b.row(k);
                f.add_row(c, v, w[k].sqrt(), &q[k * dim..(k + 1) * dim]);
            }
            (f, dropped)
        })
        .collect();
    let mut iter = partial.into_iter();
    let (mut factor, mut dropped_rows) = iter.next().expect("at least one chunk");
    for (f, d) in iter {
        factor.merge(&f);
        dropped_rows += d;
    }
    let rank = factor.rank(RANK_TOLERANCE);
    if rank < n {
        return Err(Error::SingularSystem { rank, size: n });
    }
    let net = ControlNet::new(n, dim, factor.solve())?;
    Ok((net, WlsStats { dropped_rows, rank }))
}

/// Signed residuals `B P - Q`, `m x s` row-major.
pub fn residuals(b: &DesignMatrix, net: &ControlNet, q: &[f64]) -> Result<Vec<f64>> {
    let mut r = b.apply(net)?;
    if q.len() != r.len() {
        return Err(Error::InvalidInput(format!(
            "{} observations for {} fitted values",
            q.len(),
            r.len()
        )));
    }
    r.par_iter_mut().zip(q.par_iter()).for_each(|(a, &y)| *a -= y);
    Ok(r)
}

/// `r_k^2 = ||row_k(B) P - Q_k||^2`.
pub fn residual_sq_norms(b: &DesignMatrix, net: &ControlNet, q: &[f64]) -> Result<ResidualVector> {
    let r = residuals(b, net, q)?;
    let r2 = r
        .par_chunks(net.dim())
        .map(|c| c.iter().map(|x| x * x).sum())
        .collect();
    Ok(ResidualVector(r2))
}

/// `sum_k w_k r_k^2`.
pub fn weighted_mse(r2: &[f64], w: &[f64]) -> Result<f64> {
    if r2.len() != w.len() {
        return Err(Error::InvalidInput(format!(
            "{} residuals for {} weights",
            r2.len(),
            w.len()
        )));
    }
    Ok(r2.iter().zip(w).map(|(r, w)| r * w).sum())
}
