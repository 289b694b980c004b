//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Degree-`d` basis function `i` by the textbook recursion, with `0/0 = 0`
/// and the last non-empty degree-0 function closed on the right.
pub fn cox_de_boor(knots: &[f64], d: usize, i: usize, t: f64) -> f64 {
    if d == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        if a <= t && t < b {
            return 1.0;
        }
        // right end: the last span with a < b covers t = b
        let last = (0..knots.len() - 1).rev().find(|&j| knots[j] < knots[j + 1]).unwrap();
        return if i == last && t == b { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let den1 = knots[i + d] - knots[i];
    if den1 > 0.0 {
        v += (t - knots[i]) / den1 * cox_de_boor(knots, d - 1, i, t);
    }
    let den2 = knots[i + d + 1] - knots[i + 1];
    if den2 > 0.0 {
        v += (knots[i + d + 1] - t) / den2 * cox_de_boor(knots, d - 1, i + 1, t);
    }
    v
}

/// Cubic Bernstein polynomials.
pub fn bernstein3(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t]
}

/// `(B^T W B)^{-1} B^T W Q` by a dense LU solve of the normal equations.
pub fn dense_wls(b: &DMatrix<f64>, w: &[f64], q: &DMatrix<f64>) -> DMatrix<f64> {
    let wd = DMatrix::from_diagonal(&DVector::from_column_slice(w));
    let bt_w = b.transpose() * wd;
    (&bt_w * b).lu().solve(&(bt_w * q)).expect("nonsingular normal equations")
}

pub fn softmax_neg(r2: &[f64], mu: f64) -> Vec<f64> {
    let c = if mu >= 0.0 {
        r2.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        r2.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let e: Vec<f64> = r2.iter().map(|&x| (-mu * (x - c)).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// The three-block system for scalar data, unknowns `x = (P, mu, w)`:
/// `B^T W (B P - q)`, the softmax-weighted mean of `r^2` minus the target,
/// and `w - softmax(-mu r^2)`.
pub fn mewls_system(b: &DMatrix<f64>, q: &[f64], target: f64, x: &DVector<f64>) -> DVector<f64> {
    let (m, n) = (b.nrows(), b.ncols());
    let p = x.rows(0, n).into_owned();
    let mu = x[n];
    let w = x.rows(n + 1, m).into_owned();
    let r = b * &p - DVector::from_column_slice(q);
    let r2: Vec<f64> = r.iter().map(|v| v * v).collect();
    let f1 = b.transpose() * DVector::from_iterator(m, (0..m).map(|k| w[k] * r[k]));
    let sm = softmax_neg(&r2, mu);
    let f2: f64 = sm.iter().zip(&r2).map(|(a, b)| a * b).sum::<f64>() - target;
    let mut f = DVector::zeros(n + 1 + m);
    f.rows_mut(0, n).copy_from(&f1);
    f[n] = f2;
    for k in 0..m {
        f[n + 1 + k] = w[k] - sm[k];
    }
    f
}

/// Newton's method with a finite-difference Jacobian and backtracking.
pub fn newton(f: impl Fn(&DVector<f64>) -> DVector<f64>, x0: DVector<f64>, tol: f64, max_iters: usize) -> Option<DVector<f64>> {
    let mut x = x0;
    let mut fx = f(&x);
    for _ in 0..max_iters {
        if fx.amax() <= tol {
            return Some(x);
        }
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let h = 1e-6 * x[c].abs().max(1e-2);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            j.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * h)));
        }
        let dx = j.lu().solve(&(-&fx))?;
        let mut step = 1.0;
        loop {
            let xn = &x + &dx * step;
            let fnx = f(&xn);
            if fnx.amax() < fx.amax() || step < 1e-6 {
                x = xn;
                fx = fnx;
                break;
            }
            step *= 0.5;
        }
    }
    (fx.amax() <= tol).then_some(x)
}

/// Root of [`mewls_system`] at `target = mse_uw / r`, tracked by Newton from
/// the OLS point through `steps` equally spaced reduction factors.
pub fn newton_mewls_root(b: &DMatrix<f64>, q: &[f64], r: f64, steps: usize) -> Option<(DVector<f64>, f64, DVector<f64>)> {
    let (m, n) = (b.nrows(), b.ncols());
    let w0 = vec![1.0 / m as f64; m];
    let qm = DMatrix::from_column_slice(m, 1, q);
    let p0 = dense_wls(b, &w0, &qm);
    let res = b * &p0 - &qm;
    let mse_uw = res.iter().map(|v| v * v).sum::<f64>() / m as f64;
    let mut x = DVector::zeros(n + 1 + m);
    x.rows_mut(0, n).copy_from(&p0.column(0));
    x.rows_mut(n + 1, m).fill(1.0 / m as f64);
    for s in 1..=steps {
        let rs = 1.0 + (r - 1.0) * s as f64 / steps as f64;
        let target = mse_uw / rs;
        x = newton(|y| mewls_system(b, q, target, y), x, 1e-14, 100)?;
    }
    Some((x.rows(0, n).into_owned(), x[n], x.rows(n + 1, m).into_owned()))
}
