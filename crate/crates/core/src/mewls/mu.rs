//! The scalar equation for the MSE multiplier `mu` and the softmax weight law.
//!
//! All exponentials are evaluated relative to the extreme exponent so that
//! `mu * r^2` far beyond the `f64` exponent range is harmless.

use crate::error::{Error, Result};
use crate::wls::WeightVector;

/// Relative spread of the squared residuals below which they count as equal.
const EQUAL_RESIDUALS: f64 = 1e-12;

/// Exponent shift: `min r^2` for `mu >= 0`, `max r^2` otherwise, so that every
/// factor `exp(-mu (r_i^2 - c))` is at most one.
fn shift(r2: &[f64], mu: f64) -> f64 {
    if mu >= 0.0 {
        r2.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        r2.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `F2(mu) = sum_i exp(-mu r_i^2) (r_i^2 - MSE)`, returned multiplied by the
/// positive factor `exp(mu c)` with `c` the exponent shift. The scaled
/// function has the same roots and sign.
pub fn mu_equation(r2: &[f64], mu: f64, target_mse: f64) -> f64 {
    let c = shift(r2, mu);
    r2.iter()
        .map(|&x| (-mu * (x - c)).exp() * (x - target_mse))
        .sum()
}

/// Exact derivative in `mu` of [`mu_equation`] (including its scale factor).
///
/// Where the equation vanishes this equals the scaled `dF2/dmu =
/// sum_i r_i^2 exp(-mu r_i^2) (MSE - r_i^2)`; at `mu = 0`, `MSE = mean(r^2)`
/// it is exactly that sum.
pub fn mu_equation_derivative(r2: &[f64], mu: f64, target_mse: f64) -> f64 {
    let c = shift(r2, mu);
    r2.iter()
        .map(|&x| (-mu * (x - c)).exp() * (x - target_mse) * (c - x))
        .sum()
}

/// Softmax weights `w_k = exp(-mu r_k^2) / sum_i exp(-mu r_i^2)`.
pub fn update_weights(r2: &[f64], mu: f64) -> WeightVector {
    let c = shift(r2, mu);
    let mut w: Vec<f64> = r2.iter().map(|&x| (-mu * (x - c)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    WeightVector::from_normalized(w)
}

/// Mean and variance of `r2` under the softmax weights at `mu`.
fn tilted_moments(r2: &[f64], mu: f64) -> (f64, f64) {
    let c = shift(r2, mu);
    let (mut z, mut s1) = (0.0, 0.0);
    for &x in r2 {
        let e = (-mu * (x - c)).exp();
        z += e;
        s1 += e * x;
    }
    let mean = s1 / z;
    let var = r2
        .iter()
        .map(|&x| (-mu * (x - c)).exp() * (x - mean) * (x - mean))
        .sum::<f64>()
        / z;
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSolverOptions {
    pub max_iters: usize,
}

impl Default for MuSolverOptions {
    fn default() -> Self {
        MuSolverOptions { max_iters: 200 }
    }
}

/// Root of the multiplier equation, by Newton's method on the normalized
/// form `g(mu) = sum_k w_k(mu) r_k^2 - MSE` safeguarded by bisection.
///
/// `g` is strictly decreasing unless all residuals coincide, so the root is
/// unique whenever `min r^2 < MSE < max r^2`.
pub fn solve_mu(r2: &[f64], target_mse: f64, mu0: f64) -> Result<f64> {
    solve_mu_with(r2, target_mse, mu0, MuSolverOptions::default())
}

pub fn solve_mu_with(r2: &[f64], target_mse: f64, mu0: f64, opts: MuSolverOptions) -> Result<f64> {
    if r2.is_empty() {
        return Err(Error::InvalidInput("no residuals".into()));
    }
    if r2.iter().any(|x| !x.is_finite() || *x < 0.0) || !target_mse.is_finite() || !mu0.is_finite() {
        return Err(Error::InvalidInput("residuals, target and start must be finite".into()));
    }
    let lo_r = r2.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_r = r2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ftol = 4.0 * f64::EPSILON * hi_r.max(target_mse.abs());

    let g = |mu: f64| tilted_moments(r2, mu).0 - target_mse;
    let g0 = g(mu0);
    if g0.abs() <= ftol {
        return Ok(mu0);
    }
    let range = hi_r - lo_r;
    if range <= EQUAL_RESIDUALS * hi_r {
        return Err(Error::Degenerate(
            "all residuals have the same modulus; the weighted MSE cannot move".into(),
        ));
    }
    if target_mse <= lo_r || target_mse >= hi_r {
        return Err(Error::InfeasibleTarget {
            target: target_mse,
            min: lo_r,
            max: hi_r,
        });
    }

    // bracket the root, walking away from mu0 in the direction of descent
    let dir = if g0 > 0.0 { 1.0 } else { -1.0 };
    let mut step = 1.0 / range;
    let (mut a, mut b) = (mu0, mu0 + dir * step);
    let mut expansions = 0;
    while g(b) * dir > 0.0 {
        a = b;
        step *= 2.0;
        b = mu0 + dir * step;
        expansions += 1;
        if expansions > 2000 || !b.is_finite() {
            return Err(Error::IterationFailure {
                what: "multiplier bracketing",
                iterations: expansions,
                last_change: step,
                last_iterate: b,
            });
        }
    }
    // keep lo < hi with g(lo) > 0 > g(hi)
    let (mut lo, mut hi) = if dir > 0.0 { (a, b) } else { (b, a) };

    let mut mu = mu0.clamp(lo, hi);
    if mu == lo || mu == hi {
        mu = 0.5 * (lo + hi);
    }
    let mut last_change = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let (mean, var) = tilted_moments(r2, mu);
        let gm = mean - target_mse;
        if gm.abs() <= ftol {
            return Ok(mu);
        }
        if gm > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = if var > 0.0 { mu + gm / var } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        last_change = (next - mu).abs();
        mu = next;
        if last_change <= 4.0 * f64::EPSILON * mu.abs().max(1.0 / range) || hi - lo <= 4.0 * f64::EPSILON * mu.abs() {
            return Ok(mu);
        }
    }
    Err(Error::IterationFailure {
        what: "multiplier equation",
        iterations: opts.max_iters,
        last_change,
        last_iterate: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN3: f64 = 1.098_612_288_668_109_8;

    #[test]
    fn uniform_root_at_mean() {
        let r2 = [0.3, 1.2, 0.05, 2.0];
        let mean = r2.iter().sum::<f64>() / 4.0;
        assert!(mu_equation(&r2, 0.0, mean).abs() < 1e-15);
        assert_eq!(solve_mu(&r2, mean, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_residual_closed_form() {
        let r2 = [0.0, 1.0];
        assert!(mu_equation(&r2, LN3, 0.25).abs() < 1e-15);
        let mu = solve_mu(&r2, 0.25, 0.0).unwrap();
        assert!((mu - LN3).abs() < 1e-10);
        let w = update_weights(&r2, LN3);
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn constant_residuals() {
        let r2 = [0.7; 5];
        for mu in [-3.0, 0.0, 0.4, 50.0] {
            assert_eq!(mu_equation(&r2, mu, 0.7), 0.0);
            assert_eq!(mu_equation_derivative(&r2, mu, 0.7), 0.0);
        }
        assert!(matches!(solve_mu(&[1.0, 1.0, 1.0], 0.5, 0.0), Err(Error::Degenerate(_))));
        assert!(matches!(solve_mu(&[1.0, 1.0, 1.0], 2.0, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn infeasible_targets() {
        let r2 = [0.1, 0.5, 0.9];
        assert!(matches!(solve_mu(&r2, 0.05, 0.0), Err(Error::InfeasibleTarget { .. })));
        assert!(matches!(solve_mu(&r2, 0.1, 0.0), Err(Error::InfeasibleTarget { .. })));
        assert!(matches!(solve_mu(&r2, 1.0, 0.0), Err(Error::InfeasibleTarget { .. })));
    }

    #[test]
    fn targets_above_the_mean_give_negative_mu() {
        let r2 = [0.1, 0.5, 0.9];
        let mu = solve_mu(&r2, 0.7, 0.0).unwrap();
        assert!(mu < 0.0);
        let w = update_weights(&r2, mu);
        let wm: f64 = w.iter().zip(&r2).map(|(a, b)| a * b).sum();
        assert!((wm - 0.7).abs() < 1e-14);
    }

    #[test]
    fn huge_multipliers_stay_finite() {
        let r2 = [1e-6, 2e-6, 0.5, 0.9];
        let mu = solve_mu(&r2, 1.2e-6, 0.0).unwrap();
        assert!(mu > 1e5);
        let w = update_weights(&r2, mu);
        assert!((w.sum() - 1.0).abs() < 1e-15);
        assert!(w[2] == 0.0 || w[2] < 1e-300);
        assert!(mu_equation(&r2, mu, 1.2e-6).is_finite());
    }

    #[test]
    fn derivative_at_uniform_point_is_s_star() {
        let r2 = [0.2, 0.0, 1.5, 0.4];
        let mean = r2.iter().sum::<f64>() / 4.0;
        let s: f64 = r2.iter().map(|x| x * (mean - x)).sum();
        assert!((mu_equation_derivative(&r2, 0.0, mean) - s).abs() < 1e-15);
    }

    #[test]
    fn weights_are_shift_invariant() {
        let r2 = [0.3, 0.1, 2.0, 0.7];
        let shifted: Vec<f64> = r2.iter().map(|x| x + 5.0).collect();
        let (a, b) = (update_weights(&r2, 1.7), update_weights(&shifted, 1.7));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        let u = update_weights(&r2, 0.0);
        assert!(u.iter().all(|&x| x == 0.25));
    }

    #[test]
    fn warm_start_from_either_side() {
        let r2: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.01 + 1e-3).collect();
        let target = 0.02;
        let a = solve_mu(&r2, target, 0.0).unwrap();
        let b = solve_mu(&r2, target, 10.0 * a).unwrap();
        let c = solve_mu(&r2, target, -3.0).unwrap();
        assert!((a - b).abs() < 1e-9 * a && (a - c).abs() < 1e-9 * a);
    }
}
