use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A non-decreasing knot sequence on `[0, 1]` together with the spline degree.
///
/// A vector of `n + d + 1` knots defines `n` basis functions of degree `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KnotVectorRepr", into = "KnotVectorRepr")]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

#[derive(Serialize, Deserialize)]
struct KnotVectorRepr {
    knots: Vec<f64>,
    degree: usize,
}

impl TryFrom<KnotVectorRepr> for KnotVector {
    type Error = Error;

    fn try_from(r: KnotVectorRepr) -> Result<Self> {
        KnotVector::new(r.knots, r.degree)
    }
}

impl From<KnotVector> for KnotVectorRepr {
    fn from(k: KnotVector) -> Self {
        KnotVectorRepr {
            knots: k.knots,
            degree: k.degree,
        }
    }
}

fn check_count(n: usize, degree: usize) -> Result<()> {
    if n <= degree {
        return Err(Error::InvalidConfig(format!(
            "basis count {n} must exceed degree {degree}"
        )));
    }
    Ok(())
}

/// Clamped knots: `d + 1` zeros, equispaced interior knots, `d + 1` ones.
pub fn make_clamped_knots(n: usize, degree: usize) -> Result<KnotVector> {
    check_count(n, degree)?;
    let segments = n - degree;
    let mut knots = Vec::with_capacity(n + degree + 1);
    knots.extend(std::iter::repeat_n(0.0, degree + 1));
    knots.extend((1..segments).map(|j| j as f64 / segments as f64));
    knots.extend(std::iter::repeat_n(1.0, degree + 1));
    KnotVector::new(knots, degree)
}

/// `n + d + 1` equally spaced knots spanning `[0, 1]`.
pub fn make_uniform_knots(n: usize, degree: usize) -> Result<KnotVector> {
    check_count(n, degree)?;
    let last = (n + degree) as f64;
    let knots = (0..=n + degree).map(|i| i as f64 / last).collect();
    KnotVector::new(knots, degree)
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if knots.len() < degree + 2 {
            return Err(Error::InvalidConfig(format!(
                "{} knots cannot carry a degree-{degree} basis",
                knots.len()
            )));
        }
        if knots.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("knots must be non-decreasing".into()));
        }
        if knots[0] != 0.0 || knots[knots.len() - 1] != 1.0 {
            return Err(Error::InvalidConfig("knots must start at 0 and end at 1".into()));
        }
        let kv = KnotVector { knots, degree };
        if kv.domain().0 >= kv.domain().1 {
            return Err(Error::InvalidConfig("empty validity interval".into()));
        }
        Ok(kv)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis_count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// True when the first and last `d + 1` knots are 0 and 1 respectively.
    pub fn is_clamped(&self) -> bool {
        let d = self.degree;
        let k = self.knots.len();
        self.knots[..=d].iter().all(|&t| t == 0.0) && self.knots[k - d - 1..].iter().all(|&t| t == 1.0)
    }

    /// Interval `[t_d, t_n]` (0-based) on which the basis is a partition of unity.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.basis_count()])
    }

    /// Index `i` of the knot interval `[t_i, t_{i+1})` containing `t`.
    ///
    /// Intervals are half-open, except that the right end of the validity
    /// interval and the final knot both belong to the last non-empty interval
    /// to their left.
    pub fn span(&self, t: f64) -> Result<usize> {
        let k = self.knots.len();
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { value: t, lo: 0.0, hi: 1.0 });
        }
        let (lo, hi) = self.domain();
        let n = self.basis_count();
        if t >= lo && t <= hi {
            // largest i in [d, n-1] with t_i <= t and t_i < t_{i+1}
            let mut i = self.degree + self.knots[self.degree..n].partition_point(|&x| x <= t) - 1;
            while self.knots[i] == self.knots[i + 1] {
                i -= 1;
            }
            return Ok(i);
        }
        let mut i = self.knots.partition_point(|&x| x <= t).saturating_sub(1).min(k - 2);
        while self.knots[i] == self.knots[i + 1] {
            i -= 1;
        }
        Ok(i)
    }

    /// All `n` basis values at `t`, by the Cox–de Boor recursion started from
    /// the single active degree-0 function. Terms with a zero denominator
    /// contribute nothing.
    pub fn eval_basis(&self, t: f64) -> Result<Vec<f64>> {
        let span = self.span(t)?;
        let k = self.knots.len();
        let tk = &self.knots;
        let mut b = vec![0.0; k - 1];
        b[span] = 1.0;
        for p in 1..=self.degree {
            for i in 0..k - 1 - p {
                let den_l = tk[i + p] - tk[i];
                let den_r = tk[i + p + 1] - tk[i + 1];
                let left = if den_l > 0.0 { (t - tk[i]) / den_l * b[i] } else { 0.0 };
                let right = if den_r > 0.0 {
                    (tk[i + p + 1] - t) / den_r * b[i + 1]
                } else {
                    0.0
                };
                b[i] = left + right;
            }
        }
        b.truncate(self.basis_count());
        Ok(b)
    }

    /// The `d + 1` possibly nonzero basis values at `t`, written into `out`.
    /// Returns the index of the first one. `t` must lie in the validity interval.
    pub fn nonzero_basis(&self, t: f64, out: &mut [f64]) -> Result<usize> {
        let d = self.degree;
        debug_assert_eq!(out.len(), d + 1);
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::Domain { value: t, lo, hi });
        }
        let span = self.span(t)?;
        let tk = &self.knots;
        let mut left = vec![0.0; d + 1];
        let mut right = vec![0.0; d + 1];
        out[0] = 1.0;
        for j in 1..=d {
            left[j] = t - tk[span + 1 - j];
            right[j] = tk[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        Ok(span - d)
    }
}

/// Free-function form of [`KnotVector::eval_basis`].
pub fn eval_basis_1d(kv: &KnotVector, t: f64) -> Result<Vec<f64>> {
    kv.eval_basis(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamped_bezier_case() {
        let kv = make_clamped_knots(4, 3).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(kv.is_clamped());
    }

    #[test]
    fn clamped_with_one_interior_knot() {
        let kv = make_clamped_knots(5, 3).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn too_few_basis_functions() {
        assert!(matches!(make_clamped_knots(3, 3), Err(Error::InvalidConfig(_))));
        assert!(matches!(make_uniform_knots(0, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn uniform_knots() {
        let kv = make_uniform_knots(9, 3).unwrap();
        assert_eq!(kv.knots().len(), 13);
        for (i, &t) in kv.knots().iter().enumerate() {
            assert!((t - i as f64 / 12.0).abs() < 1e-15);
        }
        assert_eq!(kv.domain(), (0.25, 0.75));
        assert_eq!(make_uniform_knots(1, 0).unwrap().knots(), &[0.0, 1.0]);
        let kv = make_uniform_knots(2, 1).unwrap();
        assert_eq!(kv.knots(), &[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(KnotVector::new(vec![0.0, 0.5, 0.4, 1.0], 1).is_err());
        assert!(KnotVector::new(vec![0.1, 0.5, 1.0], 0).is_err());
        assert!(KnotVector::new(vec![0.0, 1.0], 1).is_err());
    }

    #[test]
    fn cubic_bernstein_values() {
        let kv = make_clamped_knots(4, 3).unwrap();
        assert_eq!(kv.eval_basis(0.0).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(kv.eval_basis(1.0).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        let b = kv.eval_basis(0.5).unwrap();
        for (x, y) in b.iter().zip([0.125, 0.375, 0.375, 0.125]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_parameter() {
        let kv = make_clamped_knots(6, 2).unwrap();
        assert!(matches!(kv.eval_basis(1.5), Err(Error::Domain { .. })));
        assert!(matches!(kv.eval_basis(-1e-9), Err(Error::Domain { .. })));
    }

    #[test]
    fn nonzero_matches_full_evaluation() {
        for kv in [
            make_clamped_knots(7, 3).unwrap(),
            make_uniform_knots(9, 3).unwrap(),
            make_clamped_knots(3, 1).unwrap(),
        ] {
            let (lo, hi) = kv.domain();
            let d = kv.degree();
            let mut buf = vec![0.0; d + 1];
            for s in 0..=200 {
                let t = lo + (hi - lo) * s as f64 / 200.0;
                let full = kv.eval_basis(t).unwrap();
                let first = kv.nonzero_basis(t, &mut buf).unwrap();
                for (i, &f) in full.iter().enumerate() {
                    let local = if i >= first && i <= first + d { buf[i - first] } else { 0.0 };
                    assert!((f - local).abs() < 1e-14, "t={t} i={i}");
                }
                assert!((full.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interior_knot_is_half_open() {
        let kv = make_clamped_knots(5, 1).unwrap();
        // knots 0,0,.25,.5,.75,1,1
        assert_eq!(kv.span(0.5).unwrap(), 3);
        let b = kv.eval_basis(0.5).unwrap();
        assert_eq!(b, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn uniform_validity_endpoint_closes_partition() {
        let kv = make_uniform_knots(9, 3).unwrap();
        let b = kv.eval_basis(0.75).unwrap();
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // outside the validity interval the basis no longer sums to one
        let b = kv.eval_basis(0.05).unwrap();
        assert!(b.iter().sum::<f64>() < 1.0);
    }
}
