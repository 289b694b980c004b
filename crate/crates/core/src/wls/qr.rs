//! Row-sequential Givens QR for banded least-squares problems.
//!
//! Rows are rotated one at a time into an upper-triangular factor `R` whose
//! row `j` is confined to columns `j..=j + bw`, `bw` being the largest column
//! spread of any input row. Independent blocks of rows can be factored
//! separately and merged by feeding the rows of one factor into another.

/// Upper-triangular band factor together with the rotated right-hand sides.
#[derive(Debug, Clone)]
pub(crate) struct BandedQr {
    n: usize,
    bw: usize,
    s: usize,
    /// `n x (bw + 1)`: entry `(j, j + o)` lives at `j * (bw + 1) + o`.
    r: Vec<f64>,
    /// `n x s` rotated right-hand sides.
    rhs: Vec<f64>,
    work: Vec<f64>,
    y: Vec<f64>,
}

impl BandedQr {
    pub(crate) fn new(n: usize, bw: usize, s: usize) -> Self {
        let bw = bw.min(n.saturating_sub(1));
        BandedQr {
            n,
            bw,
            s,
            r: vec![0.0; n * (bw + 1)],
            rhs: vec![0.0; n * s],
            work: vec![0.0; n],
            y: vec![0.0; s],
        }
    }

    #[inline]
    fn at(&self, j: usize, k: usize) -> usize {
        j * (self.bw + 1) + (k - j)
    }

    /// Rotates the row `scale * (cols, vals | rhs)` into the factor.
    pub(crate) fn add_row(&mut self, cols: &[usize], vals: &[f64], scale: f64, rhs: &[f64]) {
        let Some(&lo) = cols.first() else { return };
        let mut hi = lo;
        for (&c, &v) in cols.iter().zip(vals) {
            self.work[c] += scale * v;
            hi = hi.max(c);
        }
        for (y, &q) in self.y.iter_mut().zip(rhs) {
            *y = scale * q;
        }
        self.eliminate(lo, hi);
    }

    fn eliminate(&mut self, lo: usize, mut hi: usize) {
        let bw = self.bw;
        let s = self.s;
        let mut j = lo;
        while j <= hi {
            let x = self.work[j];
            if x == 0.0 {
                j += 1;
                continue;
            }
            let djj = self.at(j, j);
            let rjj = self.r[djj];
            if rjj == 0.0 {
                // empty pivot row: the work row takes its place
                debug_assert!(hi <= j + bw);
                for k in j..=hi {
                    let idx = self.at(j, k);
                    self.r[idx] = self.work[k];
                    self.work[k] = 0.0;
                }
                self.rhs[j * s..(j + 1) * s].copy_from_slice(&self.y);
                return;
            }
            let h = rjj.hypot(x);
            let (c, sn) = (rjj / h, x / h);
            self.r[djj] = h;
            self.work[j] = 0.0;
            let end = (j + bw).min(self.n - 1);
            for k in j + 1..=end {
                let idx = djj + (k - j);
                let a = self.r[idx];
                let b = self.work[k];
                self.r[idx] = c * a + sn * b;
                self.work[k] = c * b - sn * a;
            }
            hi = hi.max(end);
            for t in 0..s {
                let a = self.rhs[j * s + t];
                let b = self.y[t];
                self.rhs[j * s + t] = c * a + sn * b;
                self.y[t] = c * b - sn * a;
            }
            j += 1;
        }
    }

    /// Folds another factor of the same shape into this one.
    pub(crate) fn merge(&mut self, other: &BandedQr) {
        debug_assert_eq!((self.n, self.bw, self.s), (other.n, other.bw, other.s));
        for j in 0..other.n {
            let d = other.at(j, j);
            if other.r[d] == 0.0 {
                continue;
            }
            let end = (j + other.bw).min(other.n - 1);
            for k in j..=end {
                self.work[k] = other.r[d + (k - j)];
            }
            self.y.copy_from_slice(&other.rhs[j * self.s..(j + 1) * self.s]);
            self.eliminate(j, end);
        }
    }

    /// Number of diagonal entries above `rel_tol * max |R_jj|`.
    pub(crate) fn rank(&self, rel_tol: f64) -> usize {
        let diag: Vec<f64> = (0..self.n).map(|j| self.r[self.at(j, j)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        diag.iter().filter(|&&d| d > rel_tol * max).count()
    }

    /// Back substitution `R X = rhs`; returns `X` as `n x s` row-major.
    pub(crate) fn solve(&self) -> Vec<f64> {
        let (n, s, bw) = (self.n, self.s, self.bw);
        let mut x = vec![0.0; n * s];
        for j in (0..n).rev() {
            let d = self.at(j, j);
            let end = (j + bw).min(n - 1);
            for t in 0..s {
                let mut acc = self.rhs[j * s + t];
                for k in j + 1..=end {
                    acc -= self.r[d + (k - j)] * x[k * s + t];
                }
                x[j * s + t] = acc / self.r[d];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn small_dense_problem_matches_normal_equations() {
        // 6 x 3 full rows
        let a = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 2.0, 0.5, //
                0.3, -1.0, 2.0, //
                2.0, 0.1, 0.0, //
                -0.7, 0.4, 1.1, //
                1.5, 1.5, -0.2, //
                0.0, 0.9, 0.3,
            ],
        );
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.3, 2.2, -0.4]);
        let mut qr = BandedQr::new(3, 2, 1);
        for k in 0..6 {
            let row: Vec<f64> = a.row(k).iter().copied().collect();
            qr.add_row(&[0, 1, 2], &row, 1.0, &[b[k]]);
        }
        assert_eq!(qr.rank(1e-12), 3);
        let x = qr.solve();
        let expect = (a.transpose() * &a).lu().solve(&(a.transpose() * &b)).unwrap();
        for i in 0..3 {
            assert!((x[i] - expect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn split_and_merge_agrees_with_single_pass() {
        let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..40)
            .map(|k| {
                let c0 = k % 8;
                let cols: Vec<usize> = (c0..c0 + 3).collect();
                let vals = vec![1.0 + (k as f64 * 0.37).sin(), 0.5 + (k as f64).cos().abs(), 0.25];
                (cols, vals)
            })
            .collect();
        let mut whole = BandedQr::new(10, 2, 2);
        let mut a = BandedQr::new(10, 2, 2);
        let mut b = BandedQr::new(10, 2, 2);
        for (k, (c, v)) in rows.iter().enumerate() {
            let y = [k as f64, 1.0];
            whole.add_row(c, v, 1.0, &y);
            if k < 17 { a.add_row(c, v, 1.0, &y) } else { b.add_row(c, v, 1.0, &y) }
        }
        a.merge(&b);
        let (x1, x2) = (whole.solve(), a.solve());
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-10 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn missing_column_reduces_rank() {
        let mut qr = BandedQr::new(3, 1, 1);
        qr.add_row(&[0, 1], &[1.0, 1.0], 1.0, &[1.0]);
        qr.add_row(&[0, 1], &[1.0, -1.0], 1.0, &[0.0]);
        assert_eq!(qr.rank(1e-12), 2);
    }
}
