use serde::{Deserialize, Serialize};

use super::knots::{make_clamped_knots, make_uniform_knots, KnotVector};
use crate::error::{Error, Result};

/// Tensor-product spline configuration.
///
/// When `closed_u` is set, the last `wrap_count` control rows (along `u`) are
/// copies of the first `wrap_count`, so only `n1 - wrap_count` rows are free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub knots_u: KnotVector,
    pub knots_v: KnotVector,
    pub dim: usize,
    #[serde(default)]
    pub closed_u: bool,
    #[serde(default)]
    pub wrap_count: usize,
}

impl SurfaceSpec {
    pub fn new(knots_u: KnotVector, knots_v: KnotVector, dim: usize) -> Result<Self> {
        let spec = SurfaceSpec {
            knots_u,
            knots_v,
            dim,
            closed_u: false,
            wrap_count: 0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `n1 x n2` control grid of degree `d` with clamped knots in both directions.
    pub fn clamped(n1: usize, n2: usize, degree: usize, dim: usize) -> Result<Self> {
        Self::new(make_clamped_knots(n1, degree)?, make_clamped_knots(n2, degree)?, dim)
    }

    /// Surface closed along `u`: uniform knots on `n1_free + d` rows whose last
    /// `d` rows repeat the first `d`, and clamped knots along `v`.
    pub fn closed_u(n1_free: usize, n2: usize, degree: usize, dim: usize) -> Result<Self> {
        let spec = SurfaceSpec {
            knots_u: make_uniform_knots(n1_free + degree, degree)?,
            knots_v: make_clamped_knots(n2, degree)?,
            dim,
            closed_u: true,
            wrap_count: degree,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.knots_u.degree() != self.knots_v.degree() {
            return Err(Error::InvalidConfig(format!(
                "degrees differ: {} along u, {} along v",
                self.knots_u.degree(),
                self.knots_v.degree()
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("codomain dimension must be at least 1".into()));
        }
        if !self.closed_u && self.wrap_count != 0 {
            return Err(Error::InvalidConfig("wrap_count requires closed_u".into()));
        }
        if self.closed_u && self.wrap_count >= self.n1() - self.wrap_count {
            return Err(Error::InvalidConfig(format!(
                "wrap count {} must be below the {} free rows",
                self.wrap_count,
                self.n1() - self.wrap_count.min(self.n1())
            )));
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.knots_u.degree()
    }

    pub fn n1(&self) -> usize {
        self.knots_u.basis_count()
    }

    pub fn n2(&self) -> usize {
        self.knots_v.basis_count()
    }

    /// Rows along `u` that are actual unknowns.
    pub fn free_rows(&self) -> usize {
        self.n1() - self.wrap_count
    }

    /// Number of unknown control points (columns of the design matrix).
    pub fn unknowns(&self) -> usize {
        self.free_rows() * self.n2()
    }

    pub fn control_count(&self) -> usize {
        self.n1() * self.n2()
    }

    /// Validity rectangle `([u_lo, u_hi], [v_lo, v_hi])`.
    pub fn domain(&self) -> ((f64, f64), (f64, f64)) {
        (self.knots_u.domain(), self.knots_v.domain())
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let ((u0, u1), (v0, v1)) = self.domain();
        u >= u0 && u <= u1 && v >= v0 && v <= v1
    }

    /// Design-matrix column of the control point `(i, j)` (0-based), with
    /// wrapped rows folded onto the free ones.
    pub fn column_of(&self, i: usize, j: usize) -> usize {
        let rows = self.free_rows();
        j * rows + i % rows
    }
}

/// The `(n1 n2) x s` matrix of control points, stored row-major with the row
/// index running `i` fastest (column-wise over the control grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlNet {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl ControlNet {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * dim {
            return Err(Error::InvalidInput(format!(
                "control net of {rows}x{dim} needs {} values, got {}",
                rows * dim,
                values.len()
            )));
        }
        Ok(ControlNet { rows, dim, values })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        ControlNet {
            rows,
            dim,
            values: vec![0.0; rows * dim],
        }
    }

    pub fn from_fn(rows: usize, dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * dim);
        for r in 0..rows {
            for c in 0..dim {
                values.push(f(r, c));
            }
        }
        ControlNet { rows, dim, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn net_index(spec: &SurfaceSpec, net: &ControlNet) -> Result<impl Fn(usize, usize) -> usize> {
    if net.dim() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "control net has dimension {}, surface expects {}",
            net.dim(),
            spec.dim
        )));
    }
    let n1 = spec.n1();
    let free = spec.free_rows();
    if net.rows() == spec.control_count() {
        Ok(Box::new(move |i: usize, j: usize| j * n1 + i) as Box<dyn Fn(usize, usize) -> usize>)
    } else if net.rows() == spec.unknowns() {
        Ok(Box::new(move |i: usize, j: usize| j * free + i % free) as Box<dyn Fn(usize, usize) -> usize>)
    } else {
        Err(Error::InvalidInput(format!(
            "control net has {} rows, surface expects {} (or {} free)",
            net.rows(),
            spec.control_count(),
            spec.unknowns()
        )))
    }
}

/// Evaluates `S(u, v) = sum_ij P_ij b_i(u) b_j(v)`.
///
/// `net` may hold either the full `n1 n2` grid or, for closed surfaces, only
/// the free rows.
pub fn eval_surface(spec: &SurfaceSpec, net: &ControlNet, u: f64, v: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.dim];
    eval_surface_into(spec, net, u, v, &mut out)?;
    Ok(out)
}

pub(crate) fn eval_surface_into(
    spec: &SurfaceSpec,
    net: &ControlNet,
    u: f64,
    v: f64,
    out: &mut [f64],
) -> Result<()> {
    let idx = net_index(spec, net)?;
    let d = spec.degree();
    let mut bu = vec![0.0; d + 1];
    let mut bv = vec![0.0; d + 1];
    let iu = spec.knots_u.nonzero_basis(u, &mut bu)?;
    let jv = spec.knots_v.nonzero_basis(v, &mut bv)?;
    out.iter_mut().for_each(|x| *x = 0.0);
    for (b, &wv) in bv.iter().enumerate() {
        for (a, &wu) in bu.iter().enumerate() {
            let row = net.row(idx(iu + a, jv + b));
            let w = wu * wv;
            for (o, &p) in out.iter_mut().zip(row) {
                *o += w * p;
            }
        }
    }
    Ok(())
}

/// Builds the full control grid of a closed surface from its free rows by
/// copying the first `wrap_count` rows (along `u`) after the last free one.
pub fn expand_closed_u(spec: &SurfaceSpec, free_net: &ControlNet) -> Result<ControlNet> {
    if spec.wrap_count >= spec.free_rows() {
        return Err(Error::InvalidConfig(format!(
            "wrap count {} must be below the {} free rows",
            spec.wrap_count,
            spec.free_rows()
        )));
    }
    if free_net.rows() != spec.unknowns() || free_net.dim() != spec.dim {
        return Err(Error::InvalidInput(format!(
            "free net must be {}x{}, got {}x{}",
            spec.unknowns(),
            spec.dim,
            free_net.rows(),
            free_net.dim()
        )));
    }
    let n1 = spec.n1();
    let free = spec.free_rows();
    let dim = spec.dim;
    Ok(ControlNet::from_fn(spec.control_count(), dim, |r, c| {
        let (i, j) = (r % n1, r / n1);
        free_net.values()[(j * free + i % free) * dim + c]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_net_reproduces_constant() {
        let spec = SurfaceSpec::clamped(5, 4, 2, 2).unwrap();
        let net = ControlNet::from_fn(spec.control_count(), 2, |_, c| [3.5, -1.0][c]);
        for &(u, v) in &[(0.0, 0.0), (0.3, 0.9), (1.0, 0.5), (0.77, 1.0)] {
            let p = eval_surface(&spec, &net, u, v).unwrap();
            assert!((p[0] - 3.5).abs() < 1e-13 && (p[1] + 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn corners_are_interpolated() {
        let spec = SurfaceSpec::clamped(4, 6, 3, 1).unwrap();
        let net = ControlNet::from_fn(24, 1, |r, _| r as f64 * 1.7 - 3.0);
        let n1 = 4;
        let cases = [
            ((0.0, 0.0), 0),
            ((1.0, 0.0), n1 - 1),
            ((0.0, 1.0), 5 * n1),
            ((1.0, 1.0), 6 * n1 - 1),
        ];
        for ((u, v), r) in cases {
            let p = eval_surface(&spec, &net, u, v).unwrap();
            assert!((p[0] - net.row(r)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_domain_is_rejected() {
        let spec = SurfaceSpec::closed_u(6, 5, 3, 3).unwrap();
        let net = ControlNet::zeros(spec.unknowns(), 3);
        assert!(matches!(eval_surface(&spec, &net, 0.1, 0.5), Err(Error::Domain { .. })));
        assert!(eval_surface(&spec, &net, 0.25, 0.5).is_ok());
    }

    #[test]
    fn mismatched_net_is_rejected() {
        let spec = SurfaceSpec::clamped(4, 4, 3, 1).unwrap();
        let net = ControlNet::zeros(15, 1);
        assert!(matches!(eval_surface(&spec, &net, 0.5, 0.5), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn closed_expansion_copies_rows() {
        let spec = SurfaceSpec::closed_u(6, 5, 3, 1).unwrap();
        assert_eq!((spec.n1(), spec.n2()), (9, 5));
        let free = ControlNet::from_fn(30, 1, |r, _| r as f64);
        let full = expand_closed_u(&spec, &free).unwrap();
        assert_eq!(full.rows(), 45);
        for j in 0..5 {
            for i in 0..3 {
                assert_eq!(full.row(j * 9 + 6 + i), full.row(j * 9 + i));
            }
            for i in 0..6 {
                assert_eq!(full.row(j * 9 + i)[0], (j * 6 + i) as f64);
            }
        }
    }

    #[test]
    fn zero_wrap_is_identity() {
        let mut spec = SurfaceSpec::clamped(4, 3, 2, 1).unwrap();
        spec.closed_u = true;
        let free = ControlNet::from_fn(12, 1, |r, _| (r * r) as f64);
        assert_eq!(expand_closed_u(&spec, &free).unwrap(), free);
    }

    #[test]
    fn excessive_wrap_is_rejected() {
        let mut spec = SurfaceSpec::clamped(6, 4, 3, 1).unwrap();
        spec.closed_u = true;
        spec.wrap_count = 3;
        assert!(spec.validate().is_err());
        let free = ControlNet::zeros(spec.unknowns(), 1);
        assert!(matches!(expand_closed_u(&spec, &free), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unequal_degrees_rejected() {
        let r = SurfaceSpec::new(
            make_clamped_knots(4, 3).unwrap(),
            make_clamped_knots(4, 2).unwrap(),
            1,
        );
        assert!(r.is_err());
    }
}
