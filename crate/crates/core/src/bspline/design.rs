use nalgebra::DMatrix;
use rayon::prelude::*;

use super::dataset::{Dataset, ScatteredData, StructuredData};
use super::surface::{ControlNet, SurfaceSpec};
use crate::error::{Error, Result};

/// Rows assembled per parallel task.
const ROW_CHUNK: usize = 2048;

/// Sparse `m x N` collocation matrix of tensor basis functions, `N` being the
/// number of unknown control points. Columns follow the `i`-fastest order of
/// [`SurfaceSpec::column_of`]; each row stores at most `(d+1)^2` entries with
/// ascending column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, k: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[k], self.row_ptr[k + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    /// Largest `last column - first column` over all rows.
    pub fn bandwidth(&self) -> usize {
        (0..self.nrows())
            .map(|k| {
                let (c, _) = self.row(k);
                match (c.first(), c.last()) {
                    (Some(a), Some(b)) => b - a,
                    _ => 0,
                }
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for k in 0..self.nrows() {
            let (c, v) = self.row(k);
            for (&j, &x) in c.iter().zip(v) {
                m[(k, j)] += x;
            }
        }
        m
    }

    /// `B P`, an `m x s` row-major matrix.
    pub fn apply(&self, net: &ControlNet) -> Result<Vec<f64>> {
        if net.rows() != self.ncols {
            return Err(Error::InvalidInput(format!(
                "control net has {} rows, design matrix has {} columns",
                net.rows(),
                self.ncols
            )));
        }
        let s = net.dim();
        let mut out = vec![0.0; self.nrows() * s];
        out.par_chunks_mut(s).enumerate().for_each(|(k, o)| {
            let (c, v) = self.row(k);
            for (&j, &x) in c.iter().zip(v) {
                for (oo, &p) in o.iter_mut().zip(net.row(j)) {
                    *oo += x * p;
                }
            }
        });
        Ok(out)
    }

    fn from_rows(ncols: usize, rows: Vec<(Vec<usize>, Vec<f64>)>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(|r| r.0.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for (c, v) in rows {
            cols.extend(c);
            vals.extend(v);
            row_ptr.push(cols.len());
        }
        DesignMatrix {
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Writes the tensor-product row for basis blocks starting at `(iu, jv)`.
fn tensor_row(spec: &SurfaceSpec, iu: usize, bu: &[f64], jv: usize, bv: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(bu.len() * bv.len());
    for (b, &wv) in bv.iter().enumerate() {
        for (a, &wu) in bu.iter().enumerate() {
            entries.push((spec.column_of(iu + a, jv + b), wu * wv));
        }
    }
    if spec.wrap_count > 0 {
        entries.sort_by_key(|e| e.0);
        entries.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
    }
    entries.into_iter().unzip()
}

fn check_params(spec: &SurfaceSpec, us: &[f64], vs: &[f64]) -> Result<()> {
    let ((u0, u1), (v0, v1)) = spec.domain();
    if let Some(&u) = us.iter().find(|&&u| !(u >= u0 && u <= u1)) {
        return Err(Error::Domain { value: u, lo: u0, hi: u1 });
    }
    if let Some(&v) = vs.iter().find(|&&v| !(v >= v0 && v <= v1)) {
        return Err(Error::Domain { value: v, lo: v0, hi: v1 });
    }
    Ok(())
}

/// Design matrix of scattered data: row `k` holds `b_i(u_k) b_j(v_k)`.
pub fn design_matrix_scattered(spec: &SurfaceSpec, data: &ScatteredData) -> Result<DesignMatrix> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    check_params(spec, &data.u, &data.v)?;
    let d = spec.degree();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..data.len())
        .collect::<Vec<_>>()
        .par_chunks(ROW_CHUNK)
        .flat_map_iter(|chunk| {
            let mut bu = vec![0.0; d + 1];
            let mut bv = vec![0.0; d + 1];
            chunk
                .iter()
                .map(|&k| {
                    let iu = spec.knots_u.nonzero_basis(data.u[k], &mut bu).expect("checked domain");
                    let jv = spec.knots_v.nonzero_basis(data.v[k], &mut bv).expect("checked domain");
                    tensor_row(spec, iu, &bu, jv, &bv)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(DesignMatrix::from_rows(spec.unknowns(), rows))
}

/// Design matrix of gridded data. The univariate bases are evaluated once per
/// grid line and combined per point; row order is `k + l * m1`.
pub fn design_matrix_structured(spec: &SurfaceSpec, data: &StructuredData) -> Result<DesignMatrix> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    check_params(spec, &data.u, &data.v)?;
    let d = spec.degree();
    let line_basis = |kv: &super::KnotVector, ts: &[f64]| -> Vec<(usize, Vec<f64>)> {
        ts.iter()
            .map(|&t| {
                let mut b = vec![0.0; d + 1];
                let first = kv.nonzero_basis(t, &mut b).expect("checked domain");
                (first, b)
            })
            .collect()
    };
    let bu = line_basis(&spec.knots_u, &data.u);
    let bv = line_basis(&spec.knots_v, &data.v);
    let m1 = data.m1();
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..data.len())
        .into_par_iter()
        .with_min_len(ROW_CHUNK)
        .map(|idx| {
            let (iu, wu) = &bu[idx % m1];
            let (jv, wv) = &bv[idx / m1];
            tensor_row(spec, *iu, wu, *jv, wv)
        })
        .collect();
    Ok(DesignMatrix::from_rows(spec.unknowns(), rows))
}

pub fn design_matrix(spec: &SurfaceSpec, data: &Dataset) -> Result<DesignMatrix> {
    match data {
        Dataset::Scattered(d) => design_matrix_scattered(spec, d),
        Dataset::Structured(d) => design_matrix_structured(spec, d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_row_is_unit_vector() {
        let spec = SurfaceSpec::clamped(5, 4, 3, 1).unwrap();
        let data = ScatteredData::new(vec![1.0], vec![0.0], vec![0.0], 1).unwrap();
        let b = design_matrix_scattered(&spec, &data).unwrap().to_dense();
        for j in 0..20 {
            assert_eq!(b[(0, j)], if j == 4 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let spec = SurfaceSpec::clamped(4, 4, 3, 1).unwrap();
        let data = ScatteredData::new(vec![], vec![], vec![], 1).unwrap();
        assert!(matches!(design_matrix_scattered(&spec, &data), Err(Error::InvalidInput(_))));
        let grid = StructuredData::new(vec![], vec![0.5], vec![], 1).unwrap();
        assert!(matches!(design_matrix_structured(&spec, &grid), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_point_grid_matches_scattered() {
        let spec = SurfaceSpec::clamped(6, 5, 2, 1).unwrap();
        let grid = StructuredData::new(vec![0.37], vec![0.81], vec![1.0], 1).unwrap();
        let a = design_matrix_structured(&spec, &grid).unwrap();
        let b = design_matrix_scattered(&spec, &grid.expand()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn local_support_and_bandwidth() {
        let spec = SurfaceSpec::clamped(8, 7, 3, 1).unwrap();
        let g: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let grid = StructuredData::new(g.clone(), g, vec![0.0; 121], 1).unwrap();
        let b = design_matrix_structured(&spec, &grid).unwrap();
        for k in 0..b.nrows() {
            assert!(b.row(k).0.len() <= 16);
            assert!(b.row(k).0.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(b.bandwidth(), 3 * 8 + 3);
    }

    #[test]
    fn closed_rows_fold_wrapped_columns() {
        let spec = SurfaceSpec::closed_u(6, 5, 3, 1).unwrap();
        let data = ScatteredData::new(vec![0.74, 0.25], vec![0.3, 0.6], vec![0.0, 0.0], 1).unwrap();
        let b = design_matrix_scattered(&spec, &data).unwrap();
        assert_eq!(b.ncols(), 30);
        let dense = b.to_dense();
        for k in 0..2 {
            let s: f64 = dense.row(k).iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
