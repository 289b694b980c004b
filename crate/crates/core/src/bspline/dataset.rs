use serde::{Deserialize, Serialize};

use super::surface::SurfaceSpec;
use crate::error::{Error, Result};

/// Scattered observations `(u_k, v_k, Q_k)`, `Q_k` in `R^s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteredData {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `m x s`, row-major.
    pub q: Vec<f64>,
    pub dim: usize,
}

/// Observations on the grid `u (m1) x v (m2)`. Point `(k, l)` is stored at
/// index `k + l * m1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredData {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// `(m1 m2) x s`, row-major.
    pub q: Vec<f64>,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Dataset {
    Scattered(ScatteredData),
    Structured(StructuredData),
}

impl ScatteredData {
    pub fn new(u: Vec<f64>, v: Vec<f64>, q: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || u.len() != v.len() || q.len() != u.len() * dim {
            return Err(Error::InvalidInput(format!(
                "scattered data shapes disagree: {} u, {} v, {} values of width {dim}",
                u.len(),
                v.len(),
                q.len()
            )));
        }
        Ok(ScatteredData { u, v, q, dim })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Keeps only the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ScatteredData {
        let dim = self.dim;
        ScatteredData {
            u: indices.iter().map(|&i| self.u[i]).collect(),
            v: indices.iter().map(|&i| self.v[i]).collect(),
            q: indices
                .iter()
                .flat_map(|&i| self.q[i * dim..(i + 1) * dim].iter().copied())
                .collect(),
            dim,
        }
    }
}

impl StructuredData {
    pub fn new(u: Vec<f64>, v: Vec<f64>, q: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || q.len() != u.len() * v.len() * dim {
            return Err(Error::InvalidInput(format!(
                "structured data shapes disagree: {}x{} grid, {} values of width {dim}",
                u.len(),
                v.len(),
                q.len()
            )));
        }
        Ok(StructuredData { u, v, q, dim })
    }

    pub fn m1(&self) -> usize {
        self.u.len()
    }

    pub fn m2(&self) -> usize {
        self.v.len()
    }

    pub fn len(&self) -> usize {
        self.u.len() * self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The same observations as an explicit list of `(u_k, v_l)` pairs, in
    /// storage order.
    pub fn expand(&self) -> ScatteredData {
        let m1 = self.m1();
        let (mut u, mut v) = (Vec::with_capacity(self.len()), Vec::with_capacity(self.len()));
        for idx in 0..self.len() {
            u.push(self.u[idx % m1]);
            v.push(self.v[idx / m1]);
        }
        ScatteredData {
            u,
            v,
            q: self.q.clone(),
            dim: self.dim,
        }
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Scattered(d) => d.len(),
            Dataset::Structured(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            Dataset::Scattered(d) => d.dim,
            Dataset::Structured(d) => d.dim,
        }
    }

    /// `m x s` observation matrix, row-major.
    pub fn observations(&self) -> &[f64] {
        match self {
            Dataset::Scattered(d) => &d.q,
            Dataset::Structured(d) => &d.q,
        }
    }

    /// Parameters of point `k` in storage order.
    pub fn param(&self, k: usize) -> (f64, f64) {
        match self {
            Dataset::Scattered(d) => (d.u[k], d.v[k]),
            Dataset::Structured(d) => (d.u[k % d.m1()], d.v[k / d.m1()]),
        }
    }

    /// Checks that the data fit `spec`: matching width and all parameters
    /// inside the validity rectangle.
    pub fn check_against(&self, spec: &SurfaceSpec) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidInput("empty dataset".into()));
        }
        if self.dim() != spec.dim {
            return Err(Error::InvalidInput(format!(
                "observations have width {}, surface has dimension {}",
                self.dim(),
                spec.dim
            )));
        }
        let ((u0, u1), (v0, v1)) = spec.domain();
        let (us, vs): (&[f64], &[f64]) = match self {
            Dataset::Scattered(d) => (&d.u, &d.v),
            Dataset::Structured(d) => (&d.u, &d.v),
        };
        if let Some(&u) = us.iter().find(|&&u| !(u >= u0 && u <= u1)) {
            return Err(Error::Domain { value: u, lo: u0, hi: u1 });
        }
        if let Some(&v) = vs.iter().find(|&&v| !(v >= v0 && v <= v1)) {
            return Err(Error::Domain { value: v, lo: v0, hi: v1 });
        }
        Ok(())
    }
}
