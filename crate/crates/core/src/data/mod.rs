//! Synthetic benchmark datasets and cross-validation error.
//!
//! Generators draw from ChaCha8 seeded with the user seed. Independent
//! quantities come from separate streams of the same seed: stream 0 for
//! parameters (or the perturbation subset), stream 1 for noise (or radial
//! factors), stream 2 for outliers, stream 3 for subsampling.

mod io;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

pub use io::{
    read_flags_csv, read_scattered_csv, read_structured_csv, write_flags_csv, write_scattered_csv,
    write_structured_csv, read_scattered, read_structured, write_scattered, write_structured,
};

use crate::bspline::{eval_surface_into, ControlNet, ScatteredData, StructuredData, SurfaceSpec};
use crate::error::{Error, Result};

pub const STREAM_PARAMS: u64 = 0;
pub const STREAM_NOISE: u64 = 1;
pub const STREAM_OUTLIERS: u64 = 2;
pub const STREAM_SUBSAMPLE: u64 = 3;

/// Generator for stream `stream` of `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Franke's test function: two peaks, a ridge and a dip on the unit square.
pub fn franke(x: f64, y: f64) -> f64 {
    let (a, b) = (9.0 * x, 9.0 * y);
    0.75 * (-((a - 2.0).powi(2) + (b - 2.0).powi(2)) / 4.0).exp()
        + 0.75 * (-((a + 1.0).powi(2) / 49.0 + (b + 1.0) / 10.0)).exp()
        + 0.5 * (-((a - 7.0).powi(2) + (b - 3.0).powi(2)) / 4.0).exp()
        - 0.2 * (-((a - 4.0).powi(2) + (b - 7.0).powi(2))).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_clean: usize,
    /// Standard deviation of the additive Gaussian noise on clean samples.
    pub noise_sigma: f64,
    pub n_outliers: usize,
    /// Side of the cross-validation grid.
    pub grid_cv: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            n_clean: 1000,
            noise_sigma: 1e-3,
            n_outliers: 150,
            grid_cv: 101,
        }
    }
}

/// Noisy Franke samples followed by outliers drawn uniformly from the unit
/// cube. The flags mark the outliers.
pub fn generate_franke_dataset(cfg: &SyntheticConfig) -> Result<(ScatteredData, Vec<bool>)> {
    if !(cfg.noise_sigma >= 0.0) || !cfg.noise_sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("noise sigma {} must be finite and >= 0", cfg.noise_sigma)));
    }
    let m = cfg.n_clean + cfg.n_outliers;
    let (mut u, mut v, mut q) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    let mut params = rng_stream(cfg.seed, STREAM_PARAMS);
    let mut noise = rng_stream(cfg.seed, STREAM_NOISE);
    let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    for _ in 0..cfg.n_clean {
        let (x, y) = (params.random::<f64>(), params.random::<f64>());
        u.push(x);
        v.push(y);
        q.push(franke(x, y) + normal.sample(&mut noise));
    }
    let mut out = rng_stream(cfg.seed, STREAM_OUTLIERS);
    for _ in 0..cfg.n_outliers {
        u.push(out.random::<f64>());
        v.push(out.random::<f64>());
        q.push(out.random::<f64>());
    }
    let mut flags = vec![false; cfg.n_clean];
    flags.resize(m, true);
    Ok((ScatteredData::new(u, v, q, 1)?, flags))
}

pub const SPHERE_ROWS: usize = 15;
pub const SPHERE_COLS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereConfig {
    pub seed: u64,
    /// Fraction of the grid entries to push off the sphere.
    pub perturb_fraction: f64,
    pub max_radial_factor: f64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            seed: 7,
            perturb_fraction: 0.5,
            max_radial_factor: 4.0,
        }
    }
}

/// A sampled unit sphere with some points scaled radially.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereData {
    pub data: StructuredData,
    /// Radial factor of every grid entry; 1 for untouched points.
    pub factors: Vec<f64>,
}

impl SphereData {
    pub fn perturbed(&self) -> Vec<bool> {
        self.factors.iter().map(|&f| f != 1.0).collect()
    }
}

/// `15 x 12` grid on the unit sphere, `s = 3`.
///
/// Index `k` (along `u`, 15 values mapped onto `[0.25, 0.75]`) runs once
/// around a circle of latitude and closes on itself (`k = 14` repeats
/// `k = 0`). Index `l` (along `v`, 12 values in `[0, 1]`) runs pole to pole,
/// so `l = 0` and `l = 11` collapse to single points. The parameter range in
/// `u` is the validity interval of [`SurfaceSpec::closed_u`]`(6, 5, 3, 3)`.
///
/// Entries are perturbed by scaling with a factor uniform in
/// `[1, max_radial_factor]`. Distinct non-polar points are taken in random
/// order until `round(fraction * 180)` grid entries are moved; the seam
/// duplicate moves with its original, poles never move.
pub fn generate_sphere_dataset(cfg: &SphereConfig) -> Result<SphereData> {
    if !(0.0..=1.0).contains(&cfg.perturb_fraction) {
        return Err(Error::InvalidConfig(format!("perturb fraction {} outside [0, 1]", cfg.perturb_fraction)));
    }
    if !(cfg.max_radial_factor >= 1.0) || !cfg.max_radial_factor.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "max radial factor {} must be finite and >= 1",
            cfg.max_radial_factor
        )));
    }
    let (m1, m2) = (SPHERE_ROWS, SPHERE_COLS);
    let u: Vec<f64> = (0..m1).map(|k| 0.25 + 0.5 * k as f64 / (m1 - 1) as f64).collect();
    let v: Vec<f64> = (0..m2).map(|l| l as f64 / (m2 - 1) as f64).collect();
    let mut q = vec![0.0; m1 * m2 * 3];
    for l in 0..m2 {
        let lat = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * l as f64 / (m2 - 1) as f64;
        for k in 0..m1 {
            let p = if l == 0 {
                [0.0, 0.0, -1.0]
            } else if l == m2 - 1 {
                [0.0, 0.0, 1.0]
            } else {
                let lon = std::f64::consts::TAU * (k % (m1 - 1)) as f64 / (m1 - 1) as f64;
                [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
            };
            q[(k + l * m1) * 3..(k + l * m1) * 3 + 3].copy_from_slice(&p);
        }
    }

    let mut factors = vec![1.0; m1 * m2];
    let target = (cfg.perturb_fraction * (m1 * m2) as f64).round() as usize;
    let mut candidates: Vec<(usize, usize)> = (1..m2 - 1).flat_map(|l| (0..m1 - 1).map(move |k| (k, l))).collect();
    candidates.shuffle(&mut rng_stream(cfg.seed, STREAM_PARAMS));
    let mut radial = rng_stream(cfg.seed, STREAM_NOISE);
    let dist = Uniform::new_inclusive(1.0, cfg.max_radial_factor).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut moved = 0;
    for (k, l) in candidates {
        if moved >= target {
            break;
        }
        let f = dist.sample(&mut radial);
        let mut entries = vec![k + l * m1];
        if k == 0 {
            entries.push(m1 - 1 + l * m1);
        }
        for idx in entries {
            factors[idx] = f;
            q[idx * 3..idx * 3 + 3].iter_mut().for_each(|x| *x *= f);
            moved += 1;
        }
    }
    Ok(SphereData {
        data: StructuredData::new(u, v, q, 3)?,
        factors,
    })
}

/// What a fitted surface is compared against.
pub enum Reference<'a> {
    /// A function returning the `s` reference coordinates at `(u, v)`.
    Function(&'a dyn Fn(f64, f64) -> Vec<f64>),
    /// Another spline surface.
    Spline(&'a SurfaceSpec, &'a ControlNet),
}

/// `n` distinct points of `data` drawn from the seed's subsampling stream,
/// kept in their original order. Returns a copy when `n >= data.len()`.
pub fn subsample(data: &ScatteredData, n: usize, seed: u64) -> ScatteredData {
    if n >= data.len() {
        return data.clone();
    }
    let mut idx = rand::seq::index::sample(&mut rng_stream(seed, STREAM_SUBSAMPLE), data.len(), n).into_vec();
    idx.sort_unstable();
    data.select(&idx)
}

/// Mean of `||S(u, v) - ref(u, v)||^2` over a `g x g` uniform grid covering
/// the validity rectangle of `spec`.
pub fn cv_mse(spec: &SurfaceSpec, net: &ControlNet, reference: &Reference<'_>, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::InvalidConfig(format!("cross-validation grid {grid} needs at least 2 points per side")));
    }
    let ((u0, u1), (v0, v1)) = spec.domain();
    let at = |lo: f64, hi: f64, i: usize| if i == grid - 1 { hi } else { lo + (hi - lo) * i as f64 / (grid - 1) as f64 };
    let mut s = vec![0.0; spec.dim];
    let mut t = vec![0.0; spec.dim];
    let mut total = 0.0;
    for j in 0..grid {
        let v = at(v0, v1, j);
        for i in 0..grid {
            let u = at(u0, u1, i);
            eval_surface_into(spec, net, u, v, &mut s)?;
            match reference {
                Reference::Function(f) => {
                    let r = f(u, v);
                    if r.len() != spec.dim {
                        return Err(Error::InvalidInput(format!(
                            "reference has {} components, surface has {}",
                            r.len(),
                            spec.dim
                        )));
                    }
                    t.copy_from_slice(&r);
                }
                Reference::Spline(rs, rn) => eval_surface_into(rs, rn, u, v, &mut t)?,
            }
            total += s.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    Ok(total / (grid * grid) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn franke_special_values() {
        let direct = 0.75 * (-(4.0 + 4.0) / 4.0f64).exp()
            + 0.75 * (-(1.0 / 49.0 + 0.1f64)).exp()
            + 0.5 * (-(49.0 + 9.0) / 4.0f64).exp()
            - 0.2 * (-(16.0 + 49.0f64)).exp();
        assert!((franke(0.0, 0.0) - direct).abs() < 1e-16);
        assert!((franke(0.0, 0.0) - 0.766_420_591_284_923_1).abs() < 1e-15);
        let x = 4.0 / 9.0;
        let y = 7.0 / 9.0;
        let fourth = -0.2 * (-((9.0 * x - 4.0f64).powi(2) + (9.0 * y - 7.0f64).powi(2))).exp();
        assert!((fourth + 0.2).abs() < 1e-14);
    }

    #[test]
    fn franke_counts_and_determinism() {
        let cfg = SyntheticConfig::default();
        let (a, fa) = generate_franke_dataset(&cfg).unwrap();
        let (b, fb) = generate_franke_dataset(&cfg).unwrap();
        assert_eq!(a.len(), 1150);
        assert_eq!(fa.iter().filter(|&&f| f).count(), 150);
        assert_eq!(a, b);
        assert_eq!(fa, fb);
        let (c, _) = generate_franke_dataset(&SyntheticConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_franke_lies_on_surface() {
        let cfg = SyntheticConfig {
            n_outliers: 0,
            noise_sigma: 0.0,
            n_clean: 50,
            ..Default::default()
        };
        let (d, _) = generate_franke_dataset(&cfg).unwrap();
        for k in 0..d.len() {
            assert_eq!(d.q[k], franke(d.u[k], d.v[k]));
        }
    }

    #[test]
    fn subsample_is_seeded_and_ordered() {
        let (d, _) = generate_franke_dataset(&SyntheticConfig::default()).unwrap();
        let a = subsample(&d, 50, 3);
        assert_eq!(a, subsample(&d, 50, 3));
        assert_ne!(a, subsample(&d, 50, 4));
        assert_eq!(a.len(), 50);
        assert!(a.u.iter().all(|u| d.u.contains(u)));
        assert_eq!(subsample(&d, 5000, 3), d);
    }

    #[test]
    fn noise_stream_is_independent_of_outliers() {
        let a = generate_franke_dataset(&SyntheticConfig::default()).unwrap().0;
        let b = generate_franke_dataset(&SyntheticConfig {
            n_outliers: 3,
            ..Default::default()
        })
        .unwrap()
        .0;
        assert_eq!(&a.q[..1000], &b.q[..1000]);
    }

    #[test]
    fn sphere_geometry() {
        let s = generate_sphere_dataset(&SphereConfig {
            perturb_fraction: 0.0,
            ..Default::default()
        })
        .unwrap();
        let d = &s.data;
        assert_eq!((d.m1(), d.m2(), d.dim), (15, 12, 3));
        for p in d.q.chunks(3) {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        for l in [0, 11] {
            for k in 0..15 {
                assert_eq!(&d.q[(k + l * 15) * 3..(k + l * 15) * 3 + 3], &d.q[l * 45..l * 45 + 3]);
            }
        }
        for l in 0..12 {
            assert_eq!(&d.q[l * 45..l * 45 + 3], &d.q[(14 + l * 15) * 3..(14 + l * 15) * 3 + 3]);
        }
    }

    #[test]
    fn sphere_perturbation_count() {
        let s = generate_sphere_dataset(&SphereConfig::default()).unwrap();
        let n = s.perturbed().iter().filter(|&&p| p).count();
        assert!((90..=91).contains(&n), "{n}");
        assert!(s.factors.iter().all(|&f| (1.0..=4.0).contains(&f)));
        for l in 0..12 {
            assert_eq!(s.factors[l * 15], s.factors[14 + l * 15]);
        }
        assert!(s.factors[..15].iter().chain(&s.factors[165..]).all(|&f| f == 1.0));
    }

    #[test]
    fn cv_against_itself_is_zero() {
        let spec = SurfaceSpec::clamped(4, 5, 2, 1).unwrap();
        let net = ControlNet::from_fn(20, 1, |r, _| (r as f64).sqrt());
        assert_eq!(cv_mse(&spec, &net, &Reference::Spline(&spec, &net), 11).unwrap(), 0.0);
        let zero = |_: f64, _: f64| vec![0.0];
        let c = ControlNet::from_fn(20, 1, |_, _| 0.5);
        assert!((cv_mse(&spec, &c, &Reference::Function(&zero), 7).unwrap() - 0.25).abs() < 1e-15);
        assert!(cv_mse(&spec, &c, &Reference::Function(&zero), 1).is_err());
    }
}
