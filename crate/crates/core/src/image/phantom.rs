//! Seeded synthetic images with known defects.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImageGrid};
use crate::data::{rng_stream, STREAM_NOISE, STREAM_OUTLIERS, STREAM_PARAMS};
use crate::error::{Error, Result};

/// A slowly varying image with values in about `[0.25, 0.75]`.
pub fn smooth_image(width: usize, height: usize, channels: usize) -> Result<ImageGrid> {
    ImageGrid::from_fn(width, height, channels, |x, y, c| {
        let u = x as f64 / (width.max(2) - 1) as f64;
        let v = y as f64 / (height.max(2) - 1) as f64;
        0.5 + 0.15 * (2.1 * u + 0.3 + 0.4 * c as f64).sin() * (1.7 * v).cos() + 0.1 * (u - v)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrackPhantomConfig {
    pub seed: u64,
    pub size: usize,
    pub noise_sigma: f64,
    /// Fraction of pixels on cracks.
    pub crack_fraction: f64,
    /// Intensity removed from crack pixels.
    pub crack_depth: f64,
}

impl Default for CrackPhantomConfig {
    fn default() -> Self {
        CrackPhantomConfig {
            seed: 7,
            size: 200,
            noise_sigma: 0.02,
            crack_fraction: 0.015,
            crack_depth: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrackPhantom {
    /// Smooth image plus sensor noise, without cracks.
    pub truth: ImageGrid,
    pub corrupted: ImageGrid,
    pub cracks: BinaryImage,
}

/// Grayscale phantom: a smooth image with Gaussian noise, crossed by thin
/// random-walk cracks that darken the pixels they visit.
pub fn crack_phantom(cfg: &CrackPhantomConfig) -> Result<CrackPhantom> {
    let n = cfg.size;
    if n < 8 || !(0.0..0.5).contains(&cfg.crack_fraction) || !(cfg.noise_sigma >= 0.0) {
        return Err(Error::InvalidConfig("phantom needs size >= 8, crack fraction in [0, 0.5), sigma >= 0".into()));
    }
    let base = smooth_image(n, n, 1)?;
    let normal = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut noise = rng_stream(cfg.seed, STREAM_NOISE);
    let truth_vals: Vec<f64> = base
        .values()
        .iter()
        .map(|&b| (b + normal.sample(&mut noise)).clamp(0.0, 1.0))
        .collect();

    let target = (cfg.crack_fraction * (n * n) as f64).round() as usize;
    let mut cracks = vec![false; n * n];
    let mut count = 0;
    let mut walk = rng_stream(cfg.seed, STREAM_PARAMS);
    while count < target {
        let (mut x, mut y) = (walk.random::<f64>() * n as f64, walk.random::<f64>() * n as f64);
        let mut angle = walk.random::<f64>() * std::f64::consts::TAU;
        let len = walk.random_range(30..90);
        for _ in 0..len {
            if x < 0.0 || y < 0.0 || x >= n as f64 || y >= n as f64 || count >= target {
                break;
            }
            let i = y as usize * n + x as usize;
            if !cracks[i] {
                cracks[i] = true;
                count += 1;
            }
            angle += 0.6 * (walk.random::<f64>() - 0.5);
            x += angle.cos();
            y += angle.sin();
        }
    }
    let corrupted_vals: Vec<f64> = truth_vals
        .iter()
        .zip(&cracks)
        .map(|(&t, &c)| if c { (t - cfg.crack_depth).max(0.0) } else { t })
        .collect();
    Ok(CrackPhantom {
        truth: ImageGrid::new(n, n, 1, truth_vals)?,
        corrupted: ImageGrid::new(n, n, 1, corrupted_vals)?,
        cracks: BinaryImage::new(n, n, cracks)?,
    })
}

/// Sets a seeded `fraction` of the pixels to white in every channel.
pub fn salt_noise(img: &ImageGrid, fraction: f64, seed: u64) -> Result<(ImageGrid, BinaryImage)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!("salt fraction {fraction} outside [0, 1]")));
    }
    let m = img.pixel_count();
    let k = (fraction * m as f64).round() as usize;
    let picks = rand::seq::index::sample(&mut rng_stream(seed, STREAM_OUTLIERS), m, k);
    let mut salted = vec![false; m];
    for i in picks {
        salted[i] = true;
    }
    let s = img.channels();
    let vals: Vec<f64> = img
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| if salted[i / s] { 1.0 } else { x })
        .collect();
    Ok((
        ImageGrid::new(img.width(), img.height(), s, vals)?,
        BinaryImage::new(img.width(), img.height(), salted)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_crack_fraction_and_determinism() {
        let cfg = CrackPhantomConfig::default();
        let a = crack_phantom(&cfg).unwrap();
        assert_eq!(a.cracks.count(), 600);
        assert_eq!(a, crack_phantom(&cfg).unwrap());
        for i in 0..200 * 200 {
            let (t, c) = (a.truth.values()[i], a.corrupted.values()[i]);
            if a.cracks.bits()[i] {
                assert!(c < t);
            } else {
                assert_eq!(c, t);
            }
        }
    }

    #[test]
    fn salt_count() {
        let img = smooth_image(50, 40, 3).unwrap();
        let (s, mask) = salt_noise(&img, 0.01, 3).unwrap();
        assert_eq!(mask.count(), 20);
        assert!(s.pixel(0, 0).len() == 3);
        let (s0, m0) = salt_noise(&img, 0.0, 3).unwrap();
        assert_eq!((s0, m0.count()), (img, 0));
    }
}
