//! Images as structured datasets: fitting, outlier masks, restoration, weight
//! contours, and box-counting dimension.
//!
//! Pixel `(x, y)` (column, row) maps to the parameters
//! `(x / (width - 1), y / (height - 1))`, so pixel order coincides with the
//! `k + l m1` order of structured data.

mod contours;
mod fractal;
mod phantom;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use contours::{roi_contours, Polyline};
pub use fractal::{box_counting_dimension, mass_boundary, BoxCount};
pub use phantom::{crack_phantom, salt_noise, smooth_image, CrackPhantom, CrackPhantomConfig};

use crate::bspline::{eval_surface_into, ControlNet, Dataset, StructuredData, SurfaceSpec};
use crate::error::{Error, Result};
use crate::mewls::{continuation_fit, ContinuationSchedule, FitReport, MewlsState};

/// Row-major image with interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("{channels} channels; expected 1 or 3")));
        }
        if width == 0 || height == 0 || values.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "{} values for a {width}x{height} image with {channels} channels",
                values.len()
            )));
        }
        if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidInput(format!("pixel value {x} outside [0, 1]")));
        }
        Ok(ImageGrid {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    values.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.values[i..i + self.channels]
    }

    /// Mean over pixels of the squared channel-vector difference.
    pub fn mse(&self, other: &ImageGrid) -> Result<f64> {
        if (self.width, self.height, self.channels) != (other.width, other.height, other.channels) {
            return Err(Error::InvalidInput("images differ in shape".into()));
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(s / self.pixel_count() as f64)
    }

    /// Reads an 8-bit PNG; colour images become RGB, others grayscale.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = ::image::open(path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            let raw = img.to_rgb8().into_raw();
            Self::new(w, h, 3, raw.into_iter().map(|b| b as f64 / 255.0).collect())
        } else {
            let raw = img.to_luma8().into_raw();
            Self::new(w, h, 1, raw.into_iter().map(|b| b as f64 / 255.0).collect())
        }
    }

    /// Writes an 8-bit PNG, rounding to the nearest level.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.values.iter().map(|x| (x * 255.0).round() as u8).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let color = if self.channels == 3 {
            ::image::ExtendedColorType::Rgb8
        } else {
            ::image::ExtendedColorType::L8
        };
        ::image::save_buffer(path, &raw, w, h, color)?;
        Ok(())
    }
}

/// Pixels as a structured dataset with `s` = channel count.
pub fn image_to_dataset(img: &ImageGrid) -> Result<StructuredData> {
    if img.width < 2 || img.height < 2 {
        return Err(Error::InvalidInput(format!(
            "a {}x{} image spans a degenerate parameter domain",
            img.width, img.height
        )));
    }
    let u = (0..img.width).map(|x| x as f64 / (img.width - 1) as f64).collect();
    let v = (0..img.height).map(|y| y as f64 / (img.height - 1) as f64).collect();
    StructuredData::new(u, v, img.values.clone(), img.channels)
}

/// Inverse of [`image_to_dataset`]; values are clamped to `[0, 1]`.
pub fn dataset_to_image(data: &StructuredData) -> Result<ImageGrid> {
    ImageGrid::new(
        data.m1(),
        data.m2(),
        data.dim,
        data.q.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
    )
}

/// Clamped cubic-style spline grid over the image with all channels sharing
/// one weight per pixel, fitted by continuation up to reduction `r`.
pub fn fit_image(
    img: &ImageGrid,
    n1: usize,
    n2: usize,
    degree: usize,
    reduction: f64,
) -> Result<(SurfaceSpec, MewlsState, Vec<FitReport>)> {
    let spec = SurfaceSpec::clamped(n1, n2, degree, img.channels)?;
    let schedule = ContinuationSchedule::geometric(reduction)?;
    let (state, reports) = fit_image_with(img, &spec, &schedule)?;
    Ok((spec, state, reports))
}

pub fn fit_image_with(
    img: &ImageGrid,
    spec: &SurfaceSpec,
    schedule: &ContinuationSchedule,
) -> Result<(MewlsState, Vec<FitReport>)> {
    let data = Dataset::Structured(image_to_dataset(img)?);
    continuation_fit(spec, &data, schedule)
}

/// Binary image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

/// Pixels flagged for restoration.
pub type OutlierMask = BinaryImage;

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidInput(format!("{} bits for a {width}x{height} image", bits.len())));
        }
        Ok(BinaryImage { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        BinaryImage { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn density(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        ::image::save_buffer(path, &raw, self.width as u32, self.height as u32, ::image::ExtendedColorType::L8)?;
        Ok(())
    }

    /// Pixels at or above half intensity are set.
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = ::image::open(path)?.to_luma8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        Self::new(w, h, img.into_raw().into_iter().map(|b| b >= 128).collect())
    }
}

/// Default divisor of the maximum weight in [`outlier_mask`].
pub const DEFAULT_THRESHOLD_DIV: f64 = 10.0;

/// Flags pixels with `w < max(w) / threshold_div`.
pub fn outlier_mask(weights: &[f64], width: usize, height: usize, threshold_div: f64) -> Result<OutlierMask> {
    if !(threshold_div > 0.0) {
        return Err(Error::InvalidConfig(format!("threshold divisor {threshold_div} must be positive")));
    }
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    BinaryImage::new(width, height, weights.iter().map(|&w| w < wmax / threshold_div).collect())
}

/// The spline surface sampled at every pixel, clamped to `[0, 1]`.
pub fn render_model(spec: &SurfaceSpec, net: &ControlNet, width: usize, height: usize) -> Result<ImageGrid> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidInput("render needs at least 2x2 pixels".into()));
    }
    let s = spec.dim;
    let mut values = vec![0.0; width * height * s];
    for y in 0..height {
        let v = y as f64 / (height - 1) as f64;
        for x in 0..width {
            let u = x as f64 / (width - 1) as f64;
            let i = (y * width + x) * s;
            eval_surface_into(spec, net, u, v, &mut values[i..i + s])?;
        }
    }
    values.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    ImageGrid::new(width, height, s, values)
}

/// Replaces flagged pixels by the model value; others are copied untouched.
pub fn restore_image(img: &ImageGrid, mask: &OutlierMask, spec: &SurfaceSpec, net: &ControlNet) -> Result<ImageGrid> {
    if (mask.width, mask.height) != (img.width, img.height) {
        return Err(Error::InvalidInput("mask and image differ in shape".into()));
    }
    if spec.dim != img.channels {
        return Err(Error::InvalidInput("surface and image differ in channel count".into()));
    }
    let s = img.channels;
    let mut out = img.values.clone();
    let mut buf = vec![0.0; s];
    for y in 0..img.height {
        for x in 0..img.width {
            if !mask.get(x, y) {
                continue;
            }
            let (u, v) = (x as f64 / (img.width - 1) as f64, y as f64 / (img.height - 1) as f64);
            eval_surface_into(spec, net, u, v, &mut buf)?;
            let i = (y * img.width + x) * s;
            for (o, b) in out[i..i + s].iter_mut().zip(&buf) {
                *o = b.clamp(0.0, 1.0);
            }
        }
    }
    ImageGrid::new(img.width, img.height, s, out)
}
