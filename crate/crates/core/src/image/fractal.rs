use serde::{Deserialize, Serialize};

use super::BinaryImage;
use crate::error::{Error, Result};

/// Smallest image side accepted by [`box_counting_dimension`].
pub const MIN_SIDE: usize = 32;
const MIN_SCALES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    /// Slope of `ln N(s)` against `ln(1/s)`.
    pub dimension: f64,
    /// Coefficient of determination of the linear fit.
    pub r_squared: f64,
    /// `(box size, occupied boxes)` per scale.
    pub scales: Vec<(usize, usize)>,
}

/// Box-counting dimension over dyadic box sizes `1, 2, 4, ...` up to half
/// the shorter image side. Boxes are anchored at the origin; partial boxes at
/// the far edges count like full ones.
pub fn box_counting_dimension(set: &BinaryImage) -> Result<BoxCount> {
    let side = set.width().min(set.height());
    if side < MIN_SIDE {
        return Err(Error::UndefinedDimension(format!("image side {side} is below {MIN_SIDE}")));
    }
    if set.count() == 0 {
        return Err(Error::UndefinedDimension("empty set".into()));
    }
    let mut scales = vec![];
    let mut s = 1;
    while s <= side / 2 {
        let (bw, bh) = (set.width().div_ceil(s), set.height().div_ceil(s));
        let mut occupied = vec![false; bw * bh];
        for y in 0..set.height() {
            for x in 0..set.width() {
                if set.get(x, y) {
                    occupied[(y / s) * bw + x / s] = true;
                }
            }
        }
        scales.push((s, occupied.iter().filter(|&&b| b).count()));
        s *= 2;
    }
    if scales.len() < MIN_SCALES {
        return Err(Error::UndefinedDimension(format!("only {} scales available", scales.len())));
    }
    let pts: Vec<(f64, f64)> = scales.iter().map(|&(s, n)| (-(s as f64).ln(), (n as f64).ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let dimension = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(BoxCount {
        dimension,
        r_squared,
        scales,
    })
}

/// Boundary of the region `field < level`: region pixels with at least one
/// of their 8 neighbours outside the region or outside the image.
pub fn mass_boundary(field: &[f64], width: usize, height: usize, level: f64) -> Result<BinaryImage> {
    if field.len() != width * height {
        return Err(Error::InvalidInput(format!("{} samples for a {width}x{height} field", field.len())));
    }
    let mass = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height && field[y as usize * width + x as usize] < level
    };
    Ok(BinaryImage::from_fn(width, height, |x, y| {
        let (x, y) = (x as i64, y as i64);
        mass(x, y) && (-1..=1).any(|dy| (-1..=1).any(|dx| !mass(x + dx, y + dy)))
    }))
}
