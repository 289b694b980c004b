//! Marching-squares isolines of a scalar field sampled on a pixel grid.
//!
//! A sample is inside when its value is below the level. Every chord is
//! oriented so the inside lies on the same side, and chords are chained
//! through shared cell edges into closed loops or boundary-to-boundary
//! polylines.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    /// Vertices in pixel coordinates `(x, y)`; a closed polyline does not
    /// repeat its first vertex.
    pub points: Vec<(f64, f64)>,
    pub closed: bool,
}

impl Polyline {
    /// Shoelace signed area; meaningful for closed polylines.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.points[i], self.points[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum::<f64>()
            / 2.0
    }
}

/// Horizontal edge `(x, y)-(x+1, y)` or vertical edge `(x, y)-(x, y+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge {
    H(usize, usize),
    V(usize, usize),
}

/// Isolines of `field` (row-major, `width x height`) at `level`.
///
/// Returns nothing when the level does not lie strictly between the field's
/// extremes.
pub fn roi_contours(field: &[f64], width: usize, height: usize, level: f64) -> Result<Vec<Polyline>> {
    if field.len() != width * height {
        return Err(Error::InvalidInput(format!("{} samples for a {width}x{height} field", field.len())));
    }
    if field.iter().any(|x| !x.is_finite()) || !level.is_finite() {
        return Err(Error::InvalidInput("field and level must be finite".into()));
    }
    let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if width < 2 || height < 2 || !(lo < level && level < hi) {
        return Ok(vec![]);
    }
    let f = |x: usize, y: usize| field[y * width + x];
    let inside = |x: usize, y: usize| f(x, y) < level;

    let point = |e: Edge| -> (f64, f64) {
        let ((x0, y0), (x1, y1)) = match e {
            Edge::H(x, y) => ((x, y), (x + 1, y)),
            Edge::V(x, y) => ((x, y), (x, y + 1)),
        };
        let (a, b) = (f(x0, y0), f(x1, y1));
        let t = (level - a) / (b - a);
        (x0 as f64 + t * (x1 as f64 - x0 as f64), y0 as f64 + t * (y1 as f64 - y0 as f64))
    };

    // chord start edge -> end edge
    let mut next: BTreeMap<Edge, Edge> = BTreeMap::new();
    for y in 0..height - 1 {
        for x in 0..width - 1 {
            // corners in cyclic order TL, TR, BR, BL; edge k joins corner k and k+1
            let corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let edges = [Edge::H(x, y), Edge::V(x + 1, y), Edge::H(x, y + 1), Edge::V(x, y)];
            let ins: Vec<bool> = corners.iter().map(|&(a, b)| inside(a, b)).collect();
            let exits: Vec<usize> = (0..4).filter(|&k| ins[k] && !ins[(k + 1) % 4]).collect();
            match exits.len() {
                0 => {}
                1 => {
                    let e = exits[0];
                    let enter = (0..4).find(|&k| !ins[k] && ins[(k + 1) % 4]).expect("one entry per exit");
                    next.insert(edges[e], edges[enter]);
                }
                _ => {
                    let centre = corners.iter().map(|&(a, b)| f(a, b)).sum::<f64>() / 4.0;
                    let step = if centre < level { 1 } else { 3 };
                    for e in exits {
                        next.insert(edges[e], edges[(e + step) % 4]);
                    }
                }
            }
        }
    }

    let ends: BTreeSet<Edge> = next.values().copied().collect();
    let mut visited: BTreeSet<Edge> = BTreeSet::new();
    let mut lines = vec![];
    let starts: Vec<Edge> = next.keys().filter(|e| !ends.contains(e)).copied().collect();
    for s in starts {
        let mut pts = vec![point(s)];
        let mut cur = s;
        visited.insert(cur);
        while let Some(&n) = next.get(&cur) {
            pts.push(point(n));
            cur = n;
            if !visited.insert(cur) {
                break;
            }
        }
        lines.push(Polyline {
            points: pts,
            closed: false,
        });
    }
    let keys: Vec<Edge> = next.keys().copied().collect();
    for s in keys {
        if visited.contains(&s) {
            continue;
        }
        let mut pts = vec![];
        let mut cur = s;
        while visited.insert(cur) {
            pts.push(point(cur));
            cur = next[&cur];
        }
        lines.push(Polyline { points: pts, closed: true });
    }
    Ok(lines)
}
