use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::ShapeSpec;
use crate::point::Point;

/// Class threshold: interior above `1 - DELTA_CLS`, exterior below it.
pub const DELTA_CLS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Exterior,
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityClass {
    pub alpha: f64,
    /// `|α(r_last) - α(r_prev)|`, zero for a single radius.
    pub error: f64,
    pub class: DensityKind,
    /// `(r, |E ∩ B(y,r)| / |B(y,r)|)` per radius.
    pub ratios: Vec<(f64, f64)>,
}

fn samples_per_diameter(dim: usize) -> usize {
    match dim {
        1 => 512,
        2 => 96,
        _ => 40,
    }
}

/// `|E ∩ B(y,r)| / |B(y,r)|` by midpoint sampling of the ball.
pub fn density_ratio(shape: &ShapeSpec, y: &Point, r: f64, dim: usize) -> f64 {
    let n = samples_per_diameter(dim);
    let step = 2.0 / n as f64;
    let total = n.pow(dim as u32);
    let (mut in_ball, mut in_set) = (0usize, 0usize);
    let mut p = *y;
    for k in 0..total {
        let mut rem = k;
        let mut r2 = 0.0;
        for a in 0..dim {
            let s = -1.0 + ((rem % n) as f64 + 0.5) * step;
            rem /= n;
            r2 += s * s;
            p[a] = y[a] + r * s;
        }
        if r2 <= 1.0 {
            in_ball += 1;
            if shape.contains(&p, dim) {
                in_set += 1;
            }
        }
    }
    in_set as f64 / in_ball as f64
}

pub fn classify_density(shape: &ShapeSpec, y: &Point, radii: &[f64], dim: usize) -> Result<DensityClass> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("density radii must be positive and strictly decreasing"));
    }
    let ratios: Vec<(f64, f64)> = radii.iter().map(|&r| (r, density_ratio(shape, y, r, dim))).collect();
    let alpha = ratios[ratios.len() - 1].1;
    let error = if ratios.len() > 1 {
        (alpha - ratios[ratios.len() - 2].1).abs()
    } else {
        0.0
    };
    let class = if alpha > 1.0 - DELTA_CLS {
        DensityKind::Interior
    } else if alpha < DELTA_CLS {
        DensityKind::Exterior
    } else {
        DensityKind::Boundary
    };
    Ok(DensityClass {
        alpha,
        error,
        class,
        ratios,
    })
}
