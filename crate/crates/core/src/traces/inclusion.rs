//! One-sided inclusion of super-level sets under an exterior fatness
//! condition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::density_ratio;
use crate::grid::{mollify, rasterize, Bounds, GridSpec, MollifierKernel, ShapeSpec};
use crate::point::{axpy, dist, to_vec, Point};

use super::TraceSchedule;

/// Boundary points sampled for the fatness test.
const BOUNDARY_SAMPLES: usize = 32;
/// Radii `r0, r0/2, ...` probed at each boundary point.
const RADII: usize = 4;
/// Candidate levels above the threshold `1 - c0/2^N`.
const CANDIDATES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FatnessConfig {
    pub c0: f64,
    pub r0: f64,
}

impl FatnessConfig {
    pub fn new(c0: f64, r0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0 < 1.0 && r0 > 0.0) {
            return Err(Error::invalid(format!("fatness needs 0 < c0 < 1 and r0 > 0, got c0={c0}, r0={r0}")));
        }
        Ok(FatnessConfig { c0, r0 })
    }

    /// `c0 / 2^N`.
    pub fn c_tilde(&self, dim: usize) -> f64 {
        self.c0 / (1u32 << dim) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionReport {
    pub c0: f64,
    pub c_tilde: f64,
    /// Smallest `|E⁰ ∩ B(y,r)| / |B(y,r)|` seen over boundary points and radii.
    pub min_exterior_density: f64,
    pub threshold: f64,
    /// Smallest tested level from which every higher tested level passed
    /// at both finest ε.
    pub smallest_passing_t: f64,
    /// `(ε, t, {u > t} ⊆ E cellwise)` for every tested pair.
    pub checks: Vec<(f64, f64, bool)>,
}

/// Unit disk with a thin wedge removed: apex at `(0.2, 0)`, half-angle
/// 0.05, opening towards `+y₁`. The apex is an inward cusp of `E` where
/// the exterior density tends to `0.05/π`.
pub fn cusp_shape() -> ShapeSpec {
    let a = 0.05f64;
    let apex = [0.2, 0.0];
    let up = [-a.sin(), a.cos()];
    let down = [-a.sin(), -a.cos()];
    let off = |n: &[f64; 2]| n[0] * apex[0] + n[1] * apex[1];
    let wedge = ShapeSpec::intersection(vec![
        ShapeSpec::half_space(&up, off(&up)),
        ShapeSpec::half_space(&down, off(&down)),
    ]);
    ShapeSpec::intersection(vec![ShapeSpec::ball(&[0.0, 0.0], 1.0), ShapeSpec::complement(wedge)])
}

fn directions(dim: usize) -> Vec<Point> {
    let n = BOUNDARY_SAMPLES;
    match dim {
        1 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        2 => (0..n)
            .map(|j| {
                let th = std::f64::consts::TAU * j as f64 / n as f64;
                [th.cos(), th.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci sphere.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * j as f64;
                    [r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    }
}

/// Topological boundary points of `shape` along rays from the centre of its
/// bounding box: the first membership change by marching, refined by
/// bisection.
fn boundary_points(shape: &ShapeSpec, dim: usize) -> Result<Vec<Point>> {
    let Bounds::Bounded(lo, hi) = shape.bounds(dim) else {
        return Err(Error::invalid("fatness test needs a bounded, non-empty shape"));
    };
    let mut c = [0.0; 3];
    for a in 0..dim {
        c[a] = 0.5 * (lo[a] + hi[a]);
    }
    let reach = dist(&lo, &hi) + 1e-9;
    let steps = 4096;
    let mut out = Vec::new();
    for d in directions(dim) {
        let mut prev = c;
        for s in 1..=steps {
            let p = axpy(&c, reach * s as f64 / steps as f64, &d);
            if let Some(q) = shape.boundary_crossing(&prev, &p, dim, 1e-12) {
                out.push(q);
                break;
            }
            prev = p;
        }
    }
    Ok(out)
}

/// Checks the exterior fatness condition on sampled boundary points, then
/// the cellwise inclusion `{u_k > t} ⊆ E` (plateau kernel) for levels above
/// `1 - c0/2^N` at the two finest ε.
pub fn one_sided_inclusion(
    shape: &ShapeSpec,
    fatness: &FatnessConfig,
    grid: &GridSpec,
    schedule: &TraceSchedule,
) -> Result<InclusionReport> {
    let dim = grid.dim();
    if dim < 2 {
        return Err(Error::invalid("one-sided inclusion is defined for dim >= 2"));
    }
    schedule.validate(grid)?;
    let mut min_density = f64::INFINITY;
    for y in boundary_points(shape, dim)? {
        for j in 0..RADII {
            let r = fatness.r0 / (1u32 << j) as f64;
            let density = 1.0 - density_ratio(shape, &y, r, dim);
            min_density = min_density.min(density);
            if density < fatness.c0 {
                return Err(Error::FatnessViolated {
                    point: to_vec(&y, dim),
                    radius: r,
                    density,
                    c0: fatness.c0,
                });
            }
        }
    }

    let ct = fatness.c_tilde(dim);
    let threshold = 1.0 - ct;
    let levels: Vec<f64> = (0..CANDIDATES)
        .map(|j| threshold + ct * j as f64 / CANDIDATES as f64 + 1e-9)
        .collect();
    let chi = rasterize(shape, grid)?;
    let inside = chi.above(0.5);
    let mut ok = vec![true; levels.len()];
    let mut checks = Vec::new();
    let n = schedule.eps_list.len();
    for &eps in &schedule.eps_list[n.saturating_sub(2)..] {
        let u = mollify(&chi, &MollifierKernel::plateau(eps)?)?;
        for (j, &t) in levels.iter().enumerate() {
            let pass = u.above(t).is_subset_of(&inside);
            ok[j] &= pass;
            checks.push((eps, t, pass));
        }
    }
    let mut first = None;
    for j in (0..levels.len()).rev() {
        if !ok[j] {
            break;
        }
        first = Some(levels[j]);
    }
    let Some(smallest_passing_t) = first else {
        return Err(Error::InclusionFailed { threshold });
    };
    Ok(InclusionReport {
        c0: fatness.c0,
        c_tilde: ct,
        min_exterior_density: min_density,
        threshold,
        smallest_passing_t,
        checks,
    })
}
