use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::DMField;
use crate::geometry::{boundary_mesh, Facet, MidpointLocator, SurfaceMesh};
use crate::grid::{mollify, rasterize, GridSpec, MollifierKernel, ShapeSpec};
use crate::point::{axpy, cross, dot, lerp, normalize, sub, to_vec, Point};
use crate::traces::{trace_with, Side, TraceContext, TraceResult, TraceSchedule};

/// Largest angle between a facet normal and the interior normal of the
/// reference set.
pub const ORIENTATION_TOL_DEG: f64 = 5.0;

/// A piece of `∂*E` with the interior normal of `E`.
#[derive(Debug, Clone)]
pub struct OrientedSurface {
    pub mesh: SurfaceMesh,
    pub reference_set: ShapeSpec,
}

impl OrientedSurface {
    /// Checks every facet normal against the interior normal of
    /// `reference_set`, estimated from boundary crossings around the facet.
    /// At corners any normal of the cone between the adjacent faces passes.
    pub fn new(mesh: SurfaceMesh, reference_set: ShapeSpec, grid: &GridSpec) -> Result<Self> {
        let dim = grid.dim();
        if mesh.dim != dim {
            return Err(Error::invalid("surface and grid dimensions differ"));
        }
        let (lo, hi) = (grid.origin(), grid.upper());
        for fc in &mesh.facets {
            if fc.vertices.iter().any(|v| (0..dim).any(|a| v[a] < lo[a] || v[a] > hi[a])) {
                return Err(Error::Bounds(format!("surface facet at {:?} leaves the grid", to_vec(&fc.midpoint, dim))));
            }
        }
        let cos_tol = ORIENTATION_TOL_DEG.to_radians().cos();
        for fc in &mesh.facets {
            if !orientation_ok(&reference_set, fc, dim, grid.spacing(), cos_tol) {
                return Err(Error::invalid(format!(
                    "facet at {:?} is not oriented by the interior normal of its reference set",
                    to_vec(&fc.midpoint, dim)
                )));
            }
        }
        Ok(OrientedSurface { mesh, reference_set })
    }

    /// All of `∂*E`, meshed as the traces module does at the finest ε.
    pub fn boundary(shape: &ShapeSpec, grid: &GridSpec, schedule: &TraceSchedule) -> Result<Self> {
        Self::boundary_part(shape, grid, schedule, |_| true)
    }

    /// The facets of `∂*E` accepted by `keep`. For a complement the mesh
    /// of the bounded set is used with reversed normals.
    pub fn boundary_part(
        shape: &ShapeSpec,
        grid: &GridSpec,
        schedule: &TraceSchedule,
        keep: impl Fn(&Facet) -> bool,
    ) -> Result<Self> {
        let (inner, flip) = bounded_part(shape);
        let chi = rasterize(inner, grid)?;
        let eps = schedule.finest();
        let u = mollify(&chi, &MollifierKernel::new(schedule.kernel, eps)?)?;
        let mut mesh = boundary_mesh(inner, &u, eps)?;
        if flip {
            mesh = mesh.reversed();
        }
        Self::new(mesh.subset(keep), shape.clone(), grid)
    }

    /// `−S`: same facets, opposite normals, complementary reference set.
    pub fn reversed(&self) -> Self {
        let reference_set = match self.reference_set.complement_inner() {
            Some(inner) => inner.clone(),
            None => ShapeSpec::complement(self.reference_set.clone()),
        };
        OrientedSurface {
            mesh: self.mesh.reversed(),
            reference_set,
        }
    }

    pub fn area(&self) -> f64 {
        self.mesh.area()
    }
}

fn bounded_part(shape: &ShapeSpec) -> (&ShapeSpec, bool) {
    match shape.complement_inner() {
        Some(inner) => (inner, true),
        None => (shape, false),
    }
}

/// Whether `fc.normal` is an interior normal of `set` at the facet: its
/// foot on the boundary must separate inside from outside along `ν`, and
/// `ν` must be within the tolerance of the chord normal through boundary
/// points near the facet, or of the cone spanned by local normals at those
/// points (a facet cutting a corner).
fn orientation_ok(set: &ShapeSpec, fc: &Facet, dim: usize, h: f64, cos_tol: f64) -> bool {
    let reach = fc.area.powf(1.0 / (dim.max(2) - 1) as f64).max(h);
    let nu = fc.normal;
    let cross_at = |p: &Point, r: f64| -> Option<Point> {
        set.boundary_crossing(&axpy(p, -r, &nu), &axpy(p, r, &nu), dim, 1e-10 * reach)
    };
    let Some(foot) = cross_at(&fc.midpoint, reach) else { return false };
    let inside = set.contains(&axpy(&foot, 1e-6 * reach, &nu), dim);
    let outside = !set.contains(&axpy(&foot, -1e-6 * reach, &nu), dim);
    if !(inside && outside) {
        return false;
    }
    if dim == 1 {
        return true;
    }
    let pts: Vec<Point> = fc.vertices.iter().map(|v| lerp(&fc.midpoint, v, 0.5)).collect();
    let Some(chord) = chord_normal(&pts, &nu, dim, |p| cross_at(p, reach)) else { return false };
    if dot(&chord, &nu) >= cos_tol {
        return true;
    }
    // Local normals from small chords around each crossing.
    let delta = 0.05 * reach;
    let mut locals = Vec::new();
    for p in &pts {
        let Some(c) = cross_at(p, reach) else { return false };
        let around: Vec<Point> = fc.vertices.iter().map(|v| axpy(&c, delta / reach, &sub(v, &fc.midpoint))).collect();
        match chord_normal(&around, &nu, dim, |q| cross_at(q, delta)) {
            Some(n) => locals.push(n),
            None => return false,
        }
    }
    if locals.iter().any(|n| dot(n, &nu) >= cos_tol) {
        return true;
    }
    in_cone(&locals, &nu, cos_tol)
}

/// Normal of the boundary points found from `pts` along `ν`, oriented
/// like `ν`.
fn chord_normal(pts: &[Point], nu: &Point, dim: usize, cross_at: impl Fn(&Point) -> Option<Point>) -> Option<Point> {
    let c: Vec<Point> = pts.iter().map(&cross_at).collect::<Option<_>>()?;
    let n = if dim == 2 {
        let t = sub(&c[1], &c[0]);
        [-t[1], t[0], 0.0]
    } else {
        cross(&sub(&c[1], &c[0]), &sub(&c[2], &c[0]))
    };
    let n = normalize(&n, 1e-300)?;
    Some(if dot(&n, nu) < 0.0 { [-n[0], -n[1], -n[2]] } else { n })
}

/// `ν` within the angular tolerance of the cone spanned by `normals`.
fn in_cone(normals: &[Point], nu: &Point, cos_tol: f64) -> bool {
    let tol = cos_tol.acos();
    let angle = |a: &Point, b: &Point| dot(a, b).clamp(-1.0, 1.0).acos();
    if normals.len() == 2 {
        return angle(&normals[0], nu) + angle(nu, &normals[1]) <= angle(&normals[0], &normals[1]) + tol;
    }
    // Barycentric test on the sphere: ν must lie on the same side of each
    // great circle through two normals as the third.
    (0..3).all(|k| {
        let (a, b, c) = (&normals[k], &normals[(k + 1) % 3], &normals[(k + 2) % 3]);
        let Some(plane) = normalize(&cross(a, b), 1e-12) else { return true };
        let side = dot(&plane, c).signum();
        side * dot(&plane, nu) >= -tol.sin()
    })
}

/// Both normal traces of a field on the boundary of a bounded set, for
/// evaluating `𝔉(S) = −∫_S 𝓕_i·ν` on pieces of that boundary in either
/// orientation.
pub struct SurfaceTraces {
    pub context: TraceContext,
    pub interior: TraceResult,
    pub exterior: TraceResult,
    locator: MidpointLocator,
}

/// A surface's facets matched to the frozen boundary mesh.
#[derive(Debug, Clone, Serialize)]
pub struct Matched {
    pub owners: Vec<usize>,
    /// True when the surface is oriented by the complement.
    pub reversed: bool,
}

impl SurfaceTraces {
    pub fn new(f: &DMField, shape: &ShapeSpec, schedule: &TraceSchedule) -> Result<Self> {
        let (inner, _) = bounded_part(shape);
        let context = TraceContext::new(inner, f.grid(), schedule)?;
        let interior = trace_with(f, &context, Side::Interior)?;
        let exterior = trace_with(f, &context, Side::Exterior)?;
        let locator = MidpointLocator::new(&context.boundary, 2.0 * f.grid().spacing());
        Ok(SurfaceTraces {
            context,
            interior,
            exterior,
            locator,
        })
    }

    /// Nearest boundary facet for every facet of `s`, within two cells and
    /// with a consistent normal.
    pub fn matched(&self, s: &OrientedSurface) -> Result<Matched> {
        let (inner, reversed) = bounded_part(&s.reference_set);
        if inner != &self.context.shape {
            return Err(Error::invalid("surface belongs to a different reference set"));
        }
        let cap = 2.0 * self.context.grid.spacing();
        let sign = if reversed { -1.0 } else { 1.0 };
        let mut owners = Vec::with_capacity(s.mesh.len());
        for fc in &s.mesh.facets {
            let (k, _) = self.locator.nearest(&fc.midpoint, cap).ok_or_else(|| {
                Error::invalid(format!(
                    "facet at {:?} is not on the reduced boundary",
                    to_vec(&fc.midpoint, s.mesh.dim)
                ))
            })?;
            if sign * dot(&fc.normal, &self.context.boundary.facets[k].normal) <= 0.0 {
                return Err(Error::invalid("surface normal disagrees with its reference set"));
            }
            owners.push(k);
        }
        Ok(Matched { owners, reversed })
    }

    /// `𝔉(S) = −∫_S 𝓕_i·ν`, or `∫_S 𝓕_e·ν_E` when `S` is oriented by the
    /// complement. Uses the limit trace densities.
    pub fn flux(&self, s: &OrientedSurface) -> Result<f64> {
        let m = self.matched(s)?;
        let (density, sign) = if m.reversed {
            (&self.exterior.limit_density, 1.0)
        } else {
            (&self.interior.limit_density, -1.0)
        };
        Ok(sign * s.mesh.integrate(|i, _| density[m.owners[i]]))
    }
}
