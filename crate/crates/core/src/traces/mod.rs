//! Normal traces of divergence-measure fields on sets of finite perimeter,
//! obtained from level sets of mollified indicators.

mod checks;
mod diagnostics;
mod inclusion;

pub use checks::{
    classical_consistency, gauss_green_check, jump_check, t_stability, ConsistencyReport, GaussGreenReport, JumpReport,
    StabilityReport, TestFunction,
};
pub use diagnostics::{convergence_diagnostics, Diagnostics};
pub use inclusion::{cusp_shape, one_sided_inclusion, FatnessConfig, InclusionReport};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fields::DMField;
use crate::geometry::{boundary_mesh, richardson, extract_level_set, select_levels, Facet, MidpointLocator, SurfaceMesh};
use crate::grid::{mollify, rasterize, GridSpec, KernelKind, MollifierKernel, ScalarGridField, ShapeSpec};
use crate::measures::{ConvergenceTable, SignedMeasure};
use crate::numerics::Sum;
use crate::point::{dot, lerp, sub, Point};

/// Distance from `t = 1/2` kept free at both ends of each band.
pub const DELTA_T: f64 = 0.05;
/// Level of the finest approximant standing in for the measure-theoretic
/// interior.
pub const E1_LEVEL: f64 = 0.55;
/// Level of the finest approximant standing in for `E¹ ∪ ∂*E`.
pub const CLOSURE_LEVEL: f64 = 0.45;
/// Projection cap in units of ε.
const CAP_FACTOR: f64 = 3.0;
/// Facets whose neighbours within `3ε` turn by more than this are not regular.
const REGULAR_ANGLE_DEG: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Interior,
    Exterior,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSchedule {
    pub eps_list: Vec<f64>,
    pub levels_per_band: usize,
    pub kernel: KernelKind,
}

impl TraceSchedule {
    pub fn new(eps_list: Vec<f64>, levels_per_band: usize) -> Self {
        TraceSchedule {
            eps_list,
            levels_per_band,
            kernel: KernelKind::SmoothBump,
        }
    }

    /// ε ∈ {0.2, 0.1, 0.05}, 8 levels per band.
    pub fn reference() -> Self {
        Self::new(vec![0.2, 0.1, 0.05], 8)
    }

    pub fn interior_band(&self) -> (f64, f64) {
        (0.5 + DELTA_T, 1.0 - DELTA_T)
    }

    pub fn exterior_band(&self) -> (f64, f64) {
        (DELTA_T, 0.5 - DELTA_T)
    }

    pub fn finest(&self) -> f64 {
        *self.eps_list.last().expect("validated schedule")
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.eps_list.is_empty() || self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("trace schedule must be non-empty and strictly decreasing"));
        }
        if self.levels_per_band < 4 {
            return Err(Error::invalid("at least 4 levels per band are required"));
        }
        let min = 2.0 * grid.spacing();
        if let Some(&e) = self.eps_list.iter().find(|&&e| e < min * (1.0 - 1e-12)) {
            return Err(Error::Resolution { epsilon: e, min });
        }
        Ok(())
    }
}

/// Level sets of one mollified indicator.
#[derive(Debug, Clone)]
pub struct ScaleLevels {
    pub epsilon: f64,
    pub u: ScalarGridField,
    pub interior: Vec<(f64, SurfaceMesh)>,
    pub exterior: Vec<(f64, SurfaceMesh)>,
}

impl ScaleLevels {
    pub fn band(&self, side: Side) -> &[(f64, SurfaceMesh)] {
        match side {
            Side::Interior => &self.interior,
            Side::Exterior => &self.exterior,
        }
    }
}

/// Everything about a set `E` that does not depend on the field: the
/// approximants at every scale and the frozen boundary mesh. Building it
/// once lets several fields share the level-set extraction.
#[derive(Debug, Clone)]
pub struct TraceContext {
    pub shape: ShapeSpec,
    pub grid: GridSpec,
    pub schedule: TraceSchedule,
    pub scales: Vec<ScaleLevels>,
    /// Frozen mesh of the reduced boundary at the finest ε.
    pub boundary: SurfaceMesh,
    /// Boundary facets with no normal turning above 20° within `3ε`.
    pub regular: Vec<bool>,
}

impl TraceContext {
    pub fn new(shape: &ShapeSpec, grid: &GridSpec, schedule: &TraceSchedule) -> Result<Self> {
        schedule.validate(grid)?;
        let chi = rasterize(shape, grid)?;
        let mut scales = Vec::new();
        for &eps in &schedule.eps_list {
            let u = mollify(&chi, &MollifierKernel::new(schedule.kernel, eps)?)?;
            let band = |b: (f64, f64)| -> Result<Vec<(f64, SurfaceMesh)>> {
                select_levels(&u, b, schedule.levels_per_band)?
                    .into_iter()
                    .map(|t| Ok((t, extract_level_set(&u, t)?)))
                    .collect()
            };
            let interior = band(schedule.interior_band())?;
            let exterior = band(schedule.exterior_band())?;
            scales.push(ScaleLevels {
                epsilon: eps,
                u,
                interior,
                exterior,
            });
        }
        let fine = scales.last().expect("validated schedule");
        let boundary = boundary_mesh(shape, &fine.u, fine.epsilon)?;
        let regular = regular_facets(&boundary, CAP_FACTOR * fine.epsilon, grid.spacing());
        Ok(TraceContext {
            shape: shape.clone(),
            grid: grid.clone(),
            schedule: schedule.clone(),
            scales,
            boundary,
            regular,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn finest(&self) -> &ScaleLevels {
        self.scales.last().expect("validated schedule")
    }

    /// Perimeter of `E` as the area of the frozen boundary mesh.
    pub fn perimeter(&self) -> f64 {
        self.boundary.area()
    }

    /// Membership in `E¹` (approximated by `{u > 0.55}` at the finest ε).
    pub fn in_interior(&self, p: &Point) -> bool {
        self.finest().u.interpolate(p) > E1_LEVEL
    }

    /// Membership in `E¹ ∪ ∂*E` (approximated by `{u > 0.45}`).
    pub fn in_closure(&self, p: &Point) -> bool {
        self.finest().u.interpolate(p) > CLOSURE_LEVEL
    }
}

fn regular_facets(mesh: &SurfaceMesh, reach: f64, h: f64) -> Vec<bool> {
    let cos_max = REGULAR_ANGLE_DEG.to_radians().cos();
    let mut out = vec![true; mesh.len()];
    // Facets are short, so comparing midpoints within the reach is enough.
    let mids: Vec<Point> = mesh.facets.iter().map(|f| f.midpoint).collect();
    let size = reach.max(h);
    let mut buckets: std::collections::HashMap<[i64; 3], Vec<usize>> = std::collections::HashMap::new();
    let key = |p: &Point| [(p[0] / size).floor() as i64, (p[1] / size).floor() as i64, (p[2] / size).floor() as i64];
    for (i, m) in mids.iter().enumerate() {
        buckets.entry(key(m)).or_default().push(i);
    }
    let dim = mesh.dim;
    for (i, m) in mids.iter().enumerate() {
        let k = key(m);
        'outer: for dx in -1..=1i64 {
            for dy in if dim > 1 { -1..=1i64 } else { 0..=0 } {
                for dz in if dim > 2 { -1..=1i64 } else { 0..=0 } {
                    let Some(list) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                    for &j in list {
                        if crate::point::dist(m, &mids[j]) <= reach
                            && dot(&mesh.facets[i].normal, &mesh.facets[j].normal) < cos_max
                        {
                            out[i] = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Evaluation point for `F` on a level facet: piecewise fields are read one
/// cell along `±ν` so the side of their interface is unambiguous.
fn facet_value(f: &DMField, facet: &Facet, side: Side) -> f64 {
    let v = f.eval_side(&facet.midpoint, &facet.normal, side == Side::Interior);
    dot(&v, &facet.normal)
}

fn side_of(t: f64) -> Side {
    if t > 0.5 {
        Side::Interior
    } else {
        Side::Exterior
    }
}

/// Per-facet densities `F·ν` of `σ_{k;t}` on `∂A_{k;t}`.
fn level_density(f: &DMField, mesh: &SurfaceMesh, side: Side) -> Vec<f64> {
    mesh.facets.iter().map(|fc| facet_value(f, fc, side)).collect()
}

/// `σ_{k;t}`: surface measure on `∂{u_k > t}` with density `F·ν`.
pub fn sigma_kt(f: &DMField, e: &ShapeSpec, eps: f64, t: f64, kernel: KernelKind) -> Result<SignedMeasure> {
    let chi = rasterize(e, f.grid())?;
    let u = mollify(&chi, &MollifierKernel::new(kernel, eps)?)?;
    let mesh = extract_level_set(&u, t)?;
    let density = level_density(f, &mesh, side_of(t));
    SignedMeasure::zero(f.grid()).with_surface(mesh, density)
}

/// Smallest piece, in cells, below which a straddling piece is assigned by
/// its centre.
const MIN_PIECE: f64 = 1.0 / 256.0;

/// Assigns level pieces to the boundary facet with the nearest midpoint.
/// The points of a Voronoi cell within the cap form a convex set, so a
/// piece whose corners share an owner lies entirely in that owner's cell;
/// other pieces are split until they do or become negligible.
struct Projector<'a> {
    loc: &'a MidpointLocator,
    cap: f64,
    min_piece: f64,
    received: Vec<Sum>,
    lost: Sum,
}

impl Projector<'_> {
    fn owner(&self, p: &Point) -> Option<usize> {
        self.loc.nearest(p, self.cap).map(|(i, _)| i)
    }

    fn deposit(&mut self, owner: Option<usize>, flux: f64) {
        match owner {
            Some(b) => self.received[b].add(flux),
            None => self.lost.add(flux),
        }
    }

    fn segment(&mut self, a: Point, b: Point, oa: Option<usize>, ob: Option<usize>, d: f64) {
        let len = crate::point::dist(&a, &b);
        if oa.is_some() && oa == ob {
            self.deposit(oa, d * len);
            return;
        }
        let m = lerp(&a, &b, 0.5);
        let om = self.owner(&m);
        if len <= self.min_piece {
            self.deposit(om, d * len);
            return;
        }
        self.segment(a, m, oa, om, d);
        self.segment(m, b, om, ob, d);
    }

    fn triangle(&mut self, v: [Point; 3], o: [Option<usize>; 3], d: f64) {
        let area = 0.5 * crate::point::norm(&crate::point::cross(&sub(&v[1], &v[0]), &sub(&v[2], &v[0])));
        if o[0].is_some() && o[0] == o[1] && o[1] == o[2] {
            self.deposit(o[0], d * area);
            return;
        }
        let longest = (0..3).map(|i| crate::point::dist(&v[i], &v[(i + 1) % 3])).fold(0.0, f64::max);
        if longest <= self.min_piece {
            let c = crate::point::scale(&crate::point::add(&crate::point::add(&v[0], &v[1]), &v[2]), 1.0 / 3.0);
            let oc = self.owner(&c);
            self.deposit(oc, d * area);
            return;
        }
        let m = [lerp(&v[0], &v[1], 0.5), lerp(&v[1], &v[2], 0.5), lerp(&v[2], &v[0], 0.5)];
        let om = [self.owner(&m[0]), self.owner(&m[1]), self.owner(&m[2])];
        self.triangle([v[0], m[0], m[2]], [o[0], om[0], om[2]], d);
        self.triangle([m[0], v[1], m[1]], [om[0], o[1], om[1]], d);
        self.triangle([m[2], m[1], v[2]], [om[2], om[1], o[2]], d);
        self.triangle([m[0], m[1], m[2]], [om[0], om[1], om[2]], d);
    }

    fn facet(&mut self, fc: &Facet, d: f64) {
        let v = &fc.vertices;
        match v.len() {
            1 => {
                let o = self.owner(&v[0]);
                self.deposit(o, d * fc.area);
            }
            2 => {
                let (oa, ob) = (self.owner(&v[0]), self.owner(&v[1]));
                self.segment(v[0], v[1], oa, ob, d);
            }
            _ => {
                let o = [self.owner(&v[0]), self.owner(&v[1]), self.owner(&v[2])];
                self.triangle([v[0], v[1], v[2]], o, d);
            }
        }
    }
}

/// Pushes the flux of one level set onto the boundary facets. Returns the
/// received flux per boundary facet and the flux left unassigned.
fn project(level: &SurfaceMesh, density: &[f64], loc: &MidpointLocator, n: usize, cap: f64, h: f64) -> (Vec<f64>, f64) {
    let mut pr = Projector {
        loc,
        cap,
        min_piece: MIN_PIECE * h,
        received: vec![Sum::new(); n],
        lost: Sum::new(),
    };
    for (fc, &d) in level.facets.iter().zip(density) {
        if d != 0.0 {
            pr.facet(fc, d);
        }
    }
    (pr.received.iter().map(Sum::value).collect(), pr.lost.value())
}

/// Band-averaged trace at one ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleTrace {
    pub epsilon: f64,
    pub levels: Vec<f64>,
    #[serde(skip)]
    pub density: Vec<f64>,
    /// `σ(∂*E)` from the projected density.
    pub total: f64,
    /// Band mean of the flux that found no boundary facet within `3ε`.
    pub unassigned: f64,
}

#[derive(Debug, Clone)]
pub struct TraceResult {
    pub side: Side,
    pub boundary_mesh: SurfaceMesh,
    /// Per boundary facet, at the finest ε.
    pub density: Vec<f64>,
    pub total: f64,
    /// Totals of `σ_{k;t}` for every `(ε, t)`.
    pub table: ConvergenceTable,
    pub sup_density: f64,
    pub unassigned: f64,
    /// `μ(E¹)` for the interior side, `μ(E¹ ∪ ∂*E)` for the exterior side.
    pub region_mass: f64,
    /// `|region_mass + total|`.
    pub residual: f64,
    /// Richardson limit of the totals over the ε schedule; equals `total`
    /// when the table shows no consistent order.
    pub limit_total: f64,
    pub limit_order: Option<f64>,
    /// Per-facet Richardson limit with the order of the totals.
    pub limit_density: Vec<f64>,
    /// `|region_mass + limit_total|`.
    pub limit_residual: f64,
    pub scales: Vec<ScaleTrace>,
}

impl TraceResult {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "side": self.side,
            "total": self.total,
            "sup_density": self.sup_density,
            "unassigned": self.unassigned,
            "region_mass": self.region_mass,
            "residual": self.residual,
            "limit_total": self.limit_total,
            "limit_order": self.limit_order,
            "limit_residual": self.limit_residual,
            "facets": self.boundary_mesh.len(),
            "scales": self.scales,
            "table": self.table,
        })
    }

    /// Facet table with the trace density as the last column.
    pub fn to_csv(&self) -> String {
        let mut lines = self.boundary_mesh.to_csv().lines().map(str::to_string).collect::<Vec<_>>();
        if let Some(h) = lines.first_mut() {
            h.push_str(",density");
        }
        for (l, d) in lines.iter_mut().skip(1).zip(&self.density) {
            l.push_str(&format!(",{d}"));
        }
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

/// Normal trace of `F` on `∂*E` from one side, given a prepared context.
pub fn trace_with(f: &DMField, ctx: &TraceContext, side: Side) -> Result<TraceResult> {
    if !f.grid().same_shape(&ctx.grid) {
        return Err(Error::invalid("field and set live on different grids"));
    }
    let h = ctx.grid.spacing();
    let areas: Vec<f64> = ctx.boundary.facets.iter().map(|fc| fc.area).collect();
    let mut rows = Vec::new();
    let mut scales = Vec::new();
    for sc in &ctx.scales {
        let cap = CAP_FACTOR * sc.epsilon;
        let loc = MidpointLocator::new(&ctx.boundary, (2.0 * h).max(0.25 * sc.epsilon));
        let band = sc.band(side);
        let mut acc = vec![0.0; areas.len()];
        let mut lost = 0.0;
        for (t, mesh) in band {
            let density = level_density(f, mesh, side);
            rows.push((sc.epsilon, Some(*t), mesh.integrate(|i, _| density[i])));
            let (recv, l) = project(mesh, &density, &loc, areas.len(), cap, h);
            for (a, r) in acc.iter_mut().zip(recv) {
                *a += r;
            }
            lost += l;
        }
        let n = band.len() as f64;
        let density: Vec<f64> = acc.iter().zip(&areas).map(|(r, a)| r / (n * a)).collect();
        let total = ctx.boundary.integrate(|i, _| density[i]);
        scales.push(ScaleTrace {
            epsilon: sc.epsilon,
            levels: band.iter().map(|(t, _)| *t).collect(),
            density,
            total,
            unassigned: lost / n,
        });
    }
    let fine = scales.last().expect("validated schedule");
    let (limit_total, limit_order) = limit(&scales, |s| s.total);
    let limit_density = match (limit_order, scales.len()) {
        (Some(p), n) if n >= 2 => {
            let (mid, fin) = (&scales[n - 2], &scales[n - 1]);
            let k = 1.0 / ((mid.epsilon / fin.epsilon).powf(p) - 1.0);
            fin.density.iter().zip(&mid.density).map(|(f, m)| f + k * (f - m)).collect()
        }
        _ => fine.density.clone(),
    };
    let region_mass = match side {
        Side::Interior => f.divergence().eval_where(|p| ctx.in_interior(p)),
        Side::Exterior => f.divergence().eval_where(|p| ctx.in_closure(p)),
    };
    Ok(TraceResult {
        side,
        boundary_mesh: ctx.boundary.clone(),
        density: fine.density.clone(),
        total: fine.total,
        table: ConvergenceTable::new(rows),
        sup_density: fine.density.iter().fold(0.0, |m, d| m.max(d.abs())),
        unassigned: fine.unassigned,
        region_mass,
        residual: (region_mass + fine.total).abs(),
        limit_total,
        limit_order,
        limit_density,
        limit_residual: (region_mass + limit_total).abs(),
        scales,
    })
}

/// Richardson limit over the schedule of a functional of the per-ε traces.
pub(crate) fn limit(scales: &[ScaleTrace], value: impl Fn(&ScaleTrace) -> f64) -> (f64, Option<f64>) {
    let eps: Vec<f64> = scales.iter().map(|s| s.epsilon).collect();
    let vals: Vec<f64> = scales.iter().map(value).collect();
    richardson(&eps, &vals)
}

pub fn interior_trace(f: &DMField, e: &ShapeSpec, schedule: &TraceSchedule) -> Result<TraceResult> {
    trace_with(f, &TraceContext::new(e, f.grid(), schedule)?, Side::Interior)
}

pub fn exterior_trace(f: &DMField, e: &ShapeSpec, schedule: &TraceSchedule) -> Result<TraceResult> {
    trace_with(f, &TraceContext::new(e, f.grid(), schedule)?, Side::Exterior)
}

#[cfg(test)]
mod tests;
