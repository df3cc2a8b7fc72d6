//! Product rule `div(gF)` for BV weights and extension of a field by zero.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::gradient_mass;
use crate::grid::{
    gradient, mollify, mollify_replicate, rasterize, GridSpec, KernelKind, MollifierKernel, ScalarGridField, ShapeSpec,
};
use crate::measures::{ConvergenceTable, SignedMeasure, SurfacePart};
use crate::point::{dot, Point};
use crate::traces::{interior_trace, TraceSchedule};

use super::DMField;

#[derive(Debug, Clone, Copy, PartialEq)]
enum WeightKind {
    Constant(f64),
    Indicator,
    General,
}

/// A bounded BV weight `g` with its gradient-mass table along a schedule.
#[derive(Debug, Clone)]
pub struct BVWeight {
    g: ScalarGridField,
    kind: WeightKind,
    schedule: Vec<f64>,
    table: ConvergenceTable,
}

impl BVWeight {
    /// Classifies `g` as constant, an indicator (values in {0, 1}) or a
    /// general weight, and tabulates `Σ|∇g_k|·h^N` along `schedule`.
    pub fn new(g: ScalarGridField, schedule: &[f64]) -> Result<Self> {
        let (lo, hi) = g.min_max();
        let kind = if lo == hi {
            WeightKind::Constant(lo)
        } else if g.values().iter().all(|&v| v == 0.0 || v == 1.0) {
            WeightKind::Indicator
        } else {
            WeightKind::General
        };
        if schedule.is_empty() || schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid("weight schedule must be non-empty and strictly decreasing"));
        }
        let mut w = BVWeight {
            g,
            kind,
            schedule: schedule.to_vec(),
            table: ConvergenceTable::new(Vec::new()),
        };
        let mut rows = Vec::new();
        for &eps in schedule {
            rows.push((eps, None, gradient_mass(&w.mollified(eps)?)));
        }
        w.table = ConvergenceTable::new(rows);
        Ok(w)
    }

    pub fn constant(grid: &GridSpec, c: f64, schedule: &[f64]) -> Result<Self> {
        Self::new(ScalarGridField::from_fn(grid, |_| c), schedule)
    }

    pub fn indicator(shape: &ShapeSpec, grid: &GridSpec, schedule: &[f64]) -> Result<Self> {
        Self::new(rasterize(shape, grid)?, schedule)
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Point) -> f64, schedule: &[f64]) -> Result<Self> {
        Self::new(ScalarGridField::from_fn(grid, f), schedule)
    }

    pub fn g(&self) -> &ScalarGridField {
        &self.g
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    /// Gradient mass of `g_k` per schedule entry.
    pub fn table(&self) -> &ConvergenceTable {
        &self.table
    }

    /// `g_k`: constants are returned as is; indicators are mollified with
    /// zero extension, general weights with edge replication.
    pub fn mollified(&self, eps: f64) -> Result<ScalarGridField> {
        let kernel = MollifierKernel::new(KernelKind::SmoothBump, eps)?;
        match self.kind {
            WeightKind::Constant(_) => {
                if eps < 2.0 * self.g.grid().spacing() * (1.0 - 1e-12) {
                    return Err(Error::Resolution {
                        epsilon: eps,
                        min: 2.0 * self.g.grid().spacing(),
                    });
                }
                Ok(self.g.clone())
            }
            WeightKind::Indicator => mollify(&self.g, &kernel),
            WeightKind::General => mollify_replicate(&self.g, &kernel),
        }
    }

    fn sup(&self) -> f64 {
        let (lo, hi) = self.g.min_max();
        lo.abs().max(hi.abs())
    }
}

#[derive(Debug, Clone)]
pub struct ProductResult {
    /// `gF` with the finest-schedule divergence.
    pub field: DMField,
    /// Total variation of `div(g_k F)` per schedule entry.
    pub table: ConvergenceTable,
}

/// `g_k div F + F·∇g_k` as a measure: AC part on the grid, singular parts of
/// `div F` reweighted by `g_k` at their support points.
fn product_measure(gk: &ScalarGridField, f: &DMField) -> Result<SignedMeasure> {
    let grid = f.grid();
    let div = f.divergence();
    let grad = gradient(gk);
    let mut ac = ScalarGridField::zeros(grid);
    for (k, v) in ac.values_mut().iter_mut().enumerate() {
        let idx = grid.multi(k);
        let c = grid.center(&idx);
        let base = div.ac().map_or(0.0, |a| a.values()[k]);
        *v = gk.values()[k] * base + dot(&f.eval(&c), &grad.at(&idx));
    }
    let mut mu = SignedMeasure::from_ac(ac);
    for SurfacePart { mesh, density } in div.surfaces() {
        let d = mesh
            .facets
            .iter()
            .zip(density)
            .map(|(fc, &d)| d * gk.interpolate(&fc.midpoint))
            .collect();
        mu.add_surface(mesh.clone(), d)?;
    }
    for a in div.atoms() {
        mu = mu.with_atom(a.point, a.weight * gk.interpolate(&a.point));
    }
    Ok(mu)
}

pub fn product_rule(g: &BVWeight, f: &DMField) -> Result<ProductResult> {
    if !g.g().grid().same_shape(f.grid()) {
        return Err(Error::invalid("weight and field live on different grids"));
    }
    let mut rows = Vec::new();
    let mut finest = None;
    for &eps in g.schedule() {
        let gk = g.mollified(eps)?;
        let mu = product_measure(&gk, f)?;
        rows.push((eps, None, mu.tv_total()));
        finest = Some((gk, mu));
    }
    let (gk, mu) = finest.expect("schedule is non-empty");
    let ev = f.evaluator();
    let evaluator = Arc::new(move |p: &Point| {
        let s = gk.interpolate(p);
        let v = ev(p);
        [s * v[0], s * v[1], s * v[2]]
    });
    let field = DMField::composite(
        format!("product({})", f.name()),
        f.grid().clone(),
        g.sup() * f.sup_bound(),
        mu,
        evaluator,
    );
    Ok(ProductResult {
        field,
        table: ConvergenceTable::new(rows),
    })
}

/// `F* = χ_U F`: the divergence is `div F` restricted to `U` plus a surface
/// part on the boundary of `U` whose density is the interior normal trace,
/// taken as its limit over the schedule.
pub fn extend_by_zero(f: &DMField, u: &ShapeSpec, schedule: &TraceSchedule) -> Result<DMField> {
    let dim = f.dim();
    u.validate(dim)?;
    let trace = interior_trace(f, u, schedule)?;
    let inner = u.clone();
    let mut mu = f.divergence().restricted(move |p| inner.contains(p, dim));
    mu.add_surface(trace.boundary_mesh.clone(), trace.limit_density.clone())?;
    let ev = f.evaluator();
    let shape = u.clone();
    let evaluator = Arc::new(move |p: &Point| if shape.contains(p, dim) { ev(p) } else { [0.0; 3] });
    Ok(DMField::composite(
        format!("extend({})", f.name()),
        f.grid().clone(),
        f.sup_bound(),
        mu,
        evaluator,
    ))
}
