//! Gauss-Green, jump and classical-consistency checks built on the traces.

use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::fields::DMField;
use crate::grid::Mask;
use crate::numerics::Sum;
use crate::point::{dot, Point};

use super::{level_density, limit, trace_with, ScaleTrace, Side, TraceContext, TraceResult};

type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// Smooth test function `φ` with its gradient.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub value: ScalarFn,
    pub gradient: VectorFn,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

impl TestFunction {
    /// `φ ≡ 1` near `E`.
    pub fn one() -> Self {
        TestFunction {
            name: "one".into(),
            value: Arc::new(|_| 1.0),
            gradient: Arc::new(|_| [0.0; 3]),
        }
    }

    /// `φ(y) = exp(-|y|²)`.
    pub fn gaussian() -> Self {
        TestFunction {
            name: "gaussian".into(),
            value: Arc::new(|p| (-dot(p, p)).exp()),
            gradient: Arc::new(|p| {
                let s = -2.0 * (-dot(p, p)).exp();
                [s * p[0], s * p[1], s * p[2]]
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussGreenReport {
    pub test_function: String,
    /// `∫_{E¹} φ d(div F)`.
    pub bulk_divergence: f64,
    /// `∫_{E¹} F·∇φ`.
    pub bulk_gradient: f64,
    /// `∫_{∂*E} φ 𝓕_i·ν` at the finest ε.
    pub boundary: f64,
    /// `sup|F|·Per(E)`.
    pub normalization: f64,
    /// Normalized residual per ε, coarsest first.
    pub residuals: Vec<(f64, f64)>,
    pub residual: f64,
    /// Residual with the boundary term replaced by its Richardson limit
    /// over the schedule.
    pub limit_residual: f64,
}

/// Normalized residual of `∫_{E¹} φ div F + ∫_{E¹} F·∇φ + ∫_{∂*E} φ 𝓕_i·ν`.
pub fn gauss_green_check(f: &DMField, ctx: &TraceContext, phi: &TestFunction) -> Result<GaussGreenReport> {
    let trace = trace_with(f, ctx, Side::Interior)?;
    let bulk_divergence = f
        .divergence()
        .integrate(|p| if ctx.in_interior(p) { (phi.value)(p) } else { 0.0 });
    let grid = &ctx.grid;
    let mut s = Sum::new();
    for k in 0..grid.len() {
        let c = grid.center_flat(k);
        if ctx.in_interior(&c) {
            s.add(dot(&f.eval(&c), &(phi.gradient)(&c)));
        }
    }
    let bulk_gradient = s.value() * grid.cell_volume();
    let normalization = (f.sup_bound() * ctx.perimeter()).max(f64::MIN_POSITIVE);
    let against_phi = |sc: &ScaleTrace| ctx.boundary.integrate(|i, fc| sc.density[i] * (phi.value)(&fc.midpoint));
    let residuals: Vec<(f64, f64)> = trace
        .scales
        .iter()
        .map(|sc| (sc.epsilon, (bulk_divergence + bulk_gradient + against_phi(sc)).abs() / normalization))
        .collect();
    let boundary = against_phi(trace.scales.last().expect("validated schedule"));
    let (limit_boundary, _) = limit(&trace.scales, against_phi);
    Ok(GaussGreenReport {
        test_function: phi.name.clone(),
        bulk_divergence,
        bulk_gradient,
        boundary,
        normalization,
        residual: residuals.last().map_or(f64::NAN, |r| r.1),
        limit_residual: (bulk_divergence + bulk_gradient + limit_boundary).abs() / normalization,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpReport {
    /// `∫(𝓕_i·ν − 𝓕_e·ν) dH^{N-1}` at the finest ε.
    pub jump_integral: f64,
    /// Richardson limit of the same integral over the schedule.
    pub limit_jump_integral: f64,
    /// `div F` of the one-cell collar around `∂*E`.
    pub collar_mass: f64,
    pub collar_tv: f64,
    /// `|collar_mass − jump_integral| / collar_tv`.
    pub residual: f64,
    /// `|jump_integral| / (sup|F|·Per(E))`.
    pub relative_jump: f64,
    /// Same with the limit integral; the test for continuous fields.
    pub limit_relative_jump: f64,
    pub interior_total: f64,
    pub exterior_total: f64,
}

/// Cells touched by the boundary mesh, widened by one cell.
fn collar(ctx: &TraceContext) -> Mask {
    let grid = &ctx.grid;
    let mut cells = vec![false; grid.len()];
    let mut mark = |p: &Point| {
        if let Some(idx) = grid.locate(p) {
            cells[grid.flat(&idx)] = true;
        }
    };
    for fc in &ctx.boundary.facets {
        mark(&fc.midpoint);
        for v in &fc.vertices {
            mark(v);
        }
    }
    Mask::new(grid.clone(), cells).expect("mask matches grid").dilate()
}

pub fn jump_check(f: &DMField, ctx: &TraceContext) -> Result<JumpReport> {
    let ti = trace_with(f, ctx, Side::Interior)?;
    let te = trace_with(f, ctx, Side::Exterior)?;
    jump_from_traces(f, ctx, &ti, &te)
}

pub(crate) fn jump_from_traces(f: &DMField, ctx: &TraceContext, ti: &TraceResult, te: &TraceResult) -> Result<JumpReport> {
    let jump_integral = ctx.boundary.integrate(|i, _| ti.density[i] - te.density[i]);
    let per_scale: Vec<ScaleTrace> = ti
        .scales
        .iter()
        .zip(&te.scales)
        .map(|(a, b)| ScaleTrace {
            total: a.total - b.total,
            ..a.clone()
        })
        .collect();
    let (limit_jump_integral, _) = limit(&per_scale, |s| s.total);
    let c = collar(ctx);
    let collar_mass = f.divergence().eval(&c)?;
    let collar_tv = f.divergence().tv(&c)?;
    let scale = (f.sup_bound() * ctx.perimeter()).max(f64::MIN_POSITIVE);
    let residual = if collar_tv > 1e-12 * scale {
        (collar_mass - jump_integral).abs() / collar_tv
    } else {
        (collar_mass - jump_integral).abs() / scale
    };
    Ok(JumpReport {
        jump_integral,
        limit_jump_integral,
        collar_mass,
        collar_tv,
        residual,
        relative_jump: jump_integral.abs() / scale,
        limit_relative_jump: limit_jump_integral.abs() / scale,
        interior_total: ti.total,
        exterior_total: te.total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub regular_facets: usize,
    /// Largest `|𝓕_i·ν − F·ν|` over regular facets.
    pub max_interior_deviation: f64,
    pub max_exterior_deviation: f64,
    /// Largest `|𝓕_i·ν − 𝓕_e·ν|` over regular facets.
    pub max_side_gap: f64,
    /// Richardson limits of `σ_i(∂*E)` and `σ_e(∂*E)`.
    pub interior_total: f64,
    pub exterior_total: f64,
    /// `0.05·sup|F|`.
    pub facet_tolerance: f64,
    /// `|σ_i − σ_e| / max(|σ_i|, |σ_e|)`, or 0 when both vanish to
    /// rounding.
    pub total_gap: f64,
    pub pass: bool,
}

/// Compares both traces with the classical product `F·ν` on regular facets.
pub fn classical_consistency(f: &DMField, ctx: &TraceContext) -> Result<ConsistencyReport> {
    let ti = trace_with(f, ctx, Side::Interior)?;
    let te = trace_with(f, ctx, Side::Exterior)?;
    let (mut di, mut de, mut gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut count = 0;
    for (i, fc) in ctx.boundary.facets.iter().enumerate() {
        if !ctx.regular[i] {
            continue;
        }
        count += 1;
        let classical = dot(&f.eval(&fc.midpoint), &fc.normal);
        di = di.max((ti.density[i] - classical).abs());
        de = de.max((te.density[i] - classical).abs());
        gap = gap.max((ti.density[i] - te.density[i]).abs());
    }
    let tol = 0.05 * f.sup_bound();
    let (si, se) = (ti.limit_total, te.limit_total);
    let scale = si.abs().max(se.abs());
    let total_gap = if scale <= 1e-12 * f.sup_bound() * ctx.perimeter() {
        0.0
    } else {
        (si - se).abs() / scale
    };
    Ok(ConsistencyReport {
        regular_facets: count,
        max_interior_deviation: di,
        max_exterior_deviation: de,
        max_side_gap: gap,
        interior_total: si,
        exterior_total: se,
        facet_tolerance: tol,
        total_gap,
        pass: count > 0 && di <= tol && de <= tol && gap <= tol && total_gap <= 0.02,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub epsilon: f64,
    /// `(t, σ_{k;t}(ℝ^N))` at the finest ε.
    pub totals: Vec<(f64, f64)>,
    /// `(max − min) / (sup|F|·Per(E))`.
    pub variation: f64,
}

/// Spread of the interior-band totals at the finest ε.
pub fn t_stability(f: &DMField, ctx: &TraceContext) -> StabilityReport {
    let fine = ctx.finest();
    let totals: Vec<(f64, f64)> = fine
        .interior
        .iter()
        .map(|(t, mesh)| {
            let d = level_density(f, mesh, Side::Interior);
            (*t, mesh.integrate(|i, _| d[i]))
        })
        .collect();
    let (lo, hi) = totals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(_, v)| (l.min(v), h.max(v)));
    StabilityReport {
        epsilon: fine.epsilon,
        totals,
        variation: (hi - lo) / (f.sup_bound() * ctx.perimeter()).max(f64::MIN_POSITIVE),
    }
}
