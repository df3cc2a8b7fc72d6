//! Convergence of the approximants `A_{k;t}` towards `E¹`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::DMField;
use crate::grid::rasterize;
use crate::measures::{region_contains, symdiff_measure, ConvergenceTable, SignedMeasure};

use super::{level_density, Side, TraceContext, E1_LEVEL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `‖μ‖(A_{k;t} Δ E¹_proxy)`.
    pub symdiff: ConvergenceTable,
    /// `H^{N-1}(∂A_{k;t} ∩ Z)` with `Z` the exterior of `E` eroded by a cell.
    pub exterior_area: ConvergenceTable,
    /// `‖σ_{k;t}‖(Z)`, when a field is supplied.
    pub exterior_flux: Option<ConvergenceTable>,
}

impl Diagnostics {
    /// Every table decreases by at least `factor` from coarsest to finest ε.
    pub fn decreases_by(&self, factor: f64) -> bool {
        self.symdiff.decreases_by(factor)
            && self.exterior_area.decreases_by(factor)
            && self.exterior_flux.as_ref().is_none_or(|t| t.decreases_by(factor))
    }
}

pub fn convergence_diagnostics(ctx: &TraceContext, mu: &SignedMeasure, field: Option<&DMField>) -> Result<Diagnostics> {
    let dim = ctx.dim();
    if dim >= 2 && mu.has_atoms() {
        return Err(Error::AtomRejected { dim });
    }
    let e1 = ctx.finest().u.above(E1_LEVEL);
    let zone = rasterize(&ctx.shape, &ctx.grid)?.above(0.5).not().erode();
    let (mut sym, mut area, mut flux) = (Vec::new(), Vec::new(), Vec::new());
    for sc in &ctx.scales {
        for (t, mesh) in &sc.interior {
            sym.push((sc.epsilon, Some(*t), symdiff_measure(mu, &sc.u.above(*t), &e1)?));
            let outside: Vec<bool> = mesh.facets.iter().map(|f| region_contains(&zone, &f.midpoint)).collect();
            area.push((sc.epsilon, Some(*t), mesh.integrate(|i, _| if outside[i] { 1.0 } else { 0.0 })));
            if let Some(f) = field {
                let d = level_density(f, mesh, Side::Interior);
                flux.push((sc.epsilon, Some(*t), mesh.integrate(|i, _| if outside[i] { d[i].abs() } else { 0.0 })));
            }
        }
    }
    Ok(Diagnostics {
        symdiff: ConvergenceTable::new(sym),
        exterior_area: ConvergenceTable::new(area),
        exterior_flux: field.map(|_| ConvergenceTable::new(flux)),
    })
}
