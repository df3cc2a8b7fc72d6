use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{mollify, rasterize_with_margin, GridSpec, KernelKind, MollifierKernel, ScalarGridField, ShapeSpec};
use crate::measures::ConvergenceTable;
use crate::numerics::Sum;
use crate::point::norm;

use super::extract::extract_level_set;
use super::levels::select_levels;

/// `Σ |∇u| h^N` with centered differences.
pub fn gradient_mass(u: &ScalarGridField) -> f64 {
    let g = u.grid();
    let mut s = Sum::new();
    for k in 0..g.len() {
        let idx = g.multi(k);
        s.add(norm(&u.gradient_at(&idx)));
    }
    s.value() * g.cell_volume()
}

#[derive(Debug, Clone, Serialize)]
pub struct PerimeterResult {
    /// Gradient mass at the finest ε.
    pub value: f64,
    /// Richardson limit from the three finest ε with the observed order.
    pub extrapolated: f64,
    /// Observed convergence order, if the table supports one.
    pub order: Option<f64>,
    pub table: ConvergenceTable,
}

/// Richardson extrapolation of `v(ε)` from the last three schedule entries,
/// with the order estimated from the same entries. Falls back to the last
/// value when the differences are not geometric.
pub fn richardson(eps: &[f64], vals: &[f64]) -> (f64, Option<f64>) {
    let n = vals.len();
    let last = vals[n - 1];
    if n < 3 {
        return (last, None);
    }
    let (e0, e1, e2) = (eps[n - 3], eps[n - 2], eps[n - 1]);
    let (d1, d2) = (vals[n - 2] - vals[n - 3], vals[n - 1] - vals[n - 2]);
    let r = e1 / e2;
    if ((e0 / e1) / r - 1.0).abs() > 1e-9 || d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return (last, None);
    }
    let p = (d1 / d2).ln() / r.ln();
    if !(0.5..=6.0).contains(&p) {
        return (last, None);
    }
    (last + d2 / (r.powf(p) - 1.0), Some(p))
}

/// Perimeter of `shape` as the gradient mass of its mollified indicator
/// along a decreasing ε schedule.
pub fn perimeter(shape: &ShapeSpec, grid: &GridSpec, schedule: &[f64], kind: KernelKind) -> Result<PerimeterResult> {
    check_schedule(schedule)?;
    let chi = rasterize_with_margin(shape, grid, 2.0 * schedule[0])?;
    let mut rows = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let u = mollify(&chi, &MollifierKernel::new(kind, eps)?)?;
        rows.push((eps, None, gradient_mass(&u)));
    }
    let table = ConvergenceTable::new(rows);
    let (extrapolated, order) = richardson(&table.epsilons(), &table.means());
    Ok(PerimeterResult {
        value: table.last_value(),
        extrapolated,
        order,
        table,
    })
}

pub(crate) fn check_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.len() < 3 || schedule.windows(2).any(|w| w[1] >= w[0]) || schedule[schedule.len() - 1] <= 0.0 {
        return Err(Error::invalid("schedule needs at least 3 strictly decreasing positive epsilons"));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CoareaResult {
    pub gradient_mass: f64,
    pub level_integral: f64,
    pub residual: f64,
    pub levels: Vec<f64>,
}

/// Compares `Σ|∇u| h^N` with the midpoint-rule integral over levels of the
/// level-set measure.
pub fn coarea_check(u: &ScalarGridField, quadrature_levels: usize) -> Result<CoareaResult> {
    let levels = select_levels(u, (0.0, 1.0), quadrature_levels)?;
    let mut s = Sum::new();
    for &t in &levels {
        match extract_level_set(u, t) {
            Ok(m) => s.add(m.area()),
            Err(Error::DegenerateLevel { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let level_integral = s.value() / quadrature_levels as f64;
    let gm = gradient_mass(u);
    Ok(CoareaResult {
        gradient_mass: gm,
        level_integral,
        residual: (gm - level_integral).abs() / gm,
        levels,
    })
}
