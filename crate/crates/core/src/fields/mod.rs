//! Bounded divergence-measure fields together with their divergences.

mod product;
mod registry;

pub use product::{extend_by_zero, product_rule, BVWeight, ProductResult};
pub use registry::{make_chen_frid, registry, FieldParams, FIELD_NAMES};

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{boundary_mesh, SurfaceMesh};
use crate::grid::{mollify, rasterize_with_margin, GridSpec, MollifierKernel, ScalarGridField, ShapeSpec, VectorGridField};
use crate::measures::SignedMeasure;
use crate::point::{dot, norm, Point};

pub type Evaluator = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type DensityFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Structure {
    Analytic,
    Piecewise {
        regions: Vec<ShapeSpec>,
        pieces: Vec<Evaluator>,
        interface: SurfaceMesh,
    },
    Sampled(VectorGridField),
    /// Built from other fields (products, extensions); evaluated pointwise.
    Composite,
}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Analytic => write!(f, "Analytic"),
            Structure::Piecewise { regions, interface, .. } => {
                write!(f, "Piecewise({} regions, {} interface facets)", regions.len(), interface.len())
            }
            Structure::Sampled(v) => write!(f, "Sampled({:?})", v.grid().cells()),
            Structure::Composite => write!(f, "Composite"),
        }
    }
}

/// A bounded field `F` with `div F` a signed measure.
#[derive(Clone)]
pub struct DMField {
    name: String,
    grid: GridSpec,
    sup_bound: f64,
    divergence: SignedMeasure,
    structure: Structure,
    evaluator: Evaluator,
}

impl fmt::Debug for DMField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DMField")
            .field("name", &self.name)
            .field("sup_bound", &self.sup_bound)
            .field("structure", &self.structure)
            .finish()
    }
}

/// One region of a piecewise field with its smooth evaluator.
#[derive(Clone)]
pub struct Piece {
    pub region: ShapeSpec,
    pub field: Evaluator,
    pub divergence: DensityFn,
}

impl DMField {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn divergence(&self) -> &SignedMeasure {
        &self.divergence
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn eval(&self, p: &Point) -> Point {
        (self.evaluator)(p)
    }

    pub fn evaluator(&self) -> Evaluator {
        self.evaluator.clone()
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self.structure, Structure::Piecewise { .. })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Samples on a 10^4-point pseudo-random lattice must respect the bound.
    pub fn check_bound(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.grid.origin(), self.grid.upper());
        for _ in 0..10_000 {
            let mut p = [0.0; 3];
            for a in 0..self.dim() {
                p[a] = rng.random_range(lo[a]..hi[a]);
            }
            let v = norm(&self.eval(&p));
            if !(v <= self.sup_bound * (1.0 + 1e-9) + 1e-9) {
                return Err(Error::invalid(format!(
                    "field '{}' has |F| = {v} above its bound {} at {p:?}",
                    self.name, self.sup_bound
                )));
            }
        }
        Ok(())
    }

    /// Samples the field at cell centers.
    pub fn sample(&self) -> VectorGridField {
        VectorGridField::from_fn(&self.grid, |p| self.eval(p))
    }
}

/// Fields built from closed-form expressions. The declared divergence is
/// spot-checked by centered differences at 100 interior points.
pub fn make_analytic(
    name: &str,
    grid: &GridSpec,
    f: impl Fn(&Point) -> Point + Send + Sync + 'static,
    div: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    sup_bound: f64,
    seed: u64,
) -> Result<DMField> {
    let dim = grid.dim();
    let (lo, hi) = (grid.origin(), grid.upper());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let mut p = [0.0; 3];
        for a in 0..dim {
            let w = hi[a] - lo[a];
            p[a] = rng.random_range(lo[a] + 0.1 * w..hi[a] - 0.1 * w);
        }
        let step = 1e-5 * (hi[0] - lo[0]);
        let mut measured = 0.0;
        for a in 0..dim {
            let (mut q1, mut q2) = (p, p);
            q1[a] += step;
            q2[a] -= step;
            measured += (f(&q1)[a] - f(&q2)[a]) / (2.0 * step);
        }
        let declared = div(&p);
        if (measured - declared).abs() > 1e-4 * declared.abs().max(1.0) {
            return Err(Error::DivergenceMismatch {
                point: p[..dim].to_vec(),
                declared,
                measured,
            });
        }
    }
    let divergence = SignedMeasure::from_ac(ScalarGridField::from_fn(grid, &div));
    let field = DMField {
        name: name.to_string(),
        grid: grid.clone(),
        sup_bound,
        divergence,
        structure: Structure::Analytic,
        evaluator: Arc::new(f),
    };
    field.check_bound(seed)?;
    Ok(field)
}

/// Offset used to decide partition membership away from exact boundary ties.
fn jitter(dim: usize, h: f64) -> Point {
    let mut j = [0.0; 3];
    let irr = [std::f64::consts::SQRT_2 - 1.0, 3f64.sqrt() - 1.0, 5f64.sqrt() - 2.0];
    for a in 0..dim {
        j[a] = 1e-7 * h * irr[a];
    }
    j
}

/// Piecewise-smooth field over regions partitioning the grid. The interface
/// is the frozen boundary mesh of each region (clipped to the grid interior)
/// extracted at scale `epsilon`; its facets carry the jump
/// `(F_in - F_out)·ν` with `ν` the interior normal of the region it bounds.
pub fn make_piecewise(name: &str, grid: &GridSpec, pieces: Vec<Piece>, sup_bound: f64, epsilon: f64) -> Result<DMField> {
    let dim = grid.dim();
    if pieces.is_empty() {
        return Err(Error::Partition("no regions".into()));
    }
    for p in &pieces {
        p.region.validate(dim)?;
    }
    let j = jitter(dim, grid.spacing());
    let region_of = |p: &Point, regions: &[ShapeSpec]| -> Vec<usize> {
        let q = crate::point::add(p, &j);
        (0..regions.len()).filter(|&i| regions[i].contains(&q, dim)).collect()
    };
    let regions: Vec<ShapeSpec> = pieces.iter().map(|p| p.region.clone()).collect();
    for k in 0..grid.len() {
        let c = grid.center_flat(k);
        let hits = region_of(&c, &regions);
        if hits.len() != 1 {
            return Err(Error::Partition(format!(
                "cell center {:?} lies in {} regions",
                &c[..dim],
                hits.len()
            )));
        }
    }

    let h = grid.spacing();
    let margin = 2.0 * epsilon + 2.0 * h;
    let mut lo = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    for a in 0..dim {
        lo[a] = grid.origin()[a] + margin;
        hi[a] = grid.upper()[a] - margin;
    }
    let clip = ShapeSpec::axis_box(&lo, &hi);
    let kernel = MollifierKernel::smooth_bump(epsilon)?;
    let mut facets = Vec::new();
    let mut density = Vec::new();
    for (i, piece) in pieces.iter().enumerate() {
        let clipped = ShapeSpec::intersection(vec![piece.region.clone(), clip.clone()]);
        let chi = rasterize_with_margin(&clipped, grid, 0.0)?;
        if chi.values().iter().all(|&v| v == 0.0) {
            continue;
        }
        let u = mollify(&chi, &kernel)?;
        let mesh = boundary_mesh(&clipped, &u, epsilon)?;
        for f in mesh.facets {
            let outside = crate::point::axpy(&f.midpoint, -h, &f.normal);
            if !clip.contains(&outside, dim) {
                continue;
            }
            let hits = region_of(&outside, &regions);
            let Some(&other) = hits.first() else { continue };
            // Each interface between two regions is kept once, from the
            // region with the smaller index.
            if other <= i {
                continue;
            }
            // Both sides are read at the foot of the midpoint on the exact
            // interface, where each piece extends continuously.
            let inner = crate::point::axpy(&f.midpoint, h, &f.normal);
            let foot = piece.region.boundary_crossing(&inner, &outside, dim, 1e-13).unwrap_or(f.midpoint);
            let jump = dot(&(piece.field)(&foot), &f.normal) - dot(&(pieces[other].field)(&foot), &f.normal);
            density.push(jump);
            facets.push(f);
        }
    }
    let interface = SurfaceMesh::new(dim, facets)?;
    let ac = ScalarGridField::from_fn(grid, |p| {
        let k = region_of(p, &regions)[0];
        (pieces[k].divergence)(p)
    });
    let divergence = SignedMeasure::from_ac(ac).with_surface(interface.clone(), density)?;
    let evals: Vec<Evaluator> = pieces.iter().map(|p| p.field.clone()).collect();
    let regions_eval = regions.clone();
    let evals_eval = evals.clone();
    let evaluator: Evaluator = Arc::new(move |p: &Point| {
        let k = regions_eval.iter().position(|r| r.contains(p, dim)).unwrap_or(0);
        (evals_eval[k])(p)
    });
    let field = DMField {
        name: name.to_string(),
        grid: grid.clone(),
        sup_bound,
        divergence,
        structure: Structure::Piecewise {
            regions,
            pieces: evals,
            interface,
        },
        evaluator,
    };
    field.check_bound(0)?;
    Ok(field)
}

/// Field sampled on a grid; off-lattice values by multilinear
/// interpolation, divergence by centered differences.
pub fn make_sampled(name: &str, samples: VectorGridField) -> Result<DMField> {
    let grid = samples.grid().clone();
    let dim = grid.dim();
    let mut sup: f64 = 0.0;
    for k in 0..grid.len() {
        let v = samples.at(&grid.multi(k));
        sup = sup.max(norm(&v));
    }
    let mut div = ScalarGridField::zeros(&grid);
    for a in 0..dim {
        let comp = samples.component_field(a);
        for k in 0..grid.len() {
            div.values_mut()[k] += comp.gradient_at(&grid.multi(k))[a];
        }
    }
    let s = samples.clone();
    Ok(DMField {
        name: name.to_string(),
        grid,
        sup_bound: sup,
        divergence: SignedMeasure::from_ac(div),
        structure: Structure::Sampled(samples),
        evaluator: Arc::new(move |p: &Point| s.interpolate(p)),
    })
}

impl DMField {
    /// Raw constructor for fields assembled elsewhere in the crate.
    pub(crate) fn composite(
        name: String,
        grid: GridSpec,
        sup_bound: f64,
        divergence: SignedMeasure,
        evaluator: Evaluator,
    ) -> DMField {
        DMField {
            name,
            grid,
            sup_bound,
            divergence,
            structure: Structure::Composite,
            evaluator,
        }
    }

    /// Field value just inside (`inward = true`) or outside a facet with
    /// interior normal `normal`. Piecewise fields are read one cell off the
    /// facet so the side is unambiguous; other fields at the point itself.
    pub fn eval_side(&self, p: &Point, normal: &Point, inward: bool) -> Point {
        match &self.structure {
            Structure::Piecewise { .. } => {
                let s = if inward { 1.0 } else { -1.0 };
                self.eval(&crate::point::axpy(p, s * self.grid.spacing(), normal))
            }
            _ => self.eval(p),
        }
    }

    /// One-sided value `lim F(p + δ·dir)` as `δ → 0⁺`, read at `δ = 1e-6·h`.
    /// For exact surfaces such as lattice faces, where the one-cell offset
    /// of [`eval_side`](Self::eval_side) could cross a nearby interface.
    pub fn eval_toward(&self, p: &Point, dir: &Point) -> Point {
        match &self.structure {
            Structure::Piecewise { .. } => self.eval(&crate::point::axpy(p, 1e-6 * self.grid.spacing(), dir)),
            _ => self.eval(p),
        }
    }
}

#[cfg(test)]
mod tests;
