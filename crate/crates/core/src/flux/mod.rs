//! Cauchy fluxes: evaluation on oriented surfaces, the axioms, field
//! reconstruction by slice averaging, production measures, and the flux
//! on both sides of a jump interface.
//!
//! Sections of a lattice cube are oriented by `e_j`, the negative `j`-th
//! unit vector, and every `ν` is an interior normal. With that orientation
//! `𝔉(I_τ) = −∫ F·e_j = ∫ F_j`, so the slice average of the flux is the
//! cube average of `F_j` with a plus sign.

mod axioms;
mod lattice;
mod surface;

pub use axioms::{axiom_checks, axioms_check, AxiomCheck, AxiomReport};
pub use lattice::{FaceId, Lattice, SyntheticFlux};
pub use surface::{Matched, OrientedSurface, SurfaceTraces, ORIENTATION_TOL_DEG};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::DMField;
use crate::geometry::{Facet, MidpointLocator, SurfaceMesh};
use crate::grid::{GridSpec, Index, ScalarGridField, VectorGridField};
use crate::measures::SignedMeasure;
use crate::numerics::Sum;
use crate::point::{closest_on_segment, closest_on_triangle, dist, Point};
use crate::traces::TraceSchedule;

/// Default uniform slack density, per unit volume and unit of `sup|F|`,
/// added to `‖div F‖` for the axiom (ii) bound of a field-induced flux.
pub const DEFAULT_SLACK: f64 = 0.02;

#[derive(Debug, Clone)]
pub enum FluxSource {
    /// `𝔉(S) = −∫_S 𝓕_i·ν` for a divergence-measure field.
    Field(DMField),
    Synthetic(SyntheticFlux),
}

#[derive(Debug, Clone)]
pub struct CauchyFluxSpec {
    pub source: FluxSource,
    /// Nonnegative measure of axiom (ii).
    pub sigma_bound: SignedMeasure,
    /// Constant of axiom (iii).
    pub c_bound: f64,
    /// Schedule for trace-based evaluation of field sources.
    pub schedule: TraceSchedule,
}

impl CauchyFluxSpec {
    pub fn new(source: FluxSource, sigma_bound: SignedMeasure, c_bound: f64) -> Result<Self> {
        if !sigma_bound.is_nonnegative() {
            return Err(Error::invalid("sigma_bound must be a nonnegative measure"));
        }
        if !(c_bound >= 0.0 && c_bound.is_finite()) {
            return Err(Error::invalid(format!("C_bound must be finite and nonnegative, got {c_bound}")));
        }
        Ok(CauchyFluxSpec {
            source,
            sigma_bound,
            c_bound,
            schedule: TraceSchedule::reference(),
        })
    }

    /// The flux of `f` with `σ = ‖div F‖ + slack·sup|F|·L^N` and
    /// `C = sup|F|`.
    pub fn from_field(f: DMField, slack: f64) -> Result<Self> {
        let sigma = f
            .divergence()
            .abs()
            .plus(&SignedMeasure::lebesgue(f.grid()).scaled(slack * f.sup_bound()))?;
        let c = f.sup_bound();
        CauchyFluxSpec::new(FluxSource::Field(f), sigma, c)
    }

    pub fn synthetic(table: SyntheticFlux, sigma_bound: SignedMeasure, c_bound: f64) -> Result<Self> {
        CauchyFluxSpec::new(FluxSource::Synthetic(table), sigma_bound, c_bound)
    }

    pub fn with_schedule(mut self, schedule: TraceSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    /// The table of a synthetic source.
    ///
    /// # Panics
    /// For field sources.
    pub fn source_table(&self) -> &SyntheticFlux {
        match &self.source {
            FluxSource::Synthetic(t) => t,
            FluxSource::Field(_) => panic!("flux source is a field"),
        }
    }

    pub fn sup_scale(&self) -> f64 {
        match &self.source {
            FluxSource::Field(f) => f.sup_bound(),
            FluxSource::Synthetic(_) => self.c_bound,
        }
    }

    fn check_lattice(&self, lattice: &Lattice) -> Result<()> {
        if let FluxSource::Synthetic(t) = &self.source {
            if &t.lattice != lattice {
                return Err(Error::invalid("synthetic table is defined on a different lattice"));
            }
        }
        Ok(())
    }

    /// `𝔉` of a lattice section, oriented by `e_axis` or, when `reversed`,
    /// by its negative.
    pub fn face_flux(&self, lattice: &Lattice, face: &FaceId, reversed: bool) -> Result<f64> {
        lattice.check(face)?;
        match &self.source {
            FluxSource::Field(f) => Ok(lattice.field_face_flux(f, face, reversed)),
            FluxSource::Synthetic(t) => {
                self.check_lattice(lattice)?;
                t.face_flux(face, reversed)
            }
        }
    }
}

/// `𝔉(S)`. Field sources go through the interior trace of the reference
/// set (the exterior trace of its complement); synthetic sources need `S`
/// to be a union of pieces of lattice sections.
pub fn evaluate_flux(flux: &CauchyFluxSpec, s: &OrientedSurface) -> Result<f64> {
    match &flux.source {
        FluxSource::Field(f) => SurfaceTraces::new(f, &s.reference_set, &flux.schedule)?.flux(s),
        FluxSource::Synthetic(t) => synthetic_surface_flux(t, &s.mesh),
    }
}

fn synthetic_surface_flux(t: &SyntheticFlux, mesh: &SurfaceMesh) -> Result<f64> {
    let lat = &t.lattice;
    let area = lat.face_area();
    let mut s = Sum::new();
    for fc in &mesh.facets {
        let (axis, comp) = (0..mesh.dim)
            .map(|a| (a, fc.normal[a]))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .expect("nonempty dimension");
        let unknown = || Error::UnknownFace(format!("facet at {:?}", &fc.midpoint[..mesh.dim]));
        if comp.abs() < 1.0 - 1e-9 {
            return Err(unknown());
        }
        let face = lat.locate_facet(&fc.midpoint, &fc.vertices, axis).ok_or_else(unknown)?;
        let frac = if mesh.dim == 1 { 1.0 } else { fc.area / area };
        s.add(frac * t.face_flux(&face, comp > 0.0)?);
    }
    Ok(s.value())
}

/// Cube averages of `F` from slice fluxes: `f^j(I) = μ^j(I)/|I|` with
/// `μ^j(I) = ∫ 𝔉(I_τ) dτ` by the trapezoid rule over the sections.
pub fn slice_reconstruct(flux: &CauchyFluxSpec, lattice: &Lattice) -> Result<VectorGridField> {
    flux.check_lattice(lattice)?;
    let g = &lattice.grid;
    let n = lattice.n_slices;
    let dtau = lattice.spacing() / (n - 1) as f64;
    let vol = lattice.cube_volume();
    let mut comps = vec![vec![0.0; g.len()]; g.dim()];
    for (axis, comp) in comps.iter_mut().enumerate() {
        for (cube, out) in comp.iter_mut().enumerate() {
            let mut mu = Sum::new();
            for slice in 0..n {
                let w = if slice == 0 || slice == n - 1 { 0.5 } else { 1.0 };
                mu.add(w * flux.face_flux(lattice, &lattice.face(axis, cube, slice), false)?);
            }
            *out = mu.value() * dtau / vol;
        }
    }
    VectorGridField::new(g.clone(), comps)
}

/// `P(I) = 𝔉(∂I)` per cube against the divergence of the reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct BalanceLawReport {
    pub lattice: Lattice,
    #[serde(skip)]
    pub production: SignedMeasure,
    pub per_cube: Vec<f64>,
    /// `div` of the reconstructed field integrated over each cube.
    pub reconstructed: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub max_abs_production: f64,
    pub total: f64,
    pub shock_cubes: Vec<usize>,
}

impl BalanceLawReport {
    pub fn to_csv(&self) -> String {
        let g = &self.lattice.grid;
        let dim = g.dim();
        let mut s = String::new();
        let axes = ["y1", "y2", "y3"];
        s.push_str("cube,");
        for a in axes.iter().take(dim) {
            s.push_str(a);
            s.push(',');
        }
        s.push_str("production,reconstructed,residual,shock\n");
        for k in 0..g.len() {
            let c = g.center_flat(k);
            s.push_str(&format!("{k},"));
            for x in c.iter().take(dim) {
                s.push_str(&format!("{x},"));
            }
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.per_cube[k],
                self.reconstructed[k],
                self.residuals[k],
                u8::from(self.shock_cubes.binary_search(&k).is_ok())
            ));
        }
        s
    }
}

/// `𝔉(∂I)` of one cube with interior orientation: top sections as stored,
/// bottom sections reversed.
pub fn cube_production(flux: &CauchyFluxSpec, lattice: &Lattice, cube: usize) -> Result<f64> {
    let mut s = Sum::new();
    for axis in 0..lattice.dim() {
        let (low, high) = lattice.bounding_faces(axis, cube);
        s.add(flux.face_flux(lattice, &high, false)?);
        s.add(flux.face_flux(lattice, &low, true)?);
    }
    Ok(s.value())
}

/// `𝔉(∂B)` for the block of cubes with multi-indices in `lo..=hi`.
pub fn block_production(flux: &CauchyFluxSpec, lattice: &Lattice, lo: &Index, hi: &Index) -> Result<f64> {
    let g = &lattice.grid;
    let dim = g.dim();
    let inside = |idx: &Index| (0..dim).all(|a| idx[a] >= lo[a] && idx[a] <= hi[a]);
    let mut s = Sum::new();
    for idx in g.indices() {
        if !inside(&idx) {
            continue;
        }
        let cube = g.flat(&idx);
        for axis in 0..dim {
            let (low, high) = lattice.bounding_faces(axis, cube);
            if idx[axis] == hi[axis] {
                s.add(flux.face_flux(lattice, &high, false)?);
            }
            if idx[axis] == lo[axis] {
                s.add(flux.face_flux(lattice, &low, true)?);
            }
        }
    }
    Ok(s.value())
}

/// Production measure of the flux on the lattice and the balance-law
/// residual `|div F_rec(I) − P(I)|`. The reconstructed divergence uses
/// finite differences that do not cross singular faces, plus the jump mass
/// carried inside the cube.
pub fn production_measure(flux: &CauchyFluxSpec, lattice: &Lattice) -> Result<BalanceLawReport> {
    flux.check_lattice(lattice)?;
    let g = &lattice.grid;
    let dim = g.dim();
    let hh = lattice.spacing();
    let vol = lattice.cube_volume();
    let rec = slice_reconstruct(flux, lattice)?;
    let per_cube = (0..g.len())
        .map(|k| cube_production(flux, lattice, k))
        .collect::<Result<Vec<f64>>>()?;

    // Singular structure: which faces block differences, which cubes are
    // shock cubes, and the jump mass inside each cube.
    let mut jump_mass = vec![0.0; g.len()];
    let mut shock = vec![false; g.len()];
    let blocked: Box<dyn Fn(usize, usize, usize) -> bool + '_> = match &flux.source {
        FluxSource::Synthetic(t) => {
            for k in 0..g.len() {
                for axis in 0..dim {
                    let (low, high) = lattice.bounding_faces(axis, k);
                    if t.is_shock(&low) || t.is_shock(&high) {
                        shock[k] = true;
                    }
                    jump_mass[k] += t.jump(&low) * lattice.face_area();
                }
            }
            Box::new(move |axis, c, _| t.is_shock(&lattice.bounding_faces(axis, c).1))
        }
        FluxSource::Field(f) => {
            let sing = f.divergence().singular_part();
            for k in 0..g.len() {
                let lo = lattice.corner(k);
                let in_cube = |p: &Point, slack: f64| (0..dim).all(|a| p[a] > lo[a] - slack && p[a] < lo[a] + hh + slack);
                shock[k] = sing.tv_where(|p| in_cube(p, 1e-9 * hh)) > 0.0;
                if shock[k] {
                    jump_mass[k] = sing.eval_where(|p| in_cube(p, -1e-9 * hh));
                }
            }
            let shock = shock.clone();
            Box::new(move |_, c, d| shock[c] && shock[d])
        }
    };

    let mut reconstructed = vec![0.0; g.len()];
    for (k, out) in reconstructed.iter_mut().enumerate() {
        let idx = g.multi(k);
        let mut s = Sum::new();
        for axis in 0..dim {
            let f = |i: &Index| rec.at(i)[axis];
            let prev = g.offset(&idx, axis, -1).filter(|p| !blocked(axis, g.flat(p), k));
            let next = g.offset(&idx, axis, 1).filter(|n| !blocked(axis, k, g.flat(n)));
            let d = match (prev, next) {
                (Some(p), Some(n)) => (f(&n) - f(&p)) / (2.0 * hh),
                (None, Some(n)) => (f(&n) - f(&idx)) / hh,
                (Some(p), None) => (f(&idx) - f(&p)) / hh,
                (None, None) => 0.0,
            };
            s.add(d * vol);
        }
        if shock[k] {
            s.add(jump_mass[k]);
        }
        *out = s.value();
    }
    let residuals: Vec<f64> = reconstructed.iter().zip(&per_cube).map(|(d, p)| (d - p).abs()).collect();

    let density: Vec<f64> = per_cube.iter().zip(&jump_mass).map(|(p, j)| (p - j) / vol).collect();
    let mut production = SignedMeasure::from_ac(ScalarGridField::new(g.clone(), density)?);
    if let FluxSource::Synthetic(t) = &flux.source {
        let (mesh, dens) = shock_mesh(t);
        if !mesh.is_empty() {
            production.add_surface(mesh, dens)?;
        }
    } else {
        for (k, m) in jump_mass.iter().enumerate() {
            if *m != 0.0 {
                let c = g.center_flat(k);
                production = production.with_atom(c, *m);
            }
        }
    }
    let shock_cubes: Vec<usize> = (0..g.len()).filter(|&k| shock[k]).collect();
    Ok(BalanceLawReport {
        lattice: lattice.clone(),
        production,
        max_residual: residuals.iter().fold(0.0, |m: f64, r| m.max(*r)),
        max_abs_production: per_cube.iter().fold(0.0, |m: f64, p| m.max(p.abs())),
        total: per_cube.iter().copied().collect::<Sum>().value(),
        per_cube,
        reconstructed,
        residuals,
        shock_cubes,
    })
}

/// Shock faces as facets with their jump densities, normals pointing into
/// the cube that receives the jump.
fn shock_mesh(t: &SyntheticFlux) -> (SurfaceMesh, Vec<f64>) {
    let lat = &t.lattice;
    let dim = lat.dim();
    let hh = lat.spacing();
    let mut facets = Vec::new();
    let mut dens = Vec::new();
    for (face, j) in t.shocks() {
        let mut lo = lat.corner(face.cube);
        lo[face.axis] = lat.tau(face);
        let mut normal = [0.0; 3];
        normal[face.axis] = 1.0;
        let others: Vec<usize> = (0..dim).filter(|&a| a != face.axis).collect();
        let at = |offs: &[f64]| {
            let mut p = lo;
            for (a, o) in others.iter().zip(offs) {
                p[*a] += o * hh;
            }
            p
        };
        match others.len() {
            0 => facets.push(Facet::new(&[lo], normal)),
            1 => facets.push(Facet::new(&[at(&[0.0]), at(&[1.0])], normal)),
            _ => {
                facets.push(Facet::new(&[at(&[0.0, 0.0]), at(&[1.0, 0.0]), at(&[1.0, 1.0])], normal));
                facets.push(Facet::new(&[at(&[0.0, 0.0]), at(&[1.0, 1.0]), at(&[0.0, 1.0])], normal));
                dens.push(*j);
            }
        }
        dens.push(*j);
    }
    (SurfaceMesh { dim, facets }, dens)
}

/// Both one-sided fluxes through a piece of a jump interface.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    /// `𝔉(S) = −∫_S 𝓕_i·ν`.
    pub flux: f64,
    /// `𝔉(−S) = ∫_S 𝓕_e·ν`.
    pub flux_reversed: f64,
    pub sum: f64,
    /// Singular part of `div F` on `S`: facets within half a cell of it.
    pub surface_mass: f64,
    /// `|sum + surface_mass|` relative to `|surface_mass|`, or to
    /// `sup|F|·H^{N−1}(S)` when no mass is present.
    pub residual: f64,
    pub area: f64,
}

pub fn exceptional_recovery(f: &DMField, s: &OrientedSurface, schedule: &TraceSchedule) -> Result<RecoveryReport> {
    let st = SurfaceTraces::new(f, &s.reference_set, schedule)?;
    let flux = st.flux(s)?;
    let flux_reversed = st.flux(&s.reversed())?;
    let sum = flux + flux_reversed;
    let h = f.grid().spacing();
    let loc = MidpointLocator::new(&s.mesh, 2.0 * h);
    let on_s = |p: &Point| {
        loc.nearest(p, 2.0 * h)
            .is_some_and(|(k, _)| facet_distance(p, &s.mesh.facets[k]) <= 0.5 * h)
    };
    let surface_mass = f.divergence().singular_part().eval_where(on_s);
    let area = s.area();
    let scale = f.sup_bound() * area;
    let denom = if surface_mass.abs() > 1e-9 * scale { surface_mass.abs() } else { scale.max(f64::MIN_POSITIVE) };
    Ok(RecoveryReport {
        flux,
        flux_reversed,
        sum,
        surface_mass,
        residual: (sum + surface_mass).abs() / denom,
        area,
    })
}

fn facet_distance(p: &Point, fc: &Facet) -> f64 {
    let v = &fc.vertices;
    let q = match v.len() {
        1 => v[0],
        2 => closest_on_segment(p, &v[0], &v[1]),
        _ => closest_on_triangle(p, &v[0], &v[1], &v[2]),
    };
    dist(p, &q)
}

/// The reconstructed field as a sampled field on the fine grid's lattice,
/// for feeding back into [`CauchyFluxSpec::from_field`].
pub fn reconstructed_field(rec: &VectorGridField, name: &str) -> Result<DMField> {
    crate::fields::make_sampled(name, rec.clone())
}

/// `Σ_cells h^N |F − F_rec|` over the fine grid, relative to
/// `sup|F|·|grid|`, skipping cells where `skip` holds.
pub fn reconstruction_l1_error(f: &DMField, rec: &VectorGridField, skip: impl Fn(&Point) -> bool) -> f64 {
    let g: &GridSpec = f.grid();
    let dim = g.dim();
    let lat = rec.grid();
    let mut s = Sum::new();
    let mut vol = Sum::new();
    for k in 0..g.len() {
        let p = g.center_flat(k);
        if skip(&p) {
            continue;
        }
        let Some(idx) = lat.locate(&p) else { continue };
        let (a, b) = (f.eval(&p), rec.at(&idx));
        let d: f64 = (0..dim).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
        s.add(d);
        vol.add(1.0);
    }
    s.value() / (f.sup_bound().max(f64::MIN_POSITIVE) * vol.value())
}

/// `max_faces |𝔉_a(face) − 𝔉_b(face)|` relative to `sup|F_a|·H^{N-1}(face)`.
pub fn face_flux_agreement(a: &CauchyFluxSpec, b: &CauchyFluxSpec, lattice: &Lattice) -> Result<f64> {
    let scale = (a.sup_scale() * lattice.face_area()).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for face in lattice.faces() {
        let d = a.face_flux(lattice, &face, false)? - b.face_flux(lattice, &face, false)?;
        worst = worst.max(d.abs() / scale);
    }
    Ok(worst)
}
