//! Signed Radon measures stored as an absolutely continuous density on the
//! grid, densities on surface meshes, and point atoms.

mod table;

pub use table::{ConvergenceTable, Row};

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::SurfaceMesh;
use crate::grid::{mollify, GridSpec, Mask, MollifierKernel, ScalarGridField};
use crate::numerics::Sum;
use crate::point::{to_vec, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePart {
    pub mesh: SurfaceMesh,
    /// Per-facet density with respect to facet area.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedMeasure {
    grid: GridSpec,
    ac: Option<ScalarGridField>,
    surfaces: Vec<SurfacePart>,
    atoms: Vec<Atom>,
}

/// Membership of `p` in `region`; a point on a face between a member and a
/// non-member cell counts as inside.
pub fn region_contains(region: &Mask, p: &Point) -> bool {
    let g = region.grid();
    let mut idx = [0usize; 3];
    let mut on_face = [false; 3];
    for a in 0..g.dim() {
        let s = (p[a] - g.origin()[a]) / g.spacing();
        if !(s >= 0.0 && s <= g.cells()[a] as f64) {
            return false;
        }
        let i = (s.floor() as usize).min(g.cells()[a] - 1);
        idx[a] = i;
        on_face[a] = s == s.floor() && s > 0.0 && (s as usize) < g.cells()[a];
    }
    if region.get(&idx) {
        return true;
    }
    (0..g.dim()).any(|a| on_face[a] && g.offset(&idx, a, -1).is_some_and(|n| region.get(&n)))
}

impl SignedMeasure {
    pub fn zero(grid: &GridSpec) -> Self {
        SignedMeasure {
            grid: grid.clone(),
            ac: None,
            surfaces: Vec::new(),
            atoms: Vec::new(),
        }
    }

    /// Lebesgue measure on the grid.
    pub fn lebesgue(grid: &GridSpec) -> Self {
        Self::from_ac(ScalarGridField::from_fn(grid, |_| 1.0))
    }

    pub fn from_ac(density: ScalarGridField) -> Self {
        SignedMeasure {
            grid: density.grid().clone(),
            ac: Some(density),
            surfaces: Vec::new(),
            atoms: Vec::new(),
        }
    }

    pub fn with_surface(mut self, mesh: SurfaceMesh, density: Vec<f64>) -> Result<Self> {
        self.add_surface(mesh, density)?;
        Ok(self)
    }

    pub fn add_surface(&mut self, mesh: SurfaceMesh, density: Vec<f64>) -> Result<()> {
        if density.len() != mesh.len() {
            return Err(Error::invalid("surface density length differs from facet count"));
        }
        if density.iter().any(|d| !d.is_finite()) {
            return Err(Error::invalid("non-finite surface density"));
        }
        mesh.validate()?;
        self.surfaces.push(SurfacePart { mesh, density });
        Ok(())
    }

    pub fn with_atom(mut self, point: Point, weight: f64) -> Self {
        self.atoms.push(Atom { point, weight });
        self
    }

    pub fn add_ac(&mut self, density: &ScalarGridField) -> Result<()> {
        if density.grid() != &self.grid {
            return Err(Error::invalid("AC density lives on a different grid"));
        }
        match &mut self.ac {
            Some(a) => {
                for (x, y) in a.values_mut().iter_mut().zip(density.values()) {
                    *x += y;
                }
            }
            None => self.ac = Some(density.clone()),
        }
        Ok(())
    }

    /// Sum of two measures on the same grid.
    pub fn plus(&self, other: &SignedMeasure) -> Result<SignedMeasure> {
        let mut out = self.clone();
        if let Some(a) = &other.ac {
            out.add_ac(a)?;
        }
        out.surfaces.extend(other.surfaces.iter().cloned());
        out.atoms.extend(other.atoms.iter().copied());
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> SignedMeasure {
        let mut out = self.clone();
        if let Some(a) = &mut out.ac {
            a.values_mut().iter_mut().for_each(|v| *v *= s);
        }
        for p in &mut out.surfaces {
            p.density.iter_mut().for_each(|v| *v *= s);
        }
        for a in &mut out.atoms {
            a.weight *= s;
        }
        out
    }

    /// The variation measure `‖μ‖`.
    pub fn abs(&self) -> SignedMeasure {
        let mut out = self.clone();
        if let Some(a) = &mut out.ac {
            a.values_mut().iter_mut().for_each(|v| *v = v.abs());
        }
        for p in &mut out.surfaces {
            p.density.iter_mut().for_each(|v| *v = v.abs());
        }
        for a in &mut out.atoms {
            a.weight = a.weight.abs();
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.ac.as_ref().is_none_or(|a| a.values().iter().all(|&v| v >= 0.0))
            && self.surfaces.iter().all(|p| p.density.iter().all(|&v| v >= 0.0))
            && self.atoms.iter().all(|a| a.weight >= 0.0)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ac(&self) -> Option<&ScalarGridField> {
        self.ac.as_ref()
    }

    pub fn surfaces(&self) -> &[SurfacePart] {
        &self.surfaces
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.iter().any(|a| a.weight != 0.0)
    }

    /// Only the surface parts and atoms.
    pub fn singular_part(&self) -> SignedMeasure {
        SignedMeasure {
            ac: None,
            ..self.clone()
        }
    }

    /// Only the AC part.
    pub fn ac_part(&self) -> SignedMeasure {
        SignedMeasure {
            grid: self.grid.clone(),
            ac: self.ac.clone(),
            surfaces: Vec::new(),
            atoms: Vec::new(),
        }
    }

    fn check_region(&self, region: &Mask) -> Result<()> {
        if region.grid() != &self.grid {
            return Err(Error::invalid("region mask lives on a different grid"));
        }
        Ok(())
    }

    fn accumulate(
        &self,
        cell: impl Fn(usize) -> bool,
        point: impl Fn(&Point) -> bool,
        f: impl Fn(f64) -> f64,
    ) -> f64 {
        let mut s = Sum::new();
        if let Some(ac) = &self.ac {
            let vol = self.grid.cell_volume();
            for (k, &v) in ac.values().iter().enumerate() {
                if v != 0.0 && cell(k) {
                    s.add(f(v) * vol);
                }
            }
        }
        for part in &self.surfaces {
            for (facet, &d) in part.mesh.facets.iter().zip(&part.density) {
                if point(&facet.midpoint) {
                    s.add(f(d) * facet.area);
                }
            }
        }
        for a in &self.atoms {
            if point(&a.point) {
                s.add(f(a.weight));
            }
        }
        s.value()
    }

    /// `‖μ‖(region)`.
    pub fn tv(&self, region: &Mask) -> Result<f64> {
        self.check_region(region)?;
        Ok(self.accumulate(|k| region.cells()[k], |p| region_contains(region, p), f64::abs))
    }

    pub fn tv_total(&self) -> f64 {
        self.accumulate(|_| true, |_| true, f64::abs)
    }

    /// `μ(region)`; atoms within one cell of the region boundary make the
    /// value ill-defined at grid resolution.
    pub fn eval(&self, region: &Mask) -> Result<f64> {
        self.check_region(region)?;
        let g = &self.grid;
        for a in &self.atoms {
            if let Some(idx) = g.locate(&a.point) {
                let me = region.get(&idx);
                let mut near_edge = false;
                for off in 0..3usize.pow(g.dim() as u32) {
                    let mut rem = off;
                    let mut n = Some(idx);
                    for ax in 0..g.dim() {
                        let d = (rem % 3) as isize - 1;
                        rem /= 3;
                        n = n.and_then(|c| g.offset(&c, ax, d));
                    }
                    if n.is_some_and(|c| region.get(&c) != me) {
                        near_edge = true;
                    }
                }
                if near_edge {
                    return Err(Error::AtomOnBoundary {
                        point: to_vec(&a.point, g.dim()),
                    });
                }
            }
        }
        Ok(self.accumulate(|k| region.cells()[k], |p| region_contains(region, p), |v| v))
    }

    pub fn eval_total(&self) -> f64 {
        self.accumulate(|_| true, |_| true, |v| v)
    }

    /// `μ` restricted to points accepted by `inside` (AC cells by center).
    pub fn eval_where(&self, inside: impl Fn(&Point) -> bool) -> f64 {
        self.accumulate(|k| inside(&self.grid.center_flat(k)), &inside, |v| v)
    }

    pub fn tv_where(&self, inside: impl Fn(&Point) -> bool) -> f64 {
        self.accumulate(|k| inside(&self.grid.center_flat(k)), &inside, f64::abs)
    }

    /// `∫ φ dμ` with midpoint quadrature on every part.
    pub fn integrate(&self, phi: impl Fn(&Point) -> f64) -> f64 {
        let mut s = Sum::new();
        if let Some(ac) = &self.ac {
            let vol = self.grid.cell_volume();
            for (k, &v) in ac.values().iter().enumerate() {
                if v != 0.0 {
                    s.add(v * phi(&self.grid.center_flat(k)) * vol);
                }
            }
        }
        for part in &self.surfaces {
            for (facet, &d) in part.mesh.facets.iter().zip(&part.density) {
                s.add(d * phi(&facet.midpoint) * facet.area);
            }
        }
        for a in &self.atoms {
            s.add(a.weight * phi(&a.point));
        }
        s.value()
    }

    /// The measure with every part restricted to `inside`.
    pub fn restricted(&self, inside: impl Fn(&Point) -> bool) -> SignedMeasure {
        let ac = self.ac.as_ref().map(|a| {
            let mut f = a.clone();
            for (k, v) in f.values_mut().iter_mut().enumerate() {
                if !inside(&self.grid.center_flat(k)) {
                    *v = 0.0;
                }
            }
            f
        });
        let surfaces = self
            .surfaces
            .iter()
            .map(|p| {
                let keep: Vec<usize> = (0..p.mesh.len()).filter(|&i| inside(&p.mesh.facets[i].midpoint)).collect();
                SurfacePart {
                    mesh: SurfaceMesh {
                        dim: p.mesh.dim,
                        facets: keep.iter().map(|&i| p.mesh.facets[i].clone()).collect(),
                    },
                    density: keep.iter().map(|&i| p.density[i]).collect(),
                }
            })
            .collect();
        SignedMeasure {
            grid: self.grid.clone(),
            ac,
            surfaces,
            atoms: self.atoms.iter().copied().filter(|a| inside(&a.point)).collect(),
        }
    }

    /// JSON description; the AC density is referenced by `ac_ref` (for
    /// example a binary file stem) rather than inlined.
    pub fn to_json(&self, ac_ref: Option<&str>) -> serde_json::Value {
        let d = self.grid.dim();
        let surfaces: Vec<_> = self
            .surfaces
            .iter()
            .map(|p| {
                let facets: Vec<_> = p
                    .mesh
                    .facets
                    .iter()
                    .zip(&p.density)
                    .map(|(f, &den)| {
                        json!({
                            "midpoint": to_vec(&f.midpoint, d),
                            "normal": to_vec(&f.normal, d),
                            "area": f.area,
                            "density": den,
                        })
                    })
                    .collect();
                json!({ "facets": facets })
            })
            .collect();
        let atoms: Vec<_> = self
            .atoms
            .iter()
            .map(|a| json!({ "point": to_vec(&a.point, d), "weight": a.weight }))
            .collect();
        json!({ "ac": ac_ref, "surfaces": surfaces, "atoms": atoms })
    }
}

/// `‖μ‖(A Δ B)`.
pub fn symdiff_measure(mu: &SignedMeasure, a: &Mask, b: &Mask) -> Result<f64> {
    mu.tv(&a.xor(b)?)
}

/// Density of `ρ_ε * μ` on the grid. Surface and atomic mass is deposited in
/// the containing cell before smoothing.
pub fn mollify_measure(mu: &SignedMeasure, kernel: &MollifierKernel) -> Result<ScalarGridField> {
    let g = mu.grid();
    let mut dens = match mu.ac() {
        Some(a) => a.clone(),
        None => ScalarGridField::zeros(g),
    };
    let vol = g.cell_volume();
    let mut deposit = |p: &Point, mass: f64| -> Result<()> {
        let idx = g
            .locate(p)
            .ok_or_else(|| Error::Bounds(format!("measure mass at {p:?} outside the grid")))?;
        dens.values_mut()[g.flat(&idx)] += mass / vol;
        Ok(())
    };
    for part in mu.surfaces() {
        for (f, &d) in part.mesh.facets.iter().zip(&part.density) {
            deposit(&f.midpoint, d * f.area)?;
        }
    }
    for a in mu.atoms() {
        deposit(&a.point, a.weight)?;
    }
    mollify(&dens, kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Facet;
    use crate::grid::ShapeSpec;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::cube(2, -2.0, 2.0, 1.0 / 128.0).unwrap()
    }

    fn circle(n: usize, r: f64) -> SurfaceMesh {
        let pt = |k: usize| {
            let a = 2.0 * PI * k as f64 / n as f64;
            [r * a.cos(), r * a.sin(), 0.0]
        };
        let facets = (0..n)
            .map(|k| {
                let (a, b) = (pt(k), pt(k + 1));
                let m = crate::point::lerp(&a, &b, 0.5);
                Facet::new(&[a, b], crate::point::scale(&m, -1.0 / crate::point::norm(&m)))
            })
            .collect();
        SurfaceMesh::new(2, facets).unwrap()
    }

    #[test]
    fn lebesgue_on_disk_and_ring() {
        let g = grid();
        let leb = SignedMeasure::lebesgue(&g);
        let disk = Mask::from_shape(&ShapeSpec::ball(&[0.0, 0.0], 1.0), &g);
        assert!((leb.tv(&disk).unwrap() / PI - 1.0).abs() < 0.02);
        let small = Mask::from_shape(&ShapeSpec::ball(&[0.0, 0.0], 0.9), &g);
        let ring = symdiff_measure(&leb, &disk, &small).unwrap();
        assert!((ring / (PI * 0.19) - 1.0).abs() < 0.02);
        assert_eq!(symdiff_measure(&leb, &disk, &disk).unwrap(), 0.0);
        let twice = leb.scaled(2.0);
        assert!((twice.eval(&disk).unwrap() / (2.0 * PI) - 1.0).abs() < 0.02);
    }

    #[test]
    fn atoms_add_in_variation_and_cancel_in_value() {
        let g = grid();
        let mu = SignedMeasure::zero(&g).with_atom([0.1, 0.0, 0.0], 1.0).with_atom([-0.1, 0.0, 0.0], -1.0);
        let disk = Mask::from_shape(&ShapeSpec::ball(&[0.0, 0.0], 1.0), &g);
        assert_eq!(mu.tv(&disk).unwrap(), 2.0);
        assert_eq!(mu.eval(&disk).unwrap(), 0.0);
        let a = SignedMeasure::zero(&g).with_atom([0.0; 3], 2.0 * PI);
        let half = Mask::from_shape(&ShapeSpec::ball(&[0.0, 0.0], 0.5), &g);
        assert_eq!(a.eval(&half).unwrap(), 2.0 * PI);
        let unit = SignedMeasure::zero(&g).with_atom([0.0; 3], 1.0);
        let ann = Mask::from_shape(&ShapeSpec::annulus(&[0.0, 0.0], 0.2, 1.0), &g);
        assert_eq!(symdiff_measure(&unit, &disk, &ann).unwrap(), 1.0);
        let edge = Mask::from_shape(&ShapeSpec::axis_box(&[0.0, -1.0], &[1.0, 1.0]), &g);
        assert!(matches!(unit.eval(&edge), Err(Error::AtomOnBoundary { .. })));
    }

    #[test]
    fn surface_part_variation() {
        let g = grid();
        let m = circle(512, 1.0);
        let n = m.len();
        let mu = SignedMeasure::zero(&g).with_surface(m, vec![-3.0; n]).unwrap();
        assert!((mu.tv(&Mask::full(&g)).unwrap() / (6.0 * PI) - 1.0).abs() < 0.01);
        assert!((mu.eval_total() / (-6.0 * PI) - 1.0).abs() < 0.01);
    }

    #[test]
    fn mollified_measures_keep_mass() {
        let g = grid();
        let k = MollifierKernel::smooth_bump(0.1).unwrap();
        let atom = SignedMeasure::zero(&g).with_atom([0.0; 3], 1.0);
        let d = mollify_measure(&atom, &k).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-8);
        let (_, hi) = d.min_max();
        assert_eq!(d.at(&g.locate(&[0.0; 3]).unwrap()), hi);
        let m = circle(512, 1.0);
        let n = m.len();
        let surf = SignedMeasure::zero(&g).with_surface(m, vec![1.0; n]).unwrap();
        let ds = mollify_measure(&surf, &k).unwrap();
        assert!((ds.integral() / (2.0 * PI) - 1.0).abs() < 0.01);
        assert!((ds.integral() - surf.eval_total()).abs() < 1e-8 * surf.eval_total());
        let chi = crate::grid::rasterize(&ShapeSpec::ball(&[0.0, 0.0], 1.0), &g).unwrap();
        let ac = SignedMeasure::from_ac(chi.clone());
        assert!((mollify_measure(&ac, &k).unwrap().integral() - chi.integral()).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn tv_is_additive_over_disjoint_regions(
            cx in -0.5f64..0.5, cy in -0.5f64..0.5, r in 0.2f64..1.0, split in -1.0f64..1.0,
            w in -3.0f64..3.0,
        ) {
            let g = GridSpec::cube(2, -2.0, 2.0, 1.0 / 32.0).unwrap();
            let chi = ScalarGridField::from_fn(&g, |p| (p[0] * w).sin() + p[1]);
            let mu = SignedMeasure::from_ac(chi).with_atom([0.3, 0.2, 0.0], w);
            let disk = Mask::from_shape(&ShapeSpec::ball(&[cx, cy], r), &g);
            let left = Mask::from_shape(&ShapeSpec::half_space(&[1.0, 0.0], split), &g);
            let a = disk.and(&left).unwrap();
            let b = disk.minus(&left).unwrap();
            let whole = mu.tv(&disk).unwrap();
            let parts = mu.tv(&a).unwrap() + mu.tv(&b).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-10 * whole.max(1.0));
            prop_assert!(mu.tv(&a).unwrap() >= 0.0);
        }
    }
}
