use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::DMField;
use crate::grid::{GridSpec, Index};
use crate::numerics::{gauss_legendre, integrate_to};
use crate::point::Point;

/// Coarse cube lattice for slice averaging. Each cube carries `n_slices`
/// evenly spaced sections per axis, the first and last on its faces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    pub grid: GridSpec,
    pub n_slices: usize,
}

/// Section `slice` of cube `cube` normal to `axis`, oriented by `e_axis`
/// (the negative unit vector along `axis`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FaceId {
    pub axis: usize,
    pub cube: usize,
    pub slice: usize,
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "axis {}, cube {}, slice {}", self.axis, self.cube, self.slice)
    }
}

impl Lattice {
    pub fn new(grid: GridSpec, n_slices: usize) -> Result<Self> {
        if n_slices < 8 {
            return Err(Error::invalid(format!("need at least 8 slices per cube, got {n_slices}")));
        }
        Ok(Lattice { grid, n_slices })
    }

    /// Lattice with cubes `factor` cells wide over the same box as `fine`.
    pub fn coarsen(fine: &GridSpec, factor: usize, n_slices: usize) -> Result<Self> {
        let dim = fine.dim();
        let mut cells = Vec::with_capacity(dim);
        for a in 0..dim {
            let n = fine.cells()[a];
            if factor == 0 || n % factor != 0 {
                return Err(Error::invalid(format!("{n} cells along axis {a} are not divisible by {factor}")));
            }
            cells.push(n / factor);
        }
        let grid = GridSpec::new(dim, &fine.origin()[..dim], fine.spacing() * factor as f64, &cells)?;
        Lattice::new(grid, n_slices)
    }

    /// 16x coarser with 8 slices.
    pub fn reference(fine: &GridSpec) -> Result<Self> {
        Lattice::coarsen(fine, 16, 8)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn face_area(&self) -> f64 {
        self.spacing().powi(self.dim() as i32 - 1)
    }

    pub fn cube_volume(&self) -> f64 {
        self.grid.cell_volume()
    }

    pub fn face(&self, axis: usize, cube: usize, slice: usize) -> FaceId {
        FaceId { axis, cube, slice }
    }

    /// The two faces of `cube` normal to `axis`: `(low, high)`.
    pub fn bounding_faces(&self, axis: usize, cube: usize) -> (FaceId, FaceId) {
        (self.face(axis, cube, 0), self.face(axis, cube, self.n_slices - 1))
    }

    pub fn check(&self, face: &FaceId) -> Result<()> {
        if face.axis >= self.dim() || face.cube >= self.grid.len() || face.slice >= self.n_slices {
            return Err(Error::UnknownFace(face.to_string()));
        }
        Ok(())
    }

    /// Position of the section along its axis.
    pub fn tau(&self, face: &FaceId) -> f64 {
        let idx = self.grid.multi(face.cube);
        let a = self.grid.origin()[face.axis] + idx[face.axis] as f64 * self.spacing();
        a + self.spacing() * face.slice as f64 / (self.n_slices - 1) as f64
    }

    /// Lower corner of the cube.
    pub fn corner(&self, cube: usize) -> Point {
        let idx = self.grid.multi(cube);
        let mut p = *self.grid.origin();
        for a in 0..self.dim() {
            p[a] += idx[a] as f64 * self.spacing();
        }
        p
    }

    /// The same surface seen from the neighbouring cube, if any: the top
    /// face of `c` is the bottom face of `c + e`.
    pub fn alias(&self, face: &FaceId) -> Option<FaceId> {
        let idx = self.grid.multi(face.cube);
        if face.slice == self.n_slices - 1 {
            let n = self.grid.offset(&idx, face.axis, 1)?;
            Some(self.face(face.axis, self.grid.flat(&n), 0))
        } else if face.slice == 0 {
            let n = self.grid.offset(&idx, face.axis, -1)?;
            Some(self.face(face.axis, self.grid.flat(&n), self.n_slices - 1))
        } else {
            None
        }
    }

    /// Representative of a face: bottom faces win over top faces.
    pub fn canonical(&self, face: &FaceId) -> FaceId {
        match self.alias(face) {
            Some(a) if face.slice == self.n_slices - 1 => a,
            _ => *face,
        }
    }

    pub fn faces(&self) -> impl Iterator<Item = FaceId> + '_ {
        (0..self.dim()).flat_map(move |axis| {
            (0..self.grid.len()).flat_map(move |cube| (0..self.n_slices).map(move |slice| FaceId { axis, cube, slice }))
        })
    }

    /// The lattice face holding a flat facet, given its midpoint, normal
    /// axis and the facet's vertices.
    pub(crate) fn locate_facet(&self, mid: &Point, vertices: &[Point], axis: usize) -> Option<FaceId> {
        let dim = self.dim();
        let hh = self.spacing();
        let tol = 1e-9 * hh;
        let mut idx: Index = [0; 3];
        for a in 0..dim {
            let s = (mid[a] - self.grid.origin()[a]) / hh;
            let n = self.grid.cells()[a];
            if s < -1e-9 || s > n as f64 + 1e-9 {
                return None;
            }
            idx[a] = (s.floor().max(0.0) as usize).min(n - 1);
        }
        let frac = (mid[axis] - self.grid.origin()[axis]) / hh - idx[axis] as f64;
        let pos = frac * (self.n_slices - 1) as f64;
        let slice = pos.round();
        if (pos - slice).abs() > 1e-6 {
            return None;
        }
        let face = self.face(axis, self.grid.flat(&idx), slice as usize);
        let lo = self.corner(face.cube);
        for v in vertices {
            for a in (0..dim).filter(|&a| a != axis) {
                if v[a] < lo[a] - tol || v[a] > lo[a] + hh + tol {
                    return None;
                }
            }
        }
        Some(self.canonical(&face))
    }

    /// `∫ g` over the section, `g` taking a point on it.
    fn integrate_face(&self, face: &FaceId, g: impl Fn(&Point) -> f64, scale: f64) -> f64 {
        let dim = self.dim();
        let hh = self.spacing();
        let lo = self.corner(face.cube);
        let mut p = lo;
        p[face.axis] = self.tau(face);
        let others: Vec<usize> = (0..dim).filter(|&a| a != face.axis).collect();
        match others.len() {
            0 => g(&p),
            1 => {
                let b = others[0];
                // Tolerance relative to the bound; the floor on the
                // subinterval keeps oscillatory singularities affordable.
                integrate_to(
                    |x| {
                        let mut q = p;
                        q[b] = x;
                        g(&q)
                    },
                    lo[b],
                    lo[b] + hh,
                    1e-10 * scale * hh,
                    1e-7 * hh,
                )
            }
            _ => {
                let (b, c) = (others[0], others[1]);
                let (x, w) = gauss_legendre(8);
                let panels = 4;
                let ph = hh / panels as f64;
                let mut s = 0.0;
                for i in 0..panels {
                    for j in 0..panels {
                        for (xi, wi) in x.iter().zip(&w) {
                            for (xj, wj) in x.iter().zip(&w) {
                                let mut q = p;
                                q[b] = lo[b] + ph * (i as f64 + 0.5 * (xi + 1.0));
                                q[c] = lo[c] + ph * (j as f64 + 0.5 * (xj + 1.0));
                                s += wi * wj * g(&q);
                            }
                        }
                    }
                }
                s * 0.25 * ph * ph
            }
        }
    }

    /// `𝔉` of a section for the flux induced by `f`: `−∫ F·ν` with
    /// `ν = e_axis`, or `ν = −e_axis` when `reversed`. Piecewise fields take
    /// their limit from the side `ν` points into.
    pub fn field_face_flux(&self, f: &DMField, face: &FaceId, reversed: bool) -> f64 {
        let mut nu = [0.0; 3];
        nu[face.axis] = if reversed { 1.0 } else { -1.0 };
        let ax = face.axis;
        let v = self.integrate_face(face, |p| f.eval_toward(p, &nu)[ax], f.sup_bound().max(1e-300));
        if reversed {
            -v
        } else {
            v
        }
    }
}

/// Face table flux with singular surfaces. Values are `𝔉` of sections
/// oriented by `e_axis`; on a listed shock face with jump density `J`,
/// `𝔉(−S) = −𝔉(S) + J·H^{N−1}(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFlux {
    pub lattice: Lattice,
    values: BTreeMap<FaceId, f64>,
    shocks: BTreeMap<FaceId, f64>,
}

impl SyntheticFlux {
    pub fn new(lattice: Lattice) -> Self {
        SyntheticFlux {
            lattice,
            values: BTreeMap::new(),
            shocks: BTreeMap::new(),
        }
    }

    /// Table of every section of the lattice for the flux of `f`.
    pub fn from_field(f: &DMField, lattice: &Lattice) -> Self {
        let mut out = SyntheticFlux::new(lattice.clone());
        for face in lattice.faces() {
            let v = lattice.field_face_flux(f, &face, false);
            out.values.insert(face, v);
        }
        out
    }

    pub fn set(&mut self, face: FaceId, value: f64) -> Result<()> {
        self.lattice.check(&face)?;
        self.values.insert(face, value);
        Ok(())
    }

    /// Marks a lattice face as singular with jump density `jump`.
    pub fn set_shock(&mut self, face: FaceId, jump: f64) -> Result<()> {
        self.lattice.check(&face)?;
        if face.slice != 0 && face.slice != self.lattice.n_slices - 1 {
            return Err(Error::invalid(format!("shock face {face} is not a lattice face")));
        }
        self.shocks.insert(self.lattice.canonical(&face), jump);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&FaceId, &f64)> {
        self.values.iter()
    }

    pub fn shocks(&self) -> impl Iterator<Item = (&FaceId, &f64)> {
        self.shocks.iter()
    }

    /// Table value, looked up under either name of a shared face.
    pub fn value(&self, face: &FaceId) -> Result<f64> {
        if let Some(v) = self.values.get(face) {
            return Ok(*v);
        }
        self.lattice
            .alias(face)
            .and_then(|a| self.values.get(&a).copied())
            .ok_or_else(|| Error::UnknownFace(face.to_string()))
    }

    pub fn jump(&self, face: &FaceId) -> f64 {
        if face.slice != 0 && face.slice != self.lattice.n_slices - 1 {
            return 0.0;
        }
        self.shocks.get(&self.lattice.canonical(face)).copied().unwrap_or(0.0)
    }

    pub fn is_shock(&self, face: &FaceId) -> bool {
        self.jump(face) != 0.0
    }

    pub fn face_flux(&self, face: &FaceId, reversed: bool) -> Result<f64> {
        let v = self.value(face)?;
        Ok(if reversed {
            -v + self.jump(face) * self.lattice.face_area()
        } else {
            v
        })
    }

    /// CSV with a `[faces]` section of `axis,cube,slice,value` rows and a
    /// `[shocks]` section of `axis,cube,slice,jump` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("[faces]\naxis,cube,slice,value\n");
        for (f, v) in &self.values {
            s.push_str(&format!("{},{},{},{}\n", f.axis, f.cube, f.slice, v));
        }
        s.push_str("[shocks]\naxis,cube,slice,jump\n");
        for (f, j) in &self.shocks {
            s.push_str(&format!("{},{},{},{}\n", f.axis, f.cube, f.slice, j));
        }
        s
    }

    pub fn parse(text: &str, lattice: Lattice) -> Result<Self> {
        let mut out = SyntheticFlux::new(lattice);
        let mut section = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("axis") {
                continue;
            }
            if line == "[faces]" || line == "[shocks]" {
                section = Some(line == "[shocks]");
                continue;
            }
            let bad = || Error::Config {
                location: format!("flux table line {}", n + 1),
                message: format!("expected axis,cube,slice,value but found '{line}'"),
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let face = FaceId {
                axis: int(cols[0])?,
                cube: int(cols[1])?,
                slice: int(cols[2])?,
            };
            let v: f64 = cols[3].parse().map_err(|_| bad())?;
            match section {
                Some(false) => out.set(face, v)?,
                Some(true) => out.set_shock(face, v)?,
                None => return Err(bad()),
            }
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path, lattice: Lattice) -> Result<Self> {
        SyntheticFlux::parse(&std::fs::read_to_string(path)?, lattice)
    }
}
