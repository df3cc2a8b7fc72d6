//! Uniform grids and the fields sampled on them.
//!
//! Cells are indexed row-major with axis 0 slowest. Values live at cell
//! centers `origin + (i + 1/2) h`.

mod convolve;
pub mod io;
mod kernel;
mod shape;

pub use convolve::{gradient, mollify, mollify_replicate, rasterize, rasterize_with_margin};
pub use kernel::{KernelKind, MollifierKernel};
pub use shape::{Bounds, ShapeSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Sum;
use crate::point::Point;

pub type Index = [usize; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    origin: Point,
    spacing: f64,
    cells: Index,
}

impl GridSpec {
    pub fn new(dim: usize, origin: &[f64], spacing: f64, cells: &[usize]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("grid dimension {dim} not in 1..=3")));
        }
        if origin.len() != dim || cells.len() != dim {
            return Err(Error::invalid("origin and cell counts must match the grid dimension"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("grid spacing must be positive, got {spacing}")));
        }
        if let Some(n) = cells.iter().find(|&&n| n < 4) {
            return Err(Error::invalid(format!("at least 4 cells per axis required, got {n}")));
        }
        let mut o = [0.0; 3];
        let mut c = [1; 3];
        o[..dim].copy_from_slice(origin);
        c[..dim].copy_from_slice(cells);
        Ok(Self {
            dim,
            origin: o,
            spacing,
            cells: c,
        })
    }

    /// The cube `[lo, hi]^dim` split into cells of width `h` (rounded to a
    /// whole number of cells).
    pub fn cube(dim: usize, lo: f64, hi: f64, h: f64) -> Result<Self> {
        let n = ((hi - lo) / h).round() as usize;
        Self::new(dim, &vec![lo; dim], h, &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> &Point {
        &self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cells(&self) -> &Index {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Upper corner of the physical extent.
    pub fn upper(&self) -> Point {
        let mut p = self.origin;
        for a in 0..self.dim {
            p[a] += self.spacing * self.cells[a] as f64;
        }
        p
    }

    pub fn volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    #[inline]
    pub fn flat(&self, idx: &Index) -> usize {
        (idx[0] * self.cells[1] + idx[1]) * self.cells[2] + idx[2]
    }

    #[inline]
    pub fn multi(&self, flat: usize) -> Index {
        let i2 = flat % self.cells[2];
        let r = flat / self.cells[2];
        [r / self.cells[1], r % self.cells[1], i2]
    }

    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => self.cells[1] * self.cells[2],
            1 => self.cells[2],
            _ => 1,
        }
    }

    #[inline]
    pub fn center(&self, idx: &Index) -> Point {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.origin[a] + (idx[a] as f64 + 0.5) * self.spacing;
        }
        p
    }

    pub fn center_flat(&self, flat: usize) -> Point {
        self.center(&self.multi(flat))
    }

    /// Cell containing `p`, if inside the extent.
    pub fn locate(&self, p: &Point) -> Option<Index> {
        let mut idx = [0; 3];
        for a in 0..self.dim {
            let s = (p[a] - self.origin[a]) / self.spacing;
            if !(s >= 0.0 && s < self.cells[a] as f64) {
                return None;
            }
            idx[a] = s as usize;
        }
        Some(idx)
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.locate(p).is_some()
    }

    /// Iterator over all multi-indices in flat order.
    pub fn indices(&self) -> impl Iterator<Item = Index> + '_ {
        (0..self.len()).map(move |f| self.multi(f))
    }

    /// Neighbor of `idx` offset by `delta` cells along `axis`, if it exists.
    pub fn offset(&self, idx: &Index, axis: usize, delta: isize) -> Option<Index> {
        let v = idx[axis] as isize + delta;
        if v < 0 || v >= self.cells[axis] as isize {
            return None;
        }
        let mut out = *idx;
        out[axis] = v as usize;
        Some(out)
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self == other
    }
}

/// Scalar values, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGridField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarGridField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "field has {} values, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite field value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.center_flat(k))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, idx: &Index) -> f64 {
        self.values[self.grid.flat(idx)]
    }

    /// `sum(values) * h^N`.
    pub fn integral(&self) -> f64 {
        self.values.iter().copied().collect::<Sum>().value() * self.grid.cell_volume()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Multilinear interpolation between cell centers, clamped at the edges.
    pub fn interpolate(&self, p: &Point) -> f64 {
        interpolate(&self.grid, p, |flat| self.values[flat])
    }

    /// Centered-difference gradient at a cell, one-sided at the edges.
    pub fn gradient_at(&self, idx: &Index) -> Point {
        let g = &self.grid;
        let mut out = [0.0; 3];
        for (a, slot) in out.iter_mut().enumerate().take(g.dim()) {
            let lo = g.offset(idx, a, -1);
            let hi = g.offset(idx, a, 1);
            *slot = match (lo, hi) {
                (Some(l), Some(r)) => (self.at(&r) - self.at(&l)) / (2.0 * g.spacing()),
                (None, Some(r)) => (self.at(&r) - self.at(idx)) / g.spacing(),
                (Some(l), None) => (self.at(idx) - self.at(&l)) / g.spacing(),
                (None, None) => 0.0,
            };
        }
        out
    }

    /// Multilinear interpolation of [`Self::gradient_at`].
    pub fn interpolate_gradient(&self, p: &Point) -> Point {
        let mut out = [0.0; 3];
        let dim = self.grid.dim();
        for_each_stencil(&self.grid, p, |idx, w| {
            let g = self.gradient_at(&idx);
            for a in 0..dim {
                out[a] += w * g[a];
            }
        });
        out
    }

    /// Super-level mask `{u > t}`.
    pub fn above(&self, t: f64) -> Mask {
        Mask {
            grid: self.grid.clone(),
            cells: self.values.iter().map(|&v| v > t).collect(),
        }
    }
}

/// Calls `f(cell, weight)` for the 2^N cell centers surrounding `p`.
fn for_each_stencil(grid: &GridSpec, p: &Point, mut f: impl FnMut(Index, f64)) {
    let dim = grid.dim();
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let n = grid.cells()[a];
        let s = ((p[a] - grid.origin()[a]) / grid.spacing() - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        base[a] = i;
        frac[a] = s - i as f64;
    }
    for corner in 0..(1usize << dim) {
        let mut idx = base;
        let mut w = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                idx[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            f(idx, w);
        }
    }
}

fn interpolate(grid: &GridSpec, p: &Point, value: impl Fn(usize) -> f64) -> f64 {
    let mut acc = 0.0;
    for_each_stencil(grid, p, |idx, w| acc += w * value(grid.flat(&idx)));
    acc
}

/// A vector per cell, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGridField {
    grid: GridSpec,
    components: Vec<Vec<f64>>,
}

impl VectorGridField {
    pub fn new(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::invalid("vector field components do not match the grid"));
        }
        Ok(Self { grid, components })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Point) -> Point) -> Self {
        let mut components = vec![vec![0.0; grid.len()]; grid.dim()];
        for k in 0..grid.len() {
            let v = f(&grid.center_flat(k));
            for (a, comp) in components.iter_mut().enumerate() {
                comp[k] = v[a];
            }
        }
        Self {
            grid: grid.clone(),
            components,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn at(&self, idx: &Index) -> Point {
        let k = self.grid.flat(idx);
        let mut v = [0.0; 3];
        for (a, comp) in self.components.iter().enumerate() {
            v[a] = comp[k];
        }
        v
    }

    pub fn interpolate(&self, p: &Point) -> Point {
        let mut v = [0.0; 3];
        for (a, comp) in self.components.iter().enumerate() {
            v[a] = interpolate(&self.grid, p, |k| comp[k]);
        }
        v
    }

    pub fn magnitude_integral(&self) -> f64 {
        let mut s = Sum::new();
        for k in 0..self.grid.len() {
            let m2: f64 = self.components.iter().map(|c| c[k] * c[k]).sum();
            s.add(m2.sqrt());
        }
        s.value() * self.grid.cell_volume()
    }

    pub fn component_field(&self, axis: usize) -> ScalarGridField {
        ScalarGridField {
            grid: self.grid.clone(),
            values: self.components[axis].clone(),
        }
    }
}

/// Boolean cell set, used for regions such as `A = {u > t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    grid: GridSpec,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(grid: GridSpec, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != grid.len() {
            return Err(Error::invalid("mask size does not match the grid"));
        }
        Ok(Self { grid, cells })
    }

    pub fn full(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            cells: vec![true; grid.len()],
        }
    }

    pub fn empty(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            cells: vec![false; grid.len()],
        }
    }

    pub fn from_shape(shape: &ShapeSpec, grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            cells: (0..grid.len())
                .map(|k| shape.contains(&grid.center_flat(k), grid.dim()))
                .collect(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, idx: &Index) -> bool {
        self.cells[self.grid.flat(idx)]
    }

    /// Membership of the cell containing `p`; points outside the grid are
    /// outside every mask.
    pub fn contains_point(&self, p: &Point) -> bool {
        self.grid.locate(p).is_some_and(|idx| self.get(&idx))
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    fn zip(&self, other: &Mask, op: impl Fn(bool, bool) -> bool) -> Result<Mask> {
        if self.grid != other.grid {
            return Err(Error::invalid("masks live on different grids"));
        }
        Ok(Mask {
            grid: self.grid.clone(),
            cells: self.cells.iter().zip(&other.cells).map(|(&a, &b)| op(a, b)).collect(),
        })
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a || b)
    }

    pub fn xor(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a != b)
    }

    pub fn minus(&self, other: &Mask) -> Result<Mask> {
        self.zip(other, |a, b| a && !b)
    }

    pub fn not(&self) -> Mask {
        Mask {
            grid: self.grid.clone(),
            cells: self.cells.iter().map(|c| !c).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.grid == other.grid && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Cells of `self` whose face neighbors are all in `self`. Cells on the
    /// grid edge count their missing neighbors as outside.
    pub fn erode(&self) -> Mask {
        self.erode_with_edge(false)
    }

    fn erode_with_edge(&self, edge: bool) -> Mask {
        let g = &self.grid;
        let cells = (0..g.len())
            .map(|k| {
                if !self.cells[k] {
                    return false;
                }
                let idx = g.multi(k);
                (0..g.dim()).all(|a| {
                    [-1isize, 1]
                        .iter()
                        .all(|&d| g.offset(&idx, a, d).map_or(edge, |n| self.get(&n)))
                })
            })
            .collect();
        Mask {
            grid: g.clone(),
            cells,
        }
    }

    /// Cells of `self` plus their face neighbors.
    pub fn dilate(&self) -> Mask {
        self.not().erode_with_edge(true).not()
    }

    /// Cells with a face neighbor of different membership: the one-cell
    /// collar on both sides of the discrete boundary.
    pub fn boundary_collar(&self) -> Mask {
        let g = &self.grid;
        let cells = (0..g.len())
            .map(|k| {
                let idx = g.multi(k);
                let me = self.cells[k];
                (0..g.dim()).any(|a| {
                    [-1isize, 1]
                        .iter()
                        .any(|&d| g.offset(&idx, a, d).is_some_and(|n| self.get(&n) != me))
                })
            })
            .collect();
        Mask {
            grid: g.clone(),
            cells,
        }
    }

    pub fn as_field(&self) -> ScalarGridField {
        ScalarGridField {
            grid: self.grid.clone(),
            values: self.cells.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
        }
    }
}
