use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::shape::Bounds;
use super::{GridSpec, MollifierKernel, ScalarGridField, ShapeSpec, VectorGridField};
use crate::error::{Error, Result};

/// Indicator of `shape` sampled at cell centers. The shape must be bounded
/// and keep at least `margin` away from the grid edge.
pub fn rasterize_with_margin(shape: &ShapeSpec, grid: &GridSpec, margin: f64) -> Result<ScalarGridField> {
    let dim = grid.dim();
    shape.validate(dim)?;
    match shape.bounds(dim) {
        Bounds::Unbounded => {
            return Err(Error::Bounds("unbounded shape cannot be rasterized".into()));
        }
        Bounds::Bounded(lo, hi) => {
            let (glo, ghi) = (grid.origin(), grid.upper());
            for a in 0..dim {
                if lo[a] - margin <= glo[a] || hi[a] + margin >= ghi[a] {
                    return Err(Error::Bounds(format!(
                        "shape extent [{}, {}] on axis {a} is within {margin} of the grid edge [{}, {}]",
                        lo[a], hi[a], glo[a], ghi[a]
                    )));
                }
            }
        }
        Bounds::Empty => {}
    }
    Ok(ScalarGridField::from_fn(grid, |p| if shape.contains(p, dim) { 1.0 } else { 0.0 }))
}

pub fn rasterize(shape: &ShapeSpec, grid: &GridSpec) -> Result<ScalarGridField> {
    rasterize_with_margin(shape, grid, 0.0)
}

fn check_resolution(kernel: &MollifierKernel, grid: &GridSpec) -> Result<()> {
    let min = 2.0 * grid.spacing();
    if kernel.epsilon < min * (1.0 - 1e-12) {
        return Err(Error::Resolution {
            epsilon: kernel.epsilon,
            min,
        });
    }
    Ok(())
}

/// `u * ρ_ε` with zero extension outside the grid. The support of `u` must
/// stay a kernel radius away from the edge so no mass leaves the grid.
pub fn mollify(u: &ScalarGridField, kernel: &MollifierKernel) -> Result<ScalarGridField> {
    let grid = u.grid();
    check_resolution(kernel, grid)?;
    let r = kernel.radius_cells(grid.spacing());
    let n = grid.cells();
    for (k, &v) in u.values().iter().enumerate() {
        if v != 0.0 {
            let idx = grid.multi(k);
            if (0..grid.dim()).any(|a| idx[a] < r || idx[a] + r >= n[a]) {
                return Err(Error::Bounds(format!(
                    "field support reaches within the kernel radius ({r} cells) of the grid edge"
                )));
            }
        }
    }
    let (lo, hi) = u.min_max();
    let out = convolve(u, kernel, false);
    Ok(clamp_into(out, grid, lo.min(0.0), hi.max(0.0)))
}

/// `u * ρ_ε` with edge-replicated values outside the grid; no support
/// restriction. Used for weights that do not vanish at the edge.
pub fn mollify_replicate(u: &ScalarGridField, kernel: &MollifierKernel) -> Result<ScalarGridField> {
    check_resolution(kernel, u.grid())?;
    let (lo, hi) = u.min_max();
    let out = convolve(u, kernel, true);
    Ok(clamp_into(out, u.grid(), lo, hi))
}

/// A convex combination stays in the input range; removes FFT round-off
/// outside it and near its ends.
fn clamp_into(mut values: Vec<f64>, grid: &GridSpec, lo: f64, hi: f64) -> ScalarGridField {
    let snap = 1e-13 * (hi - lo).max(f64::MIN_POSITIVE);
    for v in &mut values {
        if *v < lo + snap {
            *v = lo;
        } else if *v > hi - snap {
            *v = hi;
        }
    }
    ScalarGridField::new(grid.clone(), values).expect("convolution output is finite")
}

fn smooth_size(min: usize) -> usize {
    let mut m = min.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn fft_axis(buf: &mut [Complex64], shape: &[usize; 3], axis: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let len = shape[axis];
    if len == 1 {
        return;
    }
    let fft = if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    if axis == 2 {
        fft.process_with_scratch(buf, &mut scratch);
        return;
    }
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::default(); len];
    for o in 0..outer {
        let base = o * len * stride;
        for s in 0..stride {
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = buf[base + i * stride + s];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                buf[base + i * stride + s] = *v;
            }
        }
    }
}

fn convolve(u: &ScalarGridField, kernel: &MollifierKernel, replicate: bool) -> Vec<f64> {
    let grid = u.grid();
    let dim = grid.dim();
    let (r, weights) = kernel.stencil(dim, grid.spacing());
    let n = *grid.cells();
    let mut shape = [1usize; 3];
    for a in 0..dim {
        shape[a] = smooth_size(n[a] + 2 * r);
    }
    let total: usize = shape.iter().product();
    let flat = |i: &[usize; 3]| (i[0] * shape[1] + i[1]) * shape[2] + i[2];

    let mut data = vec![Complex64::default(); total];
    for (k, slot) in data.iter_mut().enumerate() {
        let p = [k / (shape[1] * shape[2]), k / shape[2] % shape[1], k % shape[2]];
        let mut src = [0usize; 3];
        let mut inside = true;
        for a in 0..dim {
            let s = p[a] as isize - r as isize;
            if s < 0 || s >= n[a] as isize {
                inside = false;
                src[a] = s.clamp(0, n[a] as isize - 1) as usize;
            } else {
                src[a] = s as usize;
            }
        }
        if inside || replicate {
            slot.re = u.at(&src);
        }
    }

    let side = 2 * r + 1;
    let mut ker = vec![Complex64::default(); total];
    for (k, &w) in weights.iter().enumerate() {
        let mut rem = k;
        let mut idx = [0usize; 3];
        for slot in idx.iter_mut().take(dim) {
            let off = (rem % side) as isize - r as isize;
            rem /= side;
            *slot = off as usize;
        }
        for a in 0..dim {
            let off = idx[a] as isize;
            idx[a] = off.rem_euclid(shape[a] as isize) as usize;
        }
        ker[flat(&idx)].re += w;
    }

    let mut planner = FftPlanner::new();
    for a in 0..dim {
        fft_axis(&mut data, &shape, a, &mut planner, false);
        fft_axis(&mut ker, &shape, a, &mut planner, false);
    }
    for (d, k) in data.iter_mut().zip(&ker) {
        *d *= *k;
    }
    for a in 0..dim {
        fft_axis(&mut data, &shape, a, &mut planner, true);
    }
    let scale = 1.0 / total as f64;
    (0..grid.len())
        .map(|k| {
            let idx = grid.multi(k);
            let mut p = [0usize; 3];
            for a in 0..dim {
                p[a] = idx[a] + r;
            }
            data[flat(&p)].re * scale
        })
        .collect()
}

/// Centered-difference gradient, one-sided at the grid edge.
pub fn gradient(u: &ScalarGridField) -> VectorGridField {
    let grid = u.grid();
    let mut comps = vec![vec![0.0; grid.len()]; grid.dim()];
    for k in 0..grid.len() {
        let g = u.gradient_at(&grid.multi(k));
        for (a, c) in comps.iter_mut().enumerate() {
            c[k] = g[a];
        }
    }
    VectorGridField::new(grid.clone(), comps).expect("gradient matches grid")
}
