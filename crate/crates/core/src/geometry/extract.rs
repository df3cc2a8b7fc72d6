use crate::error::{Error, Result};
use crate::grid::{gradient, Index, Mask, ScalarGridField, VectorGridField};
use crate::point::{normalize, scale, sub, Point};

use super::mesh::{Facet, SurfaceMesh};

/// Gradients below this magnitude fall back to the facet geometry for the
/// orientation.
const TINY_GRADIENT: f64 = 1e-10;

/// Super-level set `A = {u > t}` at one mollification scale.
#[derive(Debug, Clone)]
pub struct Approximant {
    pub epsilon: f64,
    pub t: f64,
    pub mesh: SurfaceMesh,
    pub region: Mask,
}

impl Approximant {
    pub fn new(u: &ScalarGridField, epsilon: f64, t: f64) -> Result<Self> {
        let t = regularize_level(u, t);
        Ok(Approximant {
            epsilon,
            t,
            mesh: extract_level_set(u, t)?,
            region: u.above(t),
        })
    }
}

/// Shifts `t` off the sampled values so every crossing is strict.
fn regularize_level(u: &ScalarGridField, mut t: f64) -> f64 {
    let bump = 1e-12 * u.grid().spacing();
    for _ in 0..64 {
        if !u.values().contains(&t) {
            break;
        }
        t += bump;
    }
    t
}

struct Extractor<'a> {
    u: &'a ScalarGridField,
    grad: VectorGridField,
    t: f64,
    dim: usize,
    facets: Vec<Facet>,
}

impl Extractor<'_> {
    fn value(&self, idx: &Index) -> f64 {
        self.u.at(idx)
    }

    /// Crossing on the edge between two nodes, always interpolated from the
    /// node with the smaller flat index so shared vertices coincide exactly.
    fn crossing(&self, a: &Index, b: &Index) -> Point {
        let g = self.u.grid();
        let (lo, hi) = if g.flat(a) < g.flat(b) { (a, b) } else { (b, a) };
        let (vl, vh) = (self.value(lo), self.value(hi));
        let s = (self.t - vl) / (vh - vl);
        let (pl, ph) = (g.center(lo), g.center(hi));
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = pl[k] + s * (ph[k] - pl[k]);
        }
        p
    }

    /// Multilinear interpolation of node gradients inside the dual cell with
    /// lower corner `base`.
    fn gradient_in_cell(&self, base: &Index, p: &Point) -> Point {
        let g = self.u.grid();
        let c = g.center(base);
        let mut frac = [0.0; 3];
        for a in 0..self.dim {
            frac[a] = ((p[a] - c[a]) / g.spacing()).clamp(0.0, 1.0);
        }
        let mut out = [0.0; 3];
        for corner in 0..(1usize << self.dim) {
            let mut idx = *base;
            let mut w = 1.0;
            for a in 0..self.dim {
                if corner >> a & 1 == 1 {
                    idx[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            let gv = self.grad.at(&idx);
            for a in 0..self.dim {
                out[a] += w * gv[a];
            }
        }
        out
    }

    /// Adds a facet oriented toward `{u > t}`; `inside` lists nodes of the
    /// containing cell above the level for the geometric fallback.
    fn push(&mut self, base: &Index, vertices: &[Point], inside: &[Index]) {
        let f = Facet::new(vertices, [1.0, 0.0, 0.0]);
        if !(f.area > 0.0) {
            return;
        }
        let grad = self.gradient_in_cell(base, &f.midpoint);
        let normal = match normalize(&grad, TINY_GRADIENT) {
            Some(n) => n,
            None => {
                let Some(n) = f.geometric_normal(self.dim) else { return };
                let g = self.u.grid();
                let toward: f64 = inside
                    .iter()
                    .map(|idx| crate::point::dot(&sub(&g.center(idx), &f.midpoint), &n))
                    .sum();
                if toward >= 0.0 {
                    n
                } else {
                    scale(&n, -1.0)
                }
            }
        };
        self.facets.push(Facet { normal, ..f });
    }

    fn run_1d(&mut self) {
        let n = self.u.grid().cells()[0];
        for i in 0..n - 1 {
            let (a, b) = ([i, 0, 0], [i + 1, 0, 0]);
            let (va, vb) = (self.value(&a), self.value(&b));
            if (va > self.t) != (vb > self.t) {
                let p = self.crossing(&a, &b);
                let dir = if vb > va { 1.0 } else { -1.0 };
                self.facets.push(Facet::new(&[p], [dir, 0.0, 0.0]));
            }
        }
    }

    fn run_2d(&mut self) {
        let n = *self.u.grid().cells();
        for i in 0..n[0] - 1 {
            for j in 0..n[1] - 1 {
                let c = [[i, j, 0], [i + 1, j, 0], [i + 1, j + 1, 0], [i, j + 1, 0]];
                let v = c.map(|idx| self.value(&idx));
                let case = (0..4).fold(0, |acc, k| acc | ((v[k] > self.t) as usize) << k);
                if case == 0 || case == 15 {
                    continue;
                }
                let edge = |e: usize| (c[e], c[(e + 1) % 4]);
                let pairs: Vec<(usize, usize)> = match case {
                    5 | 10 => {
                        let center_in = v.iter().sum::<f64>() / 4.0 > self.t;
                        // Cut off the corners that are not connected through
                        // the cell center.
                        let cut_even = (case == 5) != center_in;
                        if cut_even {
                            vec![(3, 0), (1, 2)]
                        } else {
                            vec![(0, 1), (2, 3)]
                        }
                    }
                    _ => {
                        let es: Vec<usize> = (0..4)
                            .filter(|&e| (v[e] > self.t) != (v[(e + 1) % 4] > self.t))
                            .collect();
                        vec![(es[0], es[1])]
                    }
                };
                let inside: Vec<Index> = (0..4).filter(|&k| v[k] > self.t).map(|k| c[k]).collect();
                for (e1, e2) in pairs {
                    let (a1, b1) = edge(e1);
                    let (a2, b2) = edge(e2);
                    let p = [self.crossing(&a1, &b1), self.crossing(&a2, &b2)];
                    self.push(&c[0], &p, &inside);
                }
            }
        }
    }

    fn run_3d(&mut self) {
        const TETS: [[usize; 4]; 6] = [
            [0, 1, 3, 7],
            [0, 3, 2, 7],
            [0, 2, 6, 7],
            [0, 6, 4, 7],
            [0, 4, 5, 7],
            [0, 5, 1, 7],
        ];
        let n = *self.u.grid().cells();
        for i in 0..n[0] - 1 {
            for j in 0..n[1] - 1 {
                for k in 0..n[2] - 1 {
                    let c: [Index; 8] = std::array::from_fn(|b| [i + (b & 1), j + (b >> 1 & 1), k + (b >> 2 & 1)]);
                    let v = c.map(|idx| self.value(&idx));
                    let above = v.map(|x| x > self.t);
                    if above.iter().all(|&a| a) || above.iter().all(|&a| !a) {
                        continue;
                    }
                    for tet in TETS {
                        let ins: Vec<usize> = tet.iter().copied().filter(|&q| above[q]).collect();
                        let outs: Vec<usize> = tet.iter().copied().filter(|&q| !above[q]).collect();
                        let inside: Vec<Index> = ins.iter().map(|&q| c[q]).collect();
                        let x = |a: usize, b: usize| self.crossing(&c[a], &c[b]);
                        match ins.len() {
                            1 => {
                                let p = [x(ins[0], outs[0]), x(ins[0], outs[1]), x(ins[0], outs[2])];
                                self.push(&c[0], &p, &inside);
                            }
                            3 => {
                                let p = [x(outs[0], ins[0]), x(outs[0], ins[1]), x(outs[0], ins[2])];
                                self.push(&c[0], &p, &inside);
                            }
                            2 => {
                                let q = [
                                    x(ins[0], outs[0]),
                                    x(ins[0], outs[1]),
                                    x(ins[1], outs[1]),
                                    x(ins[1], outs[0]),
                                ];
                                self.push(&c[0], &[q[0], q[1], q[2]], &inside);
                                self.push(&c[0], &[q[0], q[2], q[3]], &inside);
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
}

/// Discrete level set `{u = t}` with normals pointing into `{u > t}`.
pub fn extract_level_set(u: &ScalarGridField, t: f64) -> Result<SurfaceMesh> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::invalid(format!("level {t} not in (0, 1)")));
    }
    let t = regularize_level(u, t);
    let dim = u.grid().dim();
    let mut ex = Extractor {
        u,
        grad: gradient(u),
        t,
        dim,
        facets: Vec::new(),
    };
    match dim {
        1 => ex.run_1d(),
        2 => ex.run_2d(),
        _ => ex.run_3d(),
    }
    if ex.facets.is_empty() {
        return Err(Error::DegenerateLevel { level: t });
    }
    Ok(SurfaceMesh {
        dim,
        facets: ex.facets,
    })
}
