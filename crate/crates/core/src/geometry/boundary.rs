use std::collections::HashMap;

use crate::error::Result;
use crate::grid::{ScalarGridField, ShapeSpec};
use crate::point::{axpy, cross, dist, dot, lerp, normalize, scale, sub, Point};

use super::extract::extract_level_set;
use super::mesh::{Facet, SurfaceMesh};

type Key = [u64; 3];

fn key(p: &Point) -> Key {
    [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()]
}

/// Moves `p` onto the boundary of `shape` along the line through `p` in the
/// direction of `∇u`, searching `±reach`. Points whose line does not cross
/// the boundary within reach stay put.
fn snap(shape: &ShapeSpec, u: &ScalarGridField, p: &Point, reach: f64) -> Point {
    let dim = u.grid().dim();
    let Some(d) = normalize(&u.interpolate_gradient(p), 1e-300) else {
        return *p;
    };
    let a = axpy(p, -reach, &d);
    let b = axpy(p, reach, &d);
    shape
        .boundary_crossing(&a, &b, dim, 1e-13 * reach.max(1.0))
        .unwrap_or(*p)
}

/// Unit normal of a segment or triangle oriented along `∇u`.
fn oriented(f: &Facet, u: &ScalarGridField, dim: usize) -> Option<Point> {
    let n = f.geometric_normal(dim)?;
    let g = u.interpolate_gradient(&f.midpoint);
    Some(if dot(&n, &g) >= 0.0 { n } else { scale(&n, -1.0) })
}

/// Ordered vertex chains of a segment mesh, joined through shared vertices.
fn chains(mesh: &SurfaceMesh) -> Vec<(Vec<Point>, bool)> {
    let mut at: HashMap<Key, Vec<usize>> = HashMap::new();
    for (i, f) in mesh.facets.iter().enumerate() {
        for v in &f.vertices {
            at.entry(key(v)).or_default().push(i);
        }
    }
    let mut used = vec![false; mesh.len()];
    let mut out = Vec::new();
    for start in 0..mesh.len() {
        if used[start] {
            continue;
        }
        // Walk backwards to an open end, if any, so open chains come out whole.
        let mut first = start;
        let mut tail = mesh.facets[start].vertices[0];
        let mut seen = vec![start];
        loop {
            let next = at[&key(&tail)].iter().copied().find(|&j| j != first && !used[j]);
            match next {
                Some(j) if j != start && !seen.contains(&j) => {
                    let v = &mesh.facets[j].vertices;
                    tail = if key(&v[0]) == key(&tail) { v[1] } else { v[0] };
                    first = j;
                    seen.push(j);
                }
                _ => break,
            }
        }
        let f0 = &mesh.facets[first].vertices;
        let mut pts = if key(&f0[1]) == key(&tail) { vec![f0[1], f0[0]] } else { vec![f0[0], f0[1]] };
        used[first] = true;
        let mut cur = first;
        let closed;
        loop {
            let end = *pts.last().expect("non-empty chain");
            let next = at[&key(&end)].iter().copied().find(|&j| j != cur && !used[j]);
            let Some(j) = next else {
                closed = key(&end) == key(&pts[0]) && pts.len() > 2;
                break;
            };
            used[j] = true;
            let v = &mesh.facets[j].vertices;
            let other = if key(&v[0]) == key(&end) { v[1] } else { v[0] };
            pts.push(other);
            cur = j;
        }
        if closed {
            pts.pop();
        }
        out.push((pts, closed));
    }
    out
}

/// Points at equal arc-length spacing close to `spacing` along a chain.
fn resample(pts: &[Point], closed: bool, spacing: f64) -> Vec<Point> {
    let mut poly = pts.to_vec();
    if closed {
        poly.push(pts[0]);
    }
    let mut cum = vec![0.0];
    for w in poly.windows(2) {
        cum.push(cum[cum.len() - 1] + dist(&w[0], &w[1]));
    }
    let total = cum[cum.len() - 1];
    let min_segments = if closed { 3 } else { 1 };
    let n = ((total / spacing).round() as usize).max(min_segments);
    let count = if closed { n } else { n + 1 };
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let s = total * k as f64 / n as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let frac = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(lerp(&poly[seg], &poly[seg + 1], frac));
    }
    out
}

/// Discrete reduced boundary of `shape`: the 1/2 level set of its
/// mollification `u` with vertices moved onto the exact boundary. Curves are
/// resampled to segments of length about the grid spacing. Normals are the
/// facet normals oriented into the set.
pub fn boundary_mesh(shape: &ShapeSpec, u: &ScalarGridField, epsilon: f64) -> Result<SurfaceMesh> {
    let dim = u.grid().dim();
    let h = u.grid().spacing();
    let reach = 2.0 * epsilon;
    let level = extract_level_set(u, 0.5)?;
    let mut facets = Vec::new();
    match dim {
        1 => {
            for f in &level.facets {
                let p = snap(shape, u, &f.vertices[0], reach);
                facets.push(Facet::new(&[p], f.normal));
            }
        }
        2 => {
            for (pts, closed) in chains(&level) {
                let snapped: Vec<Point> = pts.iter().map(|p| snap(shape, u, p, reach)).collect();
                let even: Vec<Point> = resample(&snapped, closed, h)
                    .iter()
                    .map(|p| snap(shape, u, p, reach))
                    .collect();
                let n = even.len();
                let segs = if closed { n } else { n - 1 };
                for k in 0..segs {
                    let f = Facet::new(&[even[k], even[(k + 1) % n]], [1.0, 0.0, 0.0]);
                    if f.area > 0.0 {
                        if let Some(normal) = oriented(&f, u, dim) {
                            facets.push(Facet { normal, ..f });
                        }
                    }
                }
            }
        }
        _ => {
            let mut moved: HashMap<Key, Point> = HashMap::new();
            for f in &level.facets {
                let vs: Vec<Point> = f
                    .vertices
                    .iter()
                    .map(|v| *moved.entry(key(v)).or_insert_with(|| snap(shape, u, v, reach)))
                    .collect();
                let area = 0.5 * crate::point::norm(&cross(&sub(&vs[1], &vs[0]), &sub(&vs[2], &vs[0])));
                if area > 0.0 {
                    let f = Facet::new(&vs, [1.0, 0.0, 0.0]);
                    if let Some(normal) = oriented(&f, u, dim) {
                        facets.push(Facet { normal, ..f });
                    }
                }
            }
        }
    }
    SurfaceMesh::new(dim, facets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{mollify, rasterize, GridSpec, MollifierKernel};
    use crate::point::norm;
    use std::f64::consts::PI;

    fn setup(shape: &ShapeSpec, dim: usize, h: f64, eps: f64) -> ScalarGridField {
        let g = GridSpec::cube(dim, -2.0, 2.0, h).unwrap();
        mollify(&rasterize(shape, &g).unwrap(), &MollifierKernel::smooth_bump(eps).unwrap()).unwrap()
    }

    #[test]
    fn disk_boundary_is_on_circle() {
        let disk = ShapeSpec::ball(&[0.0, 0.0], 1.0);
        let u = setup(&disk, 2, 1.0 / 64.0, 0.1);
        let m = boundary_mesh(&disk, &u, 0.1).unwrap();
        for f in &m.facets {
            for v in &f.vertices {
                assert!((norm(v) - 1.0).abs() < 1e-9);
            }
            assert!(dot(&f.normal, &f.midpoint) < -0.99);
            assert!(f.area > 0.5 / 64.0 && f.area < 2.0 / 64.0);
        }
        assert!((m.area() / (2.0 * PI) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn square_and_annulus_lengths() {
        let sq = ShapeSpec::axis_box(&[-0.5, -0.5], &[0.5, 0.5]);
        let u = setup(&sq, 2, 1.0 / 64.0, 0.1);
        let m = boundary_mesh(&sq, &u, 0.1).unwrap();
        assert!((m.area() / 4.0 - 1.0).abs() < 0.01, "{}", m.area());
        let ann = ShapeSpec::annulus(&[0.0, 0.0], 0.5, 1.0);
        let u = setup(&ann, 2, 1.0 / 64.0, 0.1);
        let m = boundary_mesh(&ann, &u, 0.1).unwrap();
        assert!((m.area() / (3.0 * PI) - 1.0).abs() < 2e-3, "{}", m.area());
        let inner = m.facets.iter().filter(|f| norm(&f.midpoint) < 0.75);
        assert!(inner.into_iter().all(|f| dot(&f.normal, &f.midpoint) > 0.0));
    }

    #[test]
    fn sphere_boundary_3d() {
        let ball = ShapeSpec::ball(&[0.0, 0.0, 0.0], 1.0);
        let u = setup(&ball, 3, 1.0 / 16.0, 0.25);
        let m = boundary_mesh(&ball, &u, 0.25).unwrap();
        assert!((m.area() / (4.0 * PI) - 1.0).abs() < 0.02, "{}", m.area());
        assert!(m.facets.iter().all(|f| dot(&f.normal, &f.midpoint) < 0.0));
    }
}
