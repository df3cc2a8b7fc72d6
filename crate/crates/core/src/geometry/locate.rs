use std::collections::HashMap;

use crate::point::{closest_on_segment, closest_on_triangle, dist, Point};

use super::mesh::{Facet, SurfaceMesh};

/// Bucket grid over facet bounding boxes for nearest-facet queries.
#[derive(Debug, Clone)]
pub struct FacetLocator<'a> {
    mesh: &'a SurfaceMesh,
    size: f64,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

fn closest_on_facet(p: &Point, f: &Facet) -> Point {
    let v = &f.vertices;
    match v.len() {
        1 => v[0],
        2 => closest_on_segment(p, &v[0], &v[1]),
        _ => closest_on_triangle(p, &v[0], &v[1], &v[2]),
    }

}

impl<'a> FacetLocator<'a> {
    pub fn new(mesh: &'a SurfaceMesh, bucket_size: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let d = mesh.dim;
        for (i, f) in mesh.facets.iter().enumerate() {
            let mut lo = [0i64; 3];
            let mut hi = [0i64; 3];
            for a in 0..d {
                let (mn, mx) = f
                    .vertices
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v[a]), h.max(v[a])));
                lo[a] = (mn / bucket_size).floor() as i64;
                hi[a] = (mx / bucket_size).floor() as i64;
            }
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        buckets.entry([x, y, z]).or_default().push(i);
                    }
                }
            }
        }
        FacetLocator {
            mesh,
            size: bucket_size,
            buckets,
        }
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        self.mesh
    }

    /// Nearest facet to `p` within distance `cap`, with the distance.
    pub fn nearest(&self, p: &Point, cap: f64) -> Option<(usize, f64)> {
        let d = self.mesh.dim;
        let mut home = [0i64; 3];
        for a in 0..d {
            home[a] = (p[a] / self.size).floor() as i64;
        }
        let max_ring = (cap / self.size).ceil() as i64 + 1;
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            // Every point in ring `ring` is at least (ring - 1) buckets away.
            if let Some((_, bd)) = best {
                if (ring - 1) as f64 * self.size > bd {
                    break;
                }
            }
            let span = |a: usize| if a < d { -ring..=ring } else { 0..=0 };
            for x in span(0) {
                for y in span(1) {
                    for z in span(2) {
                        if x.abs().max(y.abs()).max(z.abs()) != ring {
                            continue;
                        }
                        let key = [home[0] + x, home[1] + y, home[2] + z];
                        let Some(list) = self.buckets.get(&key) else { continue };
                        for &i in list {
                            let q = closest_on_facet(p, &self.mesh.facets[i]);
                            let dd = dist(p, &q);
                            let better = match best {
                                None => true,
                                Some((bi, bd)) => dd < bd || (dd == bd && i < bi),
                            };
                            if dd <= cap && better {
                                best = Some((i, dd));
                            }
                        }
                    }
                }
            }
        }
        best
    }

}

/// Bucket grid over facet midpoints for nearest-midpoint queries.
#[derive(Debug, Clone)]
pub struct MidpointLocator {
    dim: usize,
    size: f64,
    mids: Vec<Point>,
    buckets: HashMap<[i64; 3], Vec<usize>>,
}

impl MidpointLocator {
    pub fn new(mesh: &SurfaceMesh, bucket_size: f64) -> Self {
        let mids: Vec<Point> = mesh.facets.iter().map(|f| f.midpoint).collect();
        let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, m) in mids.iter().enumerate() {
            buckets.entry(Self::key(m, bucket_size, mesh.dim)).or_default().push(i);
        }
        MidpointLocator {
            dim: mesh.dim,
            size: bucket_size,
            mids,
            buckets,
        }
    }

    fn key(p: &Point, size: f64, dim: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        for a in 0..dim {
            k[a] = (p[a] / size).floor() as i64;
        }
        k
    }

    /// Facet whose midpoint is nearest to `p`, if within `cap`; ties go to
    /// the lower index.
    pub fn nearest(&self, p: &Point, cap: f64) -> Option<(usize, f64)> {
        let d = self.dim;
        let home = Self::key(p, self.size, d);
        let max_ring = (cap / self.size).ceil() as i64 + 1;
        let mut best: Option<(usize, f64)> = None;
        for ring in 0..=max_ring {
            if let Some((_, bd)) = best {
                if (ring - 1) as f64 * self.size > bd {
                    break;
                }
            }
            let span = |a: usize| if a < d { -ring..=ring } else { 0..=0 };
            for x in span(0) {
                for y in span(1) {
                    for z in span(2) {
                        if x.abs().max(y.abs()).max(z.abs()) != ring {
                            continue;
                        }
                        let Some(list) = self.buckets.get(&[home[0] + x, home[1] + y, home[2] + z]) else {
                            continue;
                        };
                        for &i in list {
                            let dd = dist(p, &self.mids[i]);
                            let better = match best {
                                None => true,
                                Some((bi, bd)) => dd < bd || (dd == bd && i < bi),
                            };
                            if dd <= cap && better {
                                best = Some((i, dd));
                            }
                        }
                    }
                }
            }
        }
        best
    }

}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let n = 200;
        let pt = |k: usize| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [a.cos(), a.sin(), 0.0]
        };
        let facets = (0..n).map(|k| Facet::new(&[pt(k), pt(k + 1)], [1.0, 0.0, 0.0])).collect();
        let mesh = SurfaceMesh { dim: 2, facets };
        let loc = FacetLocator::new(&mesh, 0.05);
        for k in 0..97 {
            let a = k as f64 * 0.37;
            let r = 0.8 + 0.004 * k as f64;
            let p = [r * a.cos(), r * a.sin(), 0.0];
            let brute = mesh
                .facets
                .iter()
                .enumerate()
                .map(|(i, f)| (i, dist(&p, &closest_on_facet(&p, f))))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            match loc.nearest(&p, 0.3) {
                Some((_, d)) => assert!((d - brute.1).abs() < 1e-15),
                None => assert!(brute.1 > 0.3),
            }
        }
    }


    #[test]
    fn midpoints_match_brute_force() {
        let n = 150;
        let pt = |k: usize| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [a.cos(), 0.5 * a.sin(), 0.0]
        };
        let facets = (0..n).map(|k| Facet::new(&[pt(k), pt(k + 1)], [1.0, 0.0, 0.0])).collect();
        let mesh = SurfaceMesh { dim: 2, facets };
        let loc = MidpointLocator::new(&mesh, 0.07);
        for k in 0..131 {
            let a = k as f64 * 0.53;
            let r = 0.5 + 0.006 * k as f64;
            let p = [r * a.cos(), r * a.sin(), 0.0];
            let brute = mesh
                .facets
                .iter()
                .enumerate()
                .map(|(i, f)| (i, dist(&p, &f.midpoint)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            match loc.nearest(&p, 0.25) {
                Some((i, d)) => {
                    assert_eq!(i, brute.0);
                    assert_eq!(d, brute.1);
                }
                None => assert!(brute.1 > 0.25),
            }
        }
    }
}
