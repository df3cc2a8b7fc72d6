use std::fmt::Write as _;

use arrayvec::ArrayVec;

use crate::error::{Error, Result};
use crate::numerics::Sum;
use crate::point::{cross, dist, lerp, norm, scale, sub, Point};

/// One surface element: a signed point (1D), a segment (2D) or a triangle
/// (3D). `area` is 1 for points.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: ArrayVec<Point, 3>,
    pub normal: Point,
    pub area: f64,
    pub midpoint: Point,
}

impl Facet {
    /// Builds a facet from its vertices, taking area and midpoint from the
    /// geometry and the given unit normal.
    pub fn new(vertices: &[Point], normal: Point) -> Self {
        let vs: ArrayVec<Point, 3> = vertices.iter().copied().collect();
        let (area, midpoint) = match vs.len() {
            1 => (1.0, vs[0]),
            2 => (dist(&vs[0], &vs[1]), lerp(&vs[0], &vs[1], 0.5)),
            _ => {
                let c = cross(&sub(&vs[1], &vs[0]), &sub(&vs[2], &vs[0]));
                let m = scale(
                    &[
                        vs[0][0] + vs[1][0] + vs[2][0],
                        vs[0][1] + vs[1][1] + vs[2][1],
                        vs[0][2] + vs[1][2] + vs[2][2],
                    ],
                    1.0 / 3.0,
                );
                (0.5 * norm(&c), m)
            }
        };
        Facet {
            vertices: vs,
            normal,
            area,
            midpoint,
        }
    }

    /// Unit normal of the facet's own geometry (up to sign), if defined.
    pub fn geometric_normal(&self, dim: usize) -> Option<Point> {
        let v = &self.vertices;
        let raw = match dim {
            1 => return Some(self.normal),
            2 => {
                let d = sub(&v[1], &v[0]);
                [-d[1], d[0], 0.0]
            }
            _ => cross(&sub(&v[1], &v[0]), &sub(&v[2], &v[0])),
        };
        crate::point::normalize(&raw, 1e-300)
    }

    pub fn flipped(&self) -> Facet {
        let mut f = self.clone();
        f.normal = scale(&self.normal, -1.0);
        f
    }
}

/// Oriented discrete surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub dim: usize,
    pub facets: Vec<Facet>,
}

impl SurfaceMesh {
    pub fn new(dim: usize, facets: Vec<Facet>) -> Result<Self> {
        let m = SurfaceMesh { dim, facets };
        m.validate()?;
        Ok(m)
    }

    pub fn empty(dim: usize) -> Self {
        SurfaceMesh {
            dim,
            facets: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, f) in self.facets.iter().enumerate() {
            if f.vertices.len() != self.dim {
                return Err(Error::invalid(format!("facet {i} has {} vertices", f.vertices.len())));
            }
            if (norm(&f.normal) - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("facet {i} normal is not unit")));
            }
            if !(f.area > 0.0 && f.area.is_finite()) {
                return Err(Error::invalid(format!("facet {i} has area {}", f.area)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.facets.iter().map(|f| f.area).collect::<Sum>().value()
    }

    /// Same facets with opposite orientation.
    pub fn reversed(&self) -> SurfaceMesh {
        SurfaceMesh {
            dim: self.dim,
            facets: self.facets.iter().map(Facet::flipped).collect(),
        }
    }

    pub fn subset(&self, keep: impl Fn(&Facet) -> bool) -> SurfaceMesh {
        SurfaceMesh {
            dim: self.dim,
            facets: self.facets.iter().filter(|f| keep(f)).cloned().collect(),
        }
    }

    /// `Σ density_f · area_f`.
    pub fn integrate(&self, density: impl Fn(usize, &Facet) -> f64) -> f64 {
        self.facets
            .iter()
            .enumerate()
            .map(|(i, f)| density(i, f) * f.area)
            .collect::<Sum>()
            .value()
    }

    /// OFF export of a triangle mesh (vertices are not shared).
    pub fn to_off(&self) -> String {
        let mut s = String::new();
        let nv: usize = self.facets.iter().map(|f| f.vertices.len()).sum();
        let _ = writeln!(s, "OFF\n{nv} {} 0", self.facets.len());
        for f in &self.facets {
            for v in &f.vertices {
                let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
            }
        }
        let mut k = 0;
        for f in &self.facets {
            let n = f.vertices.len();
            let _ = write!(s, "{n}");
            for j in 0..n {
                let _ = write!(s, " {}", k + j);
            }
            s.push('\n');
            k += n;
        }
        s
    }

    /// CSV with one row per facet: vertex coordinates, normal and area.
    pub fn to_csv(&self) -> String {
        let d = self.dim;
        let axes = ["x", "y", "z"];
        let mut cols = Vec::new();
        for v in 0..d {
            for a in axes.iter().take(d) {
                cols.push(format!("{a}{v}"));
            }
        }
        for a in axes.iter().take(d) {
            cols.push(format!("n{a}"));
        }
        cols.push("area".into());
        let mut s = cols.join(",");
        s.push('\n');
        for f in &self.facets {
            let mut row: Vec<String> = Vec::new();
            for v in &f.vertices {
                row.extend(v[..d].iter().map(|x| x.to_string()));
            }
            row.extend(f.normal[..d].iter().map(|x| x.to_string()));
            row.push(f.area.to_string());
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

pub fn surface_measure(mesh: &SurfaceMesh) -> f64 {
    mesh.area()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn circle(n: usize, r: f64) -> SurfaceMesh {
        let pt = |k: usize| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [r * a.cos(), r * a.sin(), 0.0]
        };
        let facets = (0..n)
            .map(|k| {
                let (a, b) = (pt(k), pt(k + 1));
                let m = lerp(&a, &b, 0.5);
                Facet::new(&[a, b], scale(&m, -1.0 / norm(&m)))
            })
            .collect();
        SurfaceMesh::new(2, facets).unwrap()
    }

    #[test]
    fn circle_and_empty_measure() {
        let m = circle(256, 1.0);
        assert!((surface_measure(&m) / (2.0 * std::f64::consts::PI) - 1.0).abs() < 0.01);
        assert_eq!(surface_measure(&SurfaceMesh::empty(2)), 0.0);
    }

    #[test]
    fn triangle_area_and_exports() {
        let f = Facet::new(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], [0.0, 0.0, 1.0]);
        assert_eq!(f.area, 0.5);
        let m = SurfaceMesh::new(3, vec![f]).unwrap();
        assert!(m.to_off().starts_with("OFF\n3 1 0"));
        let c = circle(4, 1.0).to_csv();
        assert_eq!(c.lines().next().unwrap(), "x0,y0,x1,y1,nx,ny,area");
        assert_eq!(c.lines().count(), 5);
    }

    #[test]
    fn validation() {
        let bad = Facet::new(&[[0.0; 3], [1.0, 0.0, 0.0]], [2.0, 0.0, 0.0]);
        assert!(SurfaceMesh::new(2, vec![bad]).is_err());
    }
}
