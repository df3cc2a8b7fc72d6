use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{dot, Point};

/// Constructive solid geometry over closed primitives.
///
/// Coordinates are given per axis of the ambient dimension; unused trailing
/// axes are ignored when a shape is evaluated in a lower dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Ball { center: Vec<f64>, radius: f64 },
    AxisBox { lo: Vec<f64>, hi: Vec<f64> },
    /// `{y : normal · y <= offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Box with the given half extents, rotated counterclockwise by `angle`
    /// radians in the (0, 1) coordinate plane about its center.
    RotatedBox { center: Vec<f64>, half_extents: Vec<f64>, angle: f64 },
    Union { parts: Vec<ShapeSpec> },
    Intersection { parts: Vec<ShapeSpec> },
    Complement { inner: Box<ShapeSpec> },
}

/// Axis-aligned extent of a shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bounds {
    Empty,
    Bounded(Point, Point),
    Unbounded,
}

fn pad(v: &[f64]) -> Point {
    let mut p = [0.0; 3];
    for (slot, x) in p.iter_mut().zip(v) {
        *slot = *x;
    }
    p
}

impl ShapeSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        ShapeSpec::Ball { center: center.to_vec(), radius }
    }

    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Self {
        ShapeSpec::AxisBox { lo: lo.to_vec(), hi: hi.to_vec() }
    }

    pub fn half_space(normal: &[f64], offset: f64) -> Self {
        ShapeSpec::HalfSpace { normal: normal.to_vec(), offset }
    }

    pub fn rotated_box(center: &[f64], half_extents: &[f64], angle: f64) -> Self {
        ShapeSpec::RotatedBox {
            center: center.to_vec(),
            half_extents: half_extents.to_vec(),
            angle,
        }
    }

    pub fn union(parts: Vec<ShapeSpec>) -> Self {
        ShapeSpec::Union { parts }
    }

    pub fn intersection(parts: Vec<ShapeSpec>) -> Self {
        ShapeSpec::Intersection { parts }
    }

    pub fn complement(inner: ShapeSpec) -> Self {
        ShapeSpec::Complement { inner: Box::new(inner) }
    }

    pub fn empty() -> Self {
        ShapeSpec::Union { parts: Vec::new() }
    }

    /// Closed annulus `r_in <= |y - c| <= r_out`.
    pub fn annulus(center: &[f64], r_in: f64, r_out: f64) -> Self {
        let hole = ShapeSpec::ball(center, r_in);
        // The complement of a closed ball is open; the boundary circle is a
        // null set so this only matters for exact point queries.
        ShapeSpec::intersection(vec![ShapeSpec::ball(center, r_out), ShapeSpec::complement(hole)])
    }

    /// Checks parameters against dimension `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let need = |v: &[f64], what: &str| -> Result<()> {
            if v.len() < dim || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("{what} needs {dim} finite coordinates")));
            }
            Ok(())
        };
        match self {
            ShapeSpec::Ball { center, radius } => {
                need(center, "ball center")?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
                }
            }
            ShapeSpec::AxisBox { lo, hi } => {
                need(lo, "box lo")?;
                need(hi, "box hi")?;
                if (0..dim).any(|a| lo[a] >= hi[a]) {
                    return Err(Error::invalid("box lo must be below hi on every axis"));
                }
            }
            ShapeSpec::HalfSpace { normal, offset } => {
                need(normal, "halfspace normal")?;
                if normal[..dim].iter().all(|&x| x == 0.0) || !offset.is_finite() {
                    return Err(Error::invalid("halfspace needs a nonzero normal and finite offset"));
                }
            }
            ShapeSpec::RotatedBox { center, half_extents, angle } => {
                need(center, "rotated box center")?;
                need(half_extents, "rotated box half extents")?;
                if half_extents[..dim].iter().any(|&e| e <= 0.0) || !angle.is_finite() {
                    return Err(Error::invalid("rotated box needs positive half extents"));
                }
            }
            ShapeSpec::Union { parts } | ShapeSpec::Intersection { parts } => {
                for p in parts {
                    p.validate(dim)?;
                }
            }
            ShapeSpec::Complement { inner } => inner.validate(dim)?,
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point, dim: usize) -> bool {
        match self {
            ShapeSpec::Ball { center, radius } => {
                let r2: f64 = (0..dim).map(|a| (p[a] - center[a]).powi(2)).sum();
                r2 <= radius * radius
            }
            ShapeSpec::AxisBox { lo, hi } => (0..dim).all(|a| lo[a] <= p[a] && p[a] <= hi[a]),
            ShapeSpec::HalfSpace { normal, offset } => {
                (0..dim).map(|a| normal[a] * p[a]).sum::<f64>() <= *offset
            }
            ShapeSpec::RotatedBox { center, half_extents, angle } => {
                let local = rotate_into(p, center, *angle, dim);
                (0..dim).all(|a| local[a].abs() <= half_extents[a])
            }
            ShapeSpec::Union { parts } => parts.iter().any(|s| s.contains(p, dim)),
            ShapeSpec::Intersection { parts } => parts.iter().all(|s| s.contains(p, dim)),
            ShapeSpec::Complement { inner } => !inner.contains(p, dim),
        }
    }

    pub fn bounds(&self, dim: usize) -> Bounds {
        match self {
            ShapeSpec::Ball { center, radius } => {
                let c = pad(center);
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for a in 0..dim {
                    lo[a] = c[a] - radius;
                    hi[a] = c[a] + radius;
                }
                Bounds::Bounded(lo, hi)
            }
            ShapeSpec::AxisBox { lo, hi } => {
                let (mut l, mut h) = (pad(lo), pad(hi));
                for a in dim..3 {
                    l[a] = 0.0;
                    h[a] = 0.0;
                }
                Bounds::Bounded(l, h)
            }
            ShapeSpec::HalfSpace { .. } | ShapeSpec::Complement { .. } => Bounds::Unbounded,
            ShapeSpec::RotatedBox { center, half_extents, angle } => {
                let c = pad(center);
                let e = pad(half_extents);
                let (s, co) = angle.sin_cos();
                let mut lo = [0.0; 3];
                let mut hi = [0.0; 3];
                for a in 0..dim {
                    let ext = match a {
                        0 if dim >= 2 => co.abs() * e[0] + s.abs() * e[1],
                        1 => s.abs() * e[0] + co.abs() * e[1],
                        _ => e[a],
                    };
                    lo[a] = c[a] - ext;
                    hi[a] = c[a] + ext;
                }
                Bounds::Bounded(lo, hi)
            }
            ShapeSpec::Union { parts } => {
                let mut acc = Bounds::Empty;
                for p in parts {
                    acc = match (acc, p.bounds(dim)) {
                        (Bounds::Unbounded, _) | (_, Bounds::Unbounded) => Bounds::Unbounded,
                        (Bounds::Empty, b) | (b, Bounds::Empty) => b,
                        (Bounds::Bounded(l1, h1), Bounds::Bounded(l2, h2)) => {
                            Bounds::Bounded(combine(l1, l2, f64::min), combine(h1, h2, f64::max))
                        }
                    };
                }
                acc
            }
            ShapeSpec::Intersection { parts } => {
                let mut acc = Bounds::Unbounded;
                for p in parts {
                    acc = match (acc, p.bounds(dim)) {
                        (Bounds::Empty, _) | (_, Bounds::Empty) => Bounds::Empty,
                        (Bounds::Unbounded, b) | (b, Bounds::Unbounded) => b,
                        (Bounds::Bounded(l1, h1), Bounds::Bounded(l2, h2)) => {
                            let lo = combine(l1, l2, f64::max);
                            let hi = combine(h1, h2, f64::min);
                            if (0..dim).any(|a| lo[a] > hi[a]) {
                                Bounds::Empty
                            } else {
                                Bounds::Bounded(lo, hi)
                            }
                        }
                    };
                }
                acc
            }
        }
    }

    /// Outer shape of a complement, used when a reference set is given as
    /// the complement of a bounded set.
    pub fn complement_inner(&self) -> Option<&ShapeSpec> {
        match self {
            ShapeSpec::Complement { inner } => Some(inner),
            _ => None,
        }
    }

    /// Bisection for the boundary crossing on the segment `a -> b`, where
    /// membership differs at the endpoints. Returns a point within `tol`.
    pub fn boundary_crossing(&self, a: &Point, b: &Point, dim: usize, tol: f64) -> Option<Point> {
        let ina = self.contains(a, dim);
        if ina == self.contains(b, dim) {
            return None;
        }
        let (mut lo, mut hi) = (*a, *b);
        let len = crate::point::dist(a, b);
        let mut width = len;
        while width > tol {
            let mid = crate::point::lerp(&lo, &hi, 0.5);
            if self.contains(&mid, dim) == ina {
                lo = mid;
            } else {
                hi = mid;
            }
            width *= 0.5;
        }
        Some(crate::point::lerp(&lo, &hi, 0.5))
    }

    /// Signed distance to the boundary for a half-space only; used by
    /// callers that build flat interfaces.
    pub fn half_space_value(&self, p: &Point) -> Option<f64> {
        match self {
            ShapeSpec::HalfSpace { normal, offset } => Some(dot(&pad(normal), p) - offset),
            _ => None,
        }
    }
}

fn combine(a: Point, b: Point, f: fn(f64, f64) -> f64) -> Point {
    [f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2])]
}

fn rotate_into(p: &Point, center: &[f64], angle: f64, dim: usize) -> Point {
    let c = pad(center);
    let mut d = [0.0; 3];
    for a in 0..dim {
        d[a] = p[a] - c[a];
    }
    if dim >= 2 {
        let (s, co) = angle.sin_cos();
        let (x, y) = (d[0], d[1]);
        d[0] = co * x + s * y;
        d[1] = -s * x + co * y;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csg_membership() {
        let ann = ShapeSpec::annulus(&[0.0, 0.0], 0.5, 1.0);
        assert!(ann.contains(&[0.75, 0.0, 0.0], 2));
        assert!(!ann.contains(&[0.25, 0.0, 0.0], 2));
        assert!(!ann.contains(&[1.25, 0.0, 0.0], 2));
        assert!(!ShapeSpec::empty().contains(&[0.0; 3], 2));
    }

    #[test]
    fn rotated_box_diamond() {
        let d = ShapeSpec::rotated_box(&[0.0, 0.0], &[0.5, 0.5], std::f64::consts::FRAC_PI_4);
        let r = 0.5 * std::f64::consts::SQRT_2;
        assert!(d.contains(&[r - 1e-9, 0.0, 0.0], 2));
        assert!(!d.contains(&[0.5, 0.5, 0.0], 2));
        match d.bounds(2) {
            Bounds::Bounded(lo, hi) => {
                assert!((hi[0] - r).abs() < 1e-12 && (lo[1] + r).abs() < 1e-12)
            }
            b => panic!("unexpected bounds {b:?}"),
        }
    }

    #[test]
    fn bounds_of_combinations() {
        assert_eq!(ShapeSpec::empty().bounds(2), Bounds::Empty);
        let ann = ShapeSpec::annulus(&[0.0, 0.0], 0.5, 1.0);
        assert_eq!(ann.bounds(2), Bounds::Bounded([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]));
        assert_eq!(ShapeSpec::half_space(&[1.0, 0.0], 0.0).bounds(2), Bounds::Unbounded);
    }

    #[test]
    fn serde_tagged_round_trip() {
        let s = ShapeSpec::union(vec![
            ShapeSpec::ball(&[0.0, 0.0], 1.0),
            ShapeSpec::complement(ShapeSpec::axis_box(&[0.0, 0.0], &[1.0, 1.0])),
        ]);
        let text = toml::to_string(&serde_json::json!({ "shape": s })).unwrap();
        let back: std::collections::BTreeMap<String, ShapeSpec> = toml::from_str(&text).unwrap();
        assert_eq!(back["shape"], s);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ShapeSpec::ball(&[0.0, 0.0], -1.0).validate(2).is_err());
        assert!(ShapeSpec::axis_box(&[0.0, 1.0], &[1.0, 0.0]).validate(2).is_err());
        assert!(ShapeSpec::ball(&[0.0], 1.0).validate(2).is_err());
    }
}
