//! Fixed-size point arithmetic. Coordinates past the ambient dimension are
//! kept at zero.

pub type Point = [f64; 3];

pub const ORIGIN: Point = [0.0; 3];

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn axpy(a: &Point, s: f64, b: &Point) -> Point {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit vector along `a`, or `None` when `|a|` is below `tiny`.
pub fn normalize(a: &Point, tiny: f64) -> Option<Point> {
    let n = norm(a);
    (n > tiny).then(|| scale(a, 1.0 / n))
}

pub fn lerp(a: &Point, b: &Point, s: f64) -> Point {
    axpy(a, s, &sub(b, a))
}

/// Pads a coordinate slice into a [`Point`].
pub fn from_slice(v: &[f64]) -> Point {
    let mut p = ORIGIN;
    for (dst, src) in p.iter_mut().zip(v) {
        *dst = *src;
    }
    p
}

pub fn to_vec(p: &Point, dim: usize) -> Vec<f64> {
    p[..dim].to_vec()
}

/// Closest point to `p` on the segment `[a, b]`.
pub fn closest_on_segment(p: &Point, a: &Point, b: &Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    if len2 == 0.0 {
        return *a;
    }
    let s = (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0);
    axpy(a, s, &ab)
}

/// Closest point to `p` on the triangle `(a, b, c)` (Ericson, Real-Time
/// Collision Detection, 5.1.5).
pub fn closest_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return axpy(a, d1 / (d1 - d3), &ab);
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return axpy(a, d2 / (d2 - d6), &ac);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return axpy(b, w, &sub(c, b));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(&axpy(a, v, &ab), &scale(&ac, w))
}
