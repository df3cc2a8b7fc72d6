//! Small numerical helpers shared across modules: compensated summation,
//! adaptive quadrature and report rounding.

/// Neumaier-compensated accumulator. Summation order is the caller's
/// iteration order, which keeps reductions reproducible.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for Sum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Sum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<Sum>().value()
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Subdivides until the local error estimate falls below `tol` scaled by
/// the interval fraction, or the interval is shorter than `1e-12 (b - a)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_to(f, a, b, tol, (b - a).abs() * 1e-12)
}

/// [`integrate`] with an explicit smallest subinterval. Oscillatory
/// singularities cost about `1/min_width` evaluations instead of the cap.
pub fn integrate_to<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, min_width: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let width = b - a;
    let mut total = Sum::new();
    let mut stack = vec![(a, b, gk15(&f, a, b))];
    let mut evaluations = 0usize;
    while let Some((lo, hi, (value, err))) = stack.pop() {
        let local_tol = tol * ((hi - lo) / width).abs();
        evaluations += 1;
        if err <= local_tol.max(f64::EPSILON * value.abs()) || (hi - lo).abs() < min_width || evaluations > 2_000_000 {
            total.add(value);
            continue;
        }
        let mid = 0.5 * (lo + hi);
        stack.push((mid, hi, gk15(&f, mid, hi)));
        stack.push((lo, mid, gk15(&f, lo, mid)));
    }
    total.value()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for k in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p2) / (k + 1) as f64;
            }
            dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Rounds to 12 significant digits, the precision used in every report.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = Sum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn gk_integrates_smooth_and_kinked() {
        let v = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
        let v = integrate(|x: f64| x.abs(), -1.0, 2.0, 1e-12);
        assert!((v - 2.5).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(6);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((v - 2.0 / 11.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(std::f64::consts::PI), 3.14159265359);
        assert_eq!(round_sig(-1.0 / 12.0), -0.0833333333333);
    }
}
