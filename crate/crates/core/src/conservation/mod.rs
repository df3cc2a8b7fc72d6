//! Scalar conservation laws `∂_t u + ∂_x f(u) = 0` in one space dimension:
//! exact Riemann solutions, entropy pairs, the entropy dissipation measure
//! `μ_η = div_(t,x)(η(u), q(u))` and entropy fluxes through space-time
//! surfaces. Space-time points are `(t, x)`.


use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{make_analytic, make_piecewise, DMField, Piece};
use crate::flux::{OrientedSurface, SurfaceTraces};
use crate::geometry::{Facet, SurfaceMesh};
use crate::grid::{GridSpec, ShapeSpec};
use crate::measures::SignedMeasure;
use crate::numerics::integrate;
use crate::point::Point;
use crate::traces::{interior_trace, TraceSchedule};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Largest admissible value of `μ_η(box)` in the Lax check.
pub const LAX_TOL: f64 = 1e-10;
/// Rankine-Hugoniot tolerance for shocks.
pub const RH_TOL: f64 = 1e-12;
/// Spacing of the grids carrying dissipation measures.
pub const DISSIPATION_H: f64 = 1.0 / 256.0;

/// A flux `f` with derivative `f′`.
#[derive(Clone)]
pub struct ScalarLaw {
    pub name: String,
    f: RealFn,
    df: RealFn,
    inverse_speed: Option<RealFn>,
    pub convex: bool,
}

impl fmt::Debug for ScalarLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarLaw")
            .field("name", &self.name)
            .field("convex", &self.convex)
            .finish()
    }
}

impl ScalarLaw {
    pub fn new(
        name: &str,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        convex: bool,
    ) -> Self {
        ScalarLaw {
            name: name.to_string(),
            f: Arc::new(f),
            df: Arc::new(df),
            inverse_speed: None,
            convex,
        }
    }

    /// `f(u) = u²/2`.
    pub fn burgers() -> Self {
        let mut law = Self::new("burgers", |u| 0.5 * u * u, |u| u, true);
        law.inverse_speed = Some(Arc::new(|v| v));
        law
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "burgers" => Ok(Self::burgers()),
            other => Err(Error::invalid(format!("unknown flux '{other}'"))),
        }
    }

    pub fn flux(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn speed(&self, u: f64) -> f64 {
        (self.df)(u)
    }

    /// `f′` must be nondecreasing on `[lo, hi]` for a law declared convex.
    pub fn check_convex(&self, lo: f64, hi: f64) -> Result<()> {
        if !self.convex {
            return Err(Error::NonConvexUnsupported);
        }
        let n = 256;
        let mut prev = self.speed(lo);
        for i in 1..=n {
            let s = self.speed(lo + (hi - lo) * i as f64 / n as f64);
            if s < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(Error::NonConvexUnsupported);
            }
            prev = s;
        }
        Ok(())
    }

    /// `(f′)⁻¹(v)` restricted to `[lo, hi]`.
    pub fn speed_inverse(&self, v: f64, lo: f64, hi: f64) -> f64 {
        if let Some(inv) = &self.inverse_speed {
            return inv(v).clamp(lo, hi);
        }
        if v <= self.speed(lo) {
            return lo;
        }
        if v >= self.speed(hi) {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if self.speed(m) < v {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Wave {
    Constant,
    Shock { speed: f64 },
    /// Fan between the characteristic speeds `f′(u_L)` and `f′(u_R)`.
    Rarefaction { head: f64, tail: f64 },
}

/// A shock curve `x = x0 + s·t` between `u_left` and `u_right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shock {
    pub x0: f64,
    pub speed: f64,
    pub u_left: f64,
    pub u_right: f64,
}

/// Riemann data `(u_L, u_R)` at `x0` and the wave resolving it.
#[derive(Debug, Clone)]
pub struct EntropySolution1D {
    pub law: ScalarLaw,
    pub u_left: f64,
    pub u_right: f64,
    pub x0: f64,
    pub wave: Wave,
}

pub fn solve_riemann(law: &ScalarLaw, u_left: f64, u_right: f64) -> Result<EntropySolution1D> {
    solve_riemann_at(law, u_left, u_right, 0.0)
}

pub fn solve_riemann_at(law: &ScalarLaw, u_left: f64, u_right: f64, x0: f64) -> Result<EntropySolution1D> {
    if !(u_left.is_finite() && u_right.is_finite() && x0.is_finite()) {
        return Err(Error::invalid("Riemann data must be finite"));
    }
    law.check_convex(u_left.min(u_right), u_left.max(u_right))?;
    let wave = if u_left == u_right {
        Wave::Constant
    } else if u_left > u_right {
        Wave::Shock {
            speed: rh_speed(law, u_left, u_right),
        }
    } else {
        Wave::Rarefaction {
            head: law.speed(u_left),
            tail: law.speed(u_right),
        }
    };
    let sol = EntropySolution1D {
        law: law.clone(),
        u_left,
        u_right,
        x0,
        wave,
    };
    sol.validate()?;
    Ok(sol)
}

fn rh_speed(law: &ScalarLaw, ul: f64, ur: f64) -> f64 {
    (law.flux(ur) - law.flux(ul)) / (ur - ul)
}

impl EntropySolution1D {
    /// The jump `(u_L, u_R)` propagated as a shock at the Rankine-Hugoniot
    /// speed whether or not it is admissible.
    pub fn forced_shock(law: &ScalarLaw, u_left: f64, u_right: f64) -> Result<Self> {
        if !(u_left.is_finite() && u_right.is_finite()) || u_left == u_right {
            return Err(Error::invalid("a shock needs two distinct finite states"));
        }
        Ok(EntropySolution1D {
            law: law.clone(),
            u_left,
            u_right,
            x0: 0.0,
            wave: Wave::Shock {
                speed: rh_speed(law, u_left, u_right),
            },
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.u_left.min(self.u_right), self.u_left.max(self.u_right))
    }

    pub fn shock(&self) -> Option<Shock> {
        match self.wave {
            Wave::Shock { speed } => Some(Shock {
                x0: self.x0,
                speed,
                u_left: self.u_left,
                u_right: self.u_right,
            }),
            _ => None,
        }
    }

    /// `|f(u_R) − f(u_L) − s·(u_R − u_L)|`, zero without a shock.
    pub fn rankine_hugoniot_residual(&self) -> f64 {
        match self.shock() {
            Some(sh) => {
                let (ul, ur) = (sh.u_left, sh.u_right);
                (self.law.flux(ur) - self.law.flux(ul) - sh.speed * (ur - ul)).abs()
            }
            None => 0.0,
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.shock().is_none_or(|sh| sh.u_left > sh.u_right)
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.law.flux(self.u_left).abs().max(self.law.flux(self.u_right).abs()).max(1.0);
        if self.rankine_hugoniot_residual() > RH_TOL * scale {
            return Err(Error::invalid("shock violates Rankine-Hugoniot"));
        }
        if !self.is_admissible() {
            return Err(Error::invalid("shock violates the Lax condition u_L > u_R"));
        }
        Ok(())
    }

    /// `u(t, x)`. Shocks continue to `t < 0` along their line; fans start
    /// from the step at `t = 0`.
    pub fn state(&self, t: f64, x: f64) -> f64 {
        let y = x - self.x0;
        match self.wave {
            Wave::Constant => self.u_left,
            Wave::Shock { speed } => {
                if y <= speed * t {
                    self.u_left
                } else {
                    self.u_right
                }
            }
            Wave::Rarefaction { head, tail } => {
                if t <= 0.0 {
                    return if y <= 0.0 { self.u_left } else { self.u_right };
                }
                if y <= head * t {
                    self.u_left
                } else if y >= tail * t {
                    self.u_right
                } else {
                    self.law.speed_inverse(y / t, self.u_left, self.u_right)
                }
            }
        }
    }
}

/// A convex entropy `η` with its first two derivatives.
#[derive(Clone)]
pub struct Entropy {
    pub name: String,
    eta: RealFn,
    deta: RealFn,
    d2eta: RealFn,
}

impl fmt::Debug for Entropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Entropy({})", self.name)
    }
}

impl Entropy {
    pub fn new(
        name: &str,
        eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deta: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2eta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Entropy {
            name: name.to_string(),
            eta: Arc::new(eta),
            deta: Arc::new(deta),
            d2eta: Arc::new(d2eta),
        }
    }

    /// `u²/2`.
    pub fn quadratic() -> Self {
        Self::new("quadratic", |u| 0.5 * u * u, |u| u, |_| 1.0)
    }

    /// `±u`; the entropy pair is the conservation law itself.
    pub fn linear(sign: f64) -> Self {
        let name = if sign >= 0.0 { "linear" } else { "negative_linear" };
        Self::new(name, move |u| sign * u, move |_| sign, |_| 0.0)
    }

    /// `(u − k)²`, a smooth stand-in for Kruzkov's `|u − k|`.
    pub fn kruzkov(k: f64) -> Self {
        Self::new(&format!("kruzkov({k})"), move |u| (u - k).powi(2), move |u| 2.0 * (u - k), |_| 2.0)
    }

    /// `√((u − k)² + δ²)`.
    pub fn smooth_abs(k: f64, delta: f64) -> Self {
        let d2 = delta * delta;
        Self::new(
            &format!("smooth_abs({k},{delta})"),
            move |u| ((u - k).powi(2) + d2).sqrt(),
            move |u| (u - k) / ((u - k).powi(2) + d2).sqrt(),
            move |u| d2 / ((u - k).powi(2) + d2).powf(1.5),
        )
    }

    /// `u⁴/4`.
    pub fn quartic() -> Self {
        Self::new("quartic", |u| 0.25 * u.powi(4), |u| u.powi(3), |u| 3.0 * u * u)
    }

    pub fn exponential() -> Self {
        Self::new("exponential", f64::exp, f64::exp, f64::exp)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "quadratic" => Ok(Self::quadratic()),
            "linear" => Ok(Self::linear(1.0)),
            "negative_linear" => Ok(Self::linear(-1.0)),
            "quartic" => Ok(Self::quartic()),
            "exponential" => Ok(Self::exponential()),
            "kruzkov" => Ok(Self::kruzkov(0.5)),
            "smooth_abs" => Ok(Self::smooth_abs(0.5, 0.1)),
            other => Err(Error::invalid(format!("unknown entropy '{other}'"))),
        }
    }

    pub fn eta(&self, u: f64) -> f64 {
        (self.eta)(u)
    }

    pub fn deta(&self, u: f64) -> f64 {
        (self.deta)(u)
    }

    pub fn convex_on(&self, lo: f64, hi: f64) -> bool {
        (0..=256).all(|i| (self.d2eta)(lo + (hi - lo) * i as f64 / 256.0) >= -1e-12)
    }
}

/// Convex entropies used for Lax certification.
pub fn standard_entropies() -> Vec<Entropy> {
    vec![
        Entropy::quadratic(),
        Entropy::kruzkov(0.3),
        Entropy::smooth_abs(0.5, 0.1),
        Entropy::quartic(),
        Entropy::exponential(),
    ]
}

/// `(η, q)` with `q′ = η′f′` and `q(anchor) = 0`.
#[derive(Debug, Clone)]
pub struct EntropyPair {
    pub law: ScalarLaw,
    pub entropy: Entropy,
    pub anchor: f64,
}

pub fn make_entropy_pair(law: &ScalarLaw, entropy: Entropy) -> EntropyPair {
    EntropyPair {
        law: law.clone(),
        entropy,
        anchor: 0.0,
    }
}

impl EntropyPair {
    pub fn with_anchor(mut self, anchor: f64) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn name(&self) -> &str {
        &self.entropy.name
    }

    pub fn eta(&self, u: f64) -> f64 {
        self.entropy.eta(u)
    }

    fn q_prime(&self, u: f64) -> f64 {
        self.entropy.deta(u) * self.law.speed(u)
    }

    pub fn q(&self, u: f64) -> f64 {
        self.q_between(self.anchor, u)
    }

    fn q_between(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        integrate(|v| self.q_prime(v), a, b, 1e-14)
    }

    /// `max |q′(u) − η′(u)f′(u)|` over `n + 1` lattice points in `[lo, hi]`,
    /// with `q′` from Richardson-extrapolated centered differences of `q`.
    pub fn compatibility_residual(&self, lo: f64, hi: f64, n: usize) -> f64 {
        let d = 2e-4 * (hi - lo).abs().max(1.0);
        let diff = |u: f64, h: f64| self.q_between(u - h, u + h) / (2.0 * h);
        (0..=n)
            .map(|i| {
                let u = lo + (hi - lo) * i as f64 / n.max(1) as f64;
                let dq = (4.0 * diff(u, 0.5 * d) - diff(u, d)) / 3.0;
                (dq - self.q_prime(u)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_convex_on(&self, lo: f64, hi: f64) -> bool {
        self.entropy.convex_on(lo, hi)
    }
}

/// Closed box `[t0, t1] × [x0, x1]` in space-time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceTimeBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
}

impl SpaceTimeBox {
    pub fn new(t0: f64, t1: f64, x0: f64, x1: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && x0.is_finite() && x1.is_finite() && t0 < t1 && x0 < x1) {
            return Err(Error::invalid(format!("degenerate space-time box [{t0}, {t1}] x [{x0}, {x1}]")));
        }
        Ok(SpaceTimeBox { t: (t0, t1), x: (x0, x1) })
    }

    pub fn shape(&self) -> ShapeSpec {
        ShapeSpec::axis_box(&[self.t.0, self.x.0], &[self.t.1, self.x.1])
    }

    /// Grid covering the box at spacing `h`.
    pub fn grid(&self, h: f64) -> Result<GridSpec> {
        let nt = ((self.t.1 - self.t.0) / h).ceil().max(1.0) as usize;
        let nx = ((self.x.1 - self.x.0) / h).ceil().max(1.0) as usize;
        GridSpec::new(2, &[self.t.0, self.x.0], h, &[nt, nx])
    }
}

impl fmt::Display for SpaceTimeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] x [{}, {}]", self.t.0, self.t.1, self.x.0, self.x.1)
    }
}

/// `[q] − s[η]` per unit time along the shock, zero without one.
pub fn dissipation_rate(sol: &EntropySolution1D, pair: &EntropyPair) -> f64 {
    match sol.shock() {
        Some(sh) => {
            let (ul, ur) = (sh.u_left, sh.u_right);
            pair.q_between(ul, ur) - sh.speed * (pair.eta(ur) - pair.eta(ul))
        }
        None => 0.0,
    }
}

/// Density of `μ_η` per unit length of the shock line, whose normal is
/// `(−s, 1)/√(1+s²)`.
pub fn shock_density(sol: &EntropySolution1D, pair: &EntropyPair) -> Option<f64> {
    sol.shock().map(|sh| dissipation_rate(sol, pair) / (1.0 + sh.speed * sh.speed).sqrt())
}

/// Time interval in which the shock lies inside the box, restricted to
/// `t ≥ 0`.
pub fn shock_window(sol: &EntropySolution1D, bx: &SpaceTimeBox) -> Option<(f64, f64)> {
    let sh = sol.shock()?;
    let (mut a, mut b) = (bx.t.0.max(0.0), bx.t.1);
    if sh.speed == 0.0 {
        if sh.x0 < bx.x.0 || sh.x0 > bx.x.1 {
            return None;
        }
    } else {
        let ta = (bx.x.0 - sh.x0) / sh.speed;
        let tb = (bx.x.1 - sh.x0) / sh.speed;
        a = a.max(ta.min(tb));
        b = b.min(ta.max(tb));
    }
    (b > a).then_some((a, b))
}

/// `μ_η(box)` in closed form.
pub fn dissipation_total(sol: &EntropySolution1D, pair: &EntropyPair, bx: &SpaceTimeBox) -> f64 {
    shock_window(sol, bx).map_or(0.0, |(a, b)| dissipation_rate(sol, pair) * (b - a))
}

/// `μ_η` restricted to the box: no AC part for exact solutions, and a
/// constant density on the part of each shock line inside the box.
pub fn entropy_dissipation(sol: &EntropySolution1D, pair: &EntropyPair, bx: &SpaceTimeBox) -> Result<SignedMeasure> {
    let grid = bx.grid(DISSIPATION_H)?;
    let mut mu = SignedMeasure::zero(&grid);
    if let (Some(sh), Some((a, b))) = (sol.shock(), shock_window(sol, bx)) {
        let s = sh.speed;
        let r = (1.0 + s * s).sqrt();
        let normal = [-s / r, 1.0 / r, 0.0];
        let n = (((b - a) * r) / DISSIPATION_H).ceil().max(1.0) as usize;
        let at = |i: usize| -> Point {
            let t = a + (b - a) * i as f64 / n as f64;
            [t, sh.x0 + s * t, 0.0]
        };
        let facets: Vec<Facet> = (0..n).map(|i| Facet::new(&[at(i), at(i + 1)], normal)).collect();
        let density = vec![shock_density(sol, pair).unwrap_or(0.0); n];
        mu.add_surface(SurfaceMesh::new(2, facets)?, density)?;
    }
    Ok(mu)
}

#[derive(Debug, Clone, Serialize)]
pub struct LaxValue {
    pub entropy: String,
    pub region: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaxReport {
    pub values: Vec<LaxValue>,
    pub max_value: f64,
    pub worst: Option<LaxValue>,
    pub pass: bool,
}

/// `μ_η(box)` for every pair and box. Entropies must be convex on the
/// solution's state range.
pub fn lax_values(sol: &EntropySolution1D, pairs: &[EntropyPair], boxes: &[SpaceTimeBox]) -> Result<LaxReport> {
    let (lo, hi) = sol.range();
    let mut values = Vec::new();
    for pair in pairs {
        if !pair.is_convex_on(lo, hi) {
            return Err(Error::invalid(format!("entropy '{}' is not convex on [{lo}, {hi}]", pair.name())));
        }
        for bx in boxes {
            values.push(LaxValue {
                entropy: pair.name().to_string(),
                region: bx.to_string(),
                value: dissipation_total(sol, pair, bx),
            });
        }
    }
    let worst = values.iter().max_by(|a, b| a.value.total_cmp(&b.value)).cloned();
    let max_value = worst.as_ref().map_or(f64::NEG_INFINITY, |w| w.value);
    Ok(LaxReport {
        values,
        max_value,
        worst,
        pass: max_value <= LAX_TOL,
    })
}

/// Certifies `μ_η(box) ≤ 1e-10` for every pair and box.
pub fn lax_check(sol: &EntropySolution1D, pairs: &[EntropyPair], boxes: &[SpaceTimeBox]) -> Result<LaxReport> {
    let report = lax_values(sol, pairs, boxes)?;
    match (&report.worst, report.pass) {
        (Some(w), false) => Err(Error::LaxViolation {
            entropy: w.entropy.clone(),
            region: w.region.clone(),
            value: w.value,
        }),
        _ => Ok(report),
    }
}

/// Space-time grid and trace schedule for entropy fluxes.
#[derive(Debug, Clone)]
pub struct SpaceTime {
    pub grid: GridSpec,
    pub schedule: TraceSchedule,
}

impl SpaceTime {
    pub fn new(grid: GridSpec, schedule: TraceSchedule) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::invalid("space-time grids are two-dimensional"));
        }
        schedule.validate(&grid)?;
        Ok(SpaceTime { grid, schedule })
    }

    /// `t ∈ [−1, 2]`, `x ∈ [−2, 3]` at spacing `h`.
    pub fn with_spacing(h: f64) -> Result<Self> {
        let grid = SpaceTimeBox::new(-1.0, 2.0, -2.0, 3.0)?.grid(h)?;
        Self::new(grid, TraceSchedule::reference())
    }

    pub fn reference() -> Result<Self> {
        Self::with_spacing(1.0 / 256.0)
    }

    /// Grid around the waves of `sol` up to `2·t_max`: from `t = −t_max`
    /// (or `t = 0` for fans) and two units past the fastest wave in `x`.
    pub fn for_solution(sol: &EntropySolution1D, t_max: f64, h: f64) -> Result<Self> {
        let reach = sol.law.speed(sol.u_left).abs().max(sol.law.speed(sol.u_right).abs()) * 2.0 * t_max + 2.0;
        let t0 = if matches!(sol.wave, Wave::Rarefaction { .. }) { 0.0 } else { -t_max };
        let grid = SpaceTimeBox::new(t0, 2.0 * t_max, sol.x0 - reach, sol.x0 + reach)?.grid(h)?;
        Self::new(grid, TraceSchedule::reference())
    }
}

/// `G(t, x) = (η(u), q(u))` as a divergence-measure field on `grid`.
/// Rarefactions need a grid in `t ≥ 0`.
pub fn space_time_field(sol: &EntropySolution1D, pair: &EntropyPair, grid: &GridSpec) -> Result<DMField> {
    if grid.dim() != 2 {
        return Err(Error::invalid("space-time grids are two-dimensional"));
    }
    let g = |u: f64| -> Point { [pair.eta(u), pair.q(u), 0.0] };
    let name = format!("entropy_flux({})", pair.name());
    let constant = |u: f64| -> Piece {
        let v = g(u);
        Piece {
            region: ShapeSpec::empty(),
            field: Arc::new(move |_: &Point| v),
            divergence: Arc::new(|_: &Point| 0.0),
        }
    };
    let norm_of = |u: f64| crate::point::norm(&g(u));
    let epsilon = 4.0 * grid.spacing();
    match sol.wave {
        Wave::Constant => {
            let v = g(sol.u_left);
            make_analytic(&name, grid, move |_| v, |_| 0.0, crate::point::norm(&v), 0)
        }
        Wave::Shock { speed } => {
            let left_region = ShapeSpec::half_space(&[-speed, 1.0], sol.x0);
            let left = Piece {
                region: left_region.clone(),
                ..constant(sol.u_left)
            };
            let right = Piece {
                region: ShapeSpec::complement(left_region),
                ..constant(sol.u_right)
            };
            let sup = norm_of(sol.u_left).max(norm_of(sol.u_right));
            make_piecewise(&name, grid, vec![left, right], sup, epsilon)
        }
        Wave::Rarefaction { head, tail } => {
            if grid.origin()[0] < 0.0 {
                return Err(Error::invalid("rarefaction fields need a grid in t >= 0"));
            }
            let left_region = ShapeSpec::half_space(&[-head, 1.0], sol.x0);
            let right_region = ShapeSpec::half_space(&[tail, -1.0], -sol.x0);
            let fan_region = ShapeSpec::intersection(vec![
                ShapeSpec::complement(left_region.clone()),
                ShapeSpec::complement(right_region.clone()),
            ]);
            let fan_sol = sol.clone();
            let fan_pair = pair.clone();
            let fan = Piece {
                region: fan_region,
                field: Arc::new(move |p: &Point| {
                    let u = fan_sol.state(p[0], p[1]);
                    [fan_pair.eta(u), fan_pair.q(u), 0.0]
                }),
                divergence: Arc::new(|_: &Point| 0.0),
            };
            let (lo, hi) = sol.range();
            let sup = (0..=1024).map(|i| norm_of(lo + (hi - lo) * i as f64 / 1024.0)).fold(0.0, f64::max) * (1.0 + 1e-6);
            let pieces = vec![
                Piece {
                    region: left_region,
                    ..constant(sol.u_left)
                },
                fan,
                Piece {
                    region: right_region,
                    ..constant(sol.u_right)
                },
            ];
            make_piecewise(&name, grid, pieces, sup, epsilon)
        }
    }
}

/// `𝔉_η(S)` and `𝔉_η(−S)` for `𝔉_η(S) = ∫_S (η(u), q(u))·ν` with the
/// one-sided trace of `G` from the side `S` is oriented by.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EntropyFluxes {
    pub flux: f64,
    pub flux_reversed: f64,
    /// `𝔉_η(S) + 𝔉_η(−S) = μ_η(S)`.
    pub sum: f64,
}

pub fn entropy_fluxes(sol: &EntropySolution1D, pair: &EntropyPair, s: &OrientedSurface, st: &SpaceTime) -> Result<EntropyFluxes> {
    let g = space_time_field(sol, pair, &st.grid)?;
    let traces = SurfaceTraces::new(&g, &s.reference_set, &st.schedule)?;
    // SurfaceTraces reports −∫ G_i·ν; the entropy flux carries the opposite sign.
    let flux = -traces.flux(s)?;
    let flux_reversed = -traces.flux(&s.reversed())?;
    Ok(EntropyFluxes {
        flux,
        flux_reversed,
        sum: flux + flux_reversed,
    })
}

pub fn cauchy_entropy_flux(sol: &EntropySolution1D, pair: &EntropyPair, s: &OrientedSurface, st: &SpaceTime) -> Result<f64> {
    let g = space_time_field(sol, pair, &st.grid)?;
    let traces = SurfaceTraces::new(&g, &s.reference_set, &st.schedule)?;
    Ok(-traces.flux(s)?)
}

/// Entropy fluxes through both sides of the shock line for `0 ≤ t ≤ t_max`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SegmentDissipation {
    pub fluxes: EntropyFluxes,
    /// Time extent covered by the facets of the segment.
    pub duration: f64,
    /// `([q] − s[η])·duration`.
    pub closed_form: f64,
    pub area: f64,
}

/// `𝔉_η(S) + 𝔉_η(−S)` for `S` the piece of the shock line with
/// `0 ≤ t ≤ t_max`, oriented by the region left of the shock. The reference
/// set extends half a window past both ends so no corner of it touches `S`.
pub fn shock_segment_dissipation(
    sol: &EntropySolution1D,
    pair: &EntropyPair,
    t_max: f64,
    st: &SpaceTime,
) -> Result<SegmentDissipation> {
    let sh = sol.shock().ok_or_else(|| Error::invalid("solution has no shock"))?;
    let s = sh.speed;
    let r = (1.0 + s * s).sqrt();
    let nu = [s / r, -1.0 / r, 0.0];
    let margin = 0.5 * t_max;
    let (ta, tb) = (-margin, t_max + margin);
    let (xa, xb) = (sh.x0 + s * ta, sh.x0 + s * tb);
    let left = ShapeSpec::intersection(vec![
        ShapeSpec::half_space(&[-s, 1.0], sh.x0),
        ShapeSpec::axis_box(&[ta, xa.min(xb) - 1.0], &[tb, xa.max(xb) + 1.0]),
    ]);
    let h = st.grid.spacing();
    let surface = OrientedSurface::boundary_part(&left, &st.grid, &st.schedule, |fc| {
        let (t, x) = (fc.midpoint[0], fc.midpoint[1]);
        crate::point::dot(&fc.normal, &nu) > 0.99 && (x - sh.x0 - s * t).abs() < h * r && (0.0..=t_max).contains(&t)
    })?;
    if surface.mesh.is_empty() {
        return Err(Error::invalid("shock segment has no facets at this resolution"));
    }
    let fluxes = entropy_fluxes(sol, pair, &surface, st)?;
    let area = surface.area();
    let duration = area / r;
    Ok(SegmentDissipation {
        fluxes,
        duration,
        closed_form: dissipation_rate(sol, pair) * duration,
        area,
    })
}

/// `μ_η(R)` against `−∮_{∂R} G·ν` from the interior trace of `R`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosureReport {
    pub dissipation: f64,
    pub boundary: f64,
    /// `sup|G|·Per(R)`.
    pub normalization: f64,
    pub residual: f64,
}

pub fn space_time_closure(sol: &EntropySolution1D, pair: &EntropyPair, rect: &SpaceTimeBox, st: &SpaceTime) -> Result<ClosureReport> {
    let g = space_time_field(sol, pair, &st.grid)?;
    let trace = interior_trace(&g, &rect.shape(), &st.schedule)?;
    let dissipation = dissipation_total(sol, pair, rect);
    let boundary = -trace.limit_total;
    let perimeter = 2.0 * ((rect.t.1 - rect.t.0) + (rect.x.1 - rect.x.0));
    let normalization = (g.sup_bound() * perimeter).max(f64::MIN_POSITIVE);
    Ok(ClosureReport {
        dissipation,
        boundary,
        normalization,
        residual: (dissipation - boundary).abs() / normalization,
    })
}
