use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::integrate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    SmoothBump,
    Plateau,
}

/// Radial mollifier `ρ_ε(x) = φ(|x|/ε) / (Z ε^N)` supported in `B(0, ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierKernel {
    pub kind: KernelKind,
    pub epsilon: f64,
}

/// `e^{-1/x}` for `x > 0`, else 0.
fn g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

impl MollifierKernel {
    pub fn new(kind: KernelKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!("kernel epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { kind, epsilon })
    }

    pub fn smooth_bump(epsilon: f64) -> Result<Self> {
        Self::new(KernelKind::SmoothBump, epsilon)
    }

    pub fn plateau(epsilon: f64) -> Result<Self> {
        Self::new(KernelKind::Plateau, epsilon)
    }

    /// Radius (relative to ε) of the flat top of the plateau kernel. In one
    /// dimension a flat top of radius 1/2 would already carry all the mass.
    pub fn plateau_radius(dim: usize) -> f64 {
        if dim == 1 {
            0.4
        } else {
            0.5
        }
    }

    /// Unnormalized profile φ on the unit ball, `r = |x|/ε`.
    pub fn profile(&self, r: f64, dim: usize) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self.kind {
            KernelKind::SmoothBump => (-1.0 / (1.0 - r * r)).exp(),
            KernelKind::Plateau => {
                let p = Self::plateau_radius(dim);
                if r <= p {
                    1.0
                } else {
                    let s = (r - p) / (1.0 - p);
                    g(1.0 - s) / (g(1.0 - s) + g(s))
                }
            }
        }
    }

    /// `∫_{B(0,1)} φ(|x|) dx`.
    pub fn profile_mass(&self, dim: usize) -> f64 {
        let sphere = match dim {
            1 => 2.0,
            2 => 2.0 * std::f64::consts::PI,
            _ => 4.0 * std::f64::consts::PI,
        };
        let radial = |r: f64| self.profile(r, dim) * r.powi(dim as i32 - 1);
        let inner = if self.kind == KernelKind::Plateau {
            let p = Self::plateau_radius(dim);
            p.powi(dim as i32) / dim as f64 + integrate(radial, p, 1.0, 1e-14)
        } else {
            integrate(radial, 0.0, 1.0, 1e-14)
        };
        sphere * inner
    }

    /// Continuous kernel value at displacement of length `dist`.
    pub fn value(&self, dist: f64, dim: usize) -> f64 {
        self.profile(dist / self.epsilon, dim) / (self.profile_mass(dim) * self.epsilon.powi(dim as i32))
    }

    /// Stencil radius in cells for spacing `h`.
    pub fn radius_cells(&self, h: f64) -> usize {
        (self.epsilon / h).ceil() as usize
    }

    /// Sampled kernel on `[-R, R]^dim`, row-major, renormalized to unit
    /// discrete sum. Returned with R.
    pub fn stencil(&self, dim: usize, h: f64) -> (usize, Vec<f64>) {
        let r = self.radius_cells(h) as isize;
        let side = (2 * r + 1) as usize;
        let n = side.pow(dim as u32);
        let mut w = Vec::with_capacity(n);
        for k in 0..n {
            let mut rem = k;
            let mut d2 = 0.0;
            for _ in 0..dim {
                let off = (rem % side) as isize - r;
                rem /= side;
                d2 += (off as f64 * h).powi(2);
            }
            w.push(self.profile(d2.sqrt() / self.epsilon, dim));
        }
        let total: f64 = crate::numerics::kahan_sum(w.iter().copied());
        for v in &mut w {
            *v /= total;
        }
        (r as usize, w)
    }
}
