//! Named corpus fields addressable from configuration files.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{io::read_vector, GridSpec, ShapeSpec};
use crate::measures::SignedMeasure;
use crate::point::{norm, scale, Point};

use super::{make_analytic, make_piecewise, make_sampled, DMField, Piece, Structure};

pub const FIELD_NAMES: &[&str] = &[
    "zero",
    "constant",
    "linear",
    "rotation",
    "chen_frid",
    "radial_unit",
    "radial_inv",
    "piecewise:radial_unit",
    "piecewise:radial_inv",
    "piecewise:radial_clamped",
    "piecewise:flat_jump",
    "sampled:<file>",
];

/// Radius of the excised ball for `radial_inv`.
pub const RADIAL_INV_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldParams {
    /// Mollification scale at which piecewise interfaces are extracted.
    pub interface_epsilon: f64,
    pub seed: u64,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams {
            interface_epsilon: 0.05,
            seed: 7,
        }
    }
}

fn corner_norm(grid: &GridSpec) -> f64 {
    let (lo, hi) = (grid.origin(), grid.upper());
    let mut s = 0.0;
    for a in 0..grid.dim() {
        s += lo[a].abs().max(hi[a].abs()).powi(2);
    }
    s.sqrt()
}

/// `(s, s)` with `s = sin(1/(y₁ − y₂))`, and 0 on the line `y₁ = y₂`.
/// Divergence-free off the line, with an essential singularity on it.
pub fn make_chen_frid(grid: &GridSpec) -> Result<DMField> {
    if grid.dim() < 2 {
        return Err(Error::invalid("chen_frid needs dim >= 2"));
    }
    let field = DMField {
        name: "chen_frid".into(),
        grid: grid.clone(),
        sup_bound: 2f64.sqrt(),
        divergence: SignedMeasure::zero(grid),
        structure: Structure::Analytic,
        evaluator: Arc::new(|p: &Point| {
            let d = p[0] - p[1];
            if d == 0.0 {
                return [0.0; 3];
            }
            let s = (1.0 / d).sin();
            [s, s, 0.0]
        }),
    };
    field.check_bound(0)?;
    Ok(field)
}

/// `y / |y|^power`, 0 at the origin.
fn radial(power: i32) -> impl Fn(&Point) -> Point + Send + Sync + Clone {
    move |p: &Point| {
        let r = norm(p);
        if r == 0.0 {
            return [0.0; 3];
        }
        scale(p, 1.0 / r.powi(power))
    }
}

fn zero_piece(region: ShapeSpec) -> Piece {
    Piece {
        region,
        field: Arc::new(|_: &Point| [0.0; 3]),
        divergence: Arc::new(|_: &Point| 0.0),
    }
}

fn origin(dim: usize) -> Vec<f64> {
    vec![0.0; dim]
}

fn piecewise(name: &str, grid: &GridSpec, params: &FieldParams) -> Result<DMField> {
    let dim = grid.dim();
    let n1 = (dim - 1) as f64;
    match name {
        // 0 in the unit ball, y/|y| outside; the jump is 1 per unit area.
        "radial_unit" => {
            let ball = ShapeSpec::ball(&origin(dim), 1.0);
            let outer = Piece {
                region: ShapeSpec::complement(ball.clone()),
                field: Arc::new(radial(1)),
                divergence: Arc::new(move |p: &Point| n1 / norm(p)),
            };
            make_piecewise("radial_unit", grid, vec![zero_piece(ball), outer], 1.0, params.interface_epsilon)
        }
        // 0 in a small ball, the divergence-free y/|y|^N outside.
        "radial_inv" => {
            let r0 = RADIAL_INV_RADIUS;
            let ball = ShapeSpec::ball(&origin(dim), r0);
            let outer = Piece {
                region: ShapeSpec::complement(ball.clone()),
                field: Arc::new(radial(dim as i32)),
                divergence: Arc::new(|_: &Point| 0.0),
            };
            let sup = 1.0 / r0.powi(dim as i32 - 1);
            make_piecewise("radial_inv", grid, vec![zero_piece(ball), outer], sup, params.interface_epsilon)
        }
        // y inside the unit ball, y/|y| outside: continuous across |y| = 1.
        "radial_clamped" => {
            let ball = ShapeSpec::ball(&origin(dim), 1.0);
            let inner = Piece {
                region: ball.clone(),
                field: Arc::new(|p: &Point| *p),
                divergence: Arc::new(move |_: &Point| dim as f64),
            };
            let outer = Piece {
                region: ShapeSpec::complement(ball),
                field: Arc::new(radial(1)),
                divergence: Arc::new(move |p: &Point| n1 / norm(p)),
            };
            make_piecewise("radial_clamped", grid, vec![inner, outer], 1.0, params.interface_epsilon)
        }
        // (0, -3) below the hyperplane y₂ = 0 and 0 above: jump 3 across it.
        "flat_jump" => {
            if dim < 2 {
                return Err(Error::invalid("flat_jump needs dim >= 2"));
            }
            let mut n = vec![0.0; dim];
            n[1] = 1.0;
            let below = ShapeSpec::half_space(&n, 0.0);
            let lower = Piece {
                region: below.clone(),
                field: Arc::new(|_: &Point| [0.0, -3.0, 0.0]),
                divergence: Arc::new(|_: &Point| 0.0),
            };
            make_piecewise(
                "flat_jump",
                grid,
                vec![lower, zero_piece(ShapeSpec::complement(below))],
                3.0,
                params.interface_epsilon,
            )
        }
        other => Err(Error::invalid(format!("unknown piecewise field '{other}'"))),
    }
}

/// Builds a corpus field by name on `grid`.
pub fn registry(name: &str, grid: &GridSpec, params: &FieldParams) -> Result<DMField> {
    let dim = grid.dim();
    if let Some(rest) = name.strip_prefix("piecewise:") {
        return piecewise(rest, grid, params);
    }
    if let Some(file) = name.strip_prefix("sampled:") {
        let samples = read_vector(Path::new(file))?;
        if !samples.grid().same_shape(grid) {
            return Err(Error::invalid(format!("sampled field '{file}' is not on the configured grid")));
        }
        return make_sampled(name, samples);
    }
    let seed = params.seed;
    match name {
        "zero" => make_analytic(name, grid, |_| [0.0; 3], |_| 0.0, 0.0, seed),
        "constant" => make_analytic(name, grid, |_| [1.0, 0.0, 0.0], |_| 0.0, 1.0, seed),
        "linear" => make_analytic(
            name,
            grid,
            move |p| {
                let mut v = [0.0; 3];
                v[..dim].copy_from_slice(&p[..dim]);
                v
            },
            move |_| dim as f64,
            corner_norm(grid),
            seed,
        ),
        "rotation" => {
            if dim < 2 {
                return Err(Error::invalid("rotation needs dim >= 2"));
            }
            make_analytic(name, grid, |p| [-p[1], p[0], 0.0], |_| 0.0, corner_norm(grid), seed)
        }
        "chen_frid" => make_chen_frid(grid),
        "radial_unit" | "radial_inv" => piecewise(name, grid, params),
        other => Err(Error::invalid(format!(
            "unknown field '{other}'; expected one of {}",
            FIELD_NAMES.join(", ")
        ))),
    }
}
