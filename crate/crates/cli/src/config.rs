//! Experiment configuration: a TOML file with `[grid]`, `[shape]`,
//! `[field]`, `[schedule]`, `[flux]` and `[conservation]` sections.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use divtrace::conservation::{make_entropy_pair, Entropy, EntropyPair, ScalarLaw, SpaceTimeBox};
use divtrace::fields::{registry, DMField, FieldParams};
use divtrace::grid::{GridSpec, KernelKind, ShapeSpec};
use divtrace::traces::{cusp_shape, FatnessConfig, TraceSchedule};
use serde::{Deserialize, Serialize};

pub const SHAPE_NAMES: &[&str] = &["disk", "square", "rotated_square", "annulus", "cusp"];

/// A configuration problem, located by line (when known) and dotted field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}, field '{}': {}", self.field, self.message),
            None => write!(f, "config error in field '{}': {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Coarse,
    Reference,
    Fine,
}

impl Resolution {
    pub fn spacing(self) -> f64 {
        match self {
            Resolution::Coarse => 1.0 / 64.0,
            Resolution::Reference => 1.0 / 256.0,
            Resolution::Fine => 1.0 / 512.0,
        }
    }

    pub fn eps(self) -> Vec<f64> {
        match self {
            Resolution::Coarse => vec![0.4, 0.2, 0.1],
            Resolution::Reference => vec![0.2, 0.1, 0.05],
            Resolution::Fine => vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output: PathBuf,
    pub seed: u64,
    pub grid: GridSection,
    pub shape: ShapeSection,
    pub field: FieldSection,
    pub schedule: ScheduleSection,
    pub flux: FluxSection,
    pub conservation: ConservationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    /// The grid is the cube `[lo, hi]^dim`.
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSection {
    /// One of [`SHAPE_NAMES`]; ignored when `spec` is given.
    pub name: String,
    pub spec: Option<ShapeSpec>,
    pub fatness_c0: f64,
    pub fatness_r0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub name: String,
    pub interface_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub eps: Vec<f64>,
    pub levels_per_band: usize,
    pub kernel: KernelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxSection {
    /// Fine cells per lattice cube along each axis.
    pub coarsen: usize,
    pub n_slices: usize,
    pub slack: f64,
    /// Synthetic face table (CSV); when absent the flux is induced by the field.
    pub table: Option<PathBuf>,
    /// Lebesgue density of `σ` for synthetic tables.
    pub sigma_density: f64,
    pub c_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConservationSection {
    pub flux: String,
    pub u_left: f64,
    pub u_right: f64,
    /// Propagate the jump as a shock even when it is not admissible.
    pub forced_shock: bool,
    pub t_max: f64,
    pub entropies: Vec<String>,
    /// Lax boxes `[t0, t1, x0, x1]`.
    pub boxes: Vec<[f64; 4]>,
    /// Spacing of the space-time grid used by the trace machinery.
    pub spacetime_h: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output: PathBuf::from("out"),
            seed: 7,
            grid: GridSection::default(),
            shape: ShapeSection::default(),
            field: FieldSection::default(),
            schedule: ScheduleSection::default(),
            flux: FluxSection::default(),
            conservation: ConservationSection::default(),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            dim: 2,
            lo: -2.0,
            hi: 2.0,
            h: 1.0 / 256.0,
        }
    }
}

impl Default for ShapeSection {
    fn default() -> Self {
        ShapeSection {
            name: "disk".into(),
            spec: None,
            fatness_c0: 0.4,
            fatness_r0: 0.25,
        }
    }
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            name: "linear".into(),
            interface_epsilon: FieldParams::default().interface_epsilon,
        }
    }
}

impl Default for ScheduleSection {
    fn default() -> Self {
        let r = TraceSchedule::reference();
        ScheduleSection {
            eps: r.eps_list,
            levels_per_band: r.levels_per_band,
            kernel: r.kernel,
        }
    }
}

impl Default for FluxSection {
    fn default() -> Self {
        FluxSection {
            coarsen: 16,
            n_slices: 8,
            slack: divtrace::flux::DEFAULT_SLACK,
            table: None,
            sigma_density: 1.0,
            c_bound: 10.0,
        }
    }
}

impl Default for ConservationSection {
    fn default() -> Self {
        ConservationSection {
            flux: "burgers".into(),
            u_left: 1.0,
            u_right: 0.0,
            forced_shock: false,
            t_max: 1.0,
            entropies: ["quadratic", "kruzkov", "smooth_abs", "quartic", "exponential"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            boxes: vec![[0.0, 1.0, -1.0, 1.0], [0.5, 1.5, 0.0, 2.0], [0.0, 1.0, 2.0, 3.0]],
            spacetime_h: 1.0 / 128.0,
        }
    }
}

/// Line of `key = ...` inside `[section]` (or at top level when `section`
/// is empty), 1-based.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[') {
            current = h.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = message
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".into());
            ConfigError {
                line: e.span().map(|s| line_of_offset(text, s.start)),
                field,
                message,
            }
        })?;
        cfg.validate().map_err(|mut err| {
            if err.line.is_none() {
                let (section, key) = err.field.rsplit_once('.').unwrap_or(("", err.field.as_str()));
                err.line = locate(text, section, key).or_else(|| locate(text, section, ""));
            }
            err
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            field: "<file>".into(),
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply_resolution(&mut self, r: Resolution) {
        self.grid.h = r.spacing();
        self.schedule.eps = r.eps();
    }

    /// Resolves every name and checks every value.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, message: String| ConfigError {
            line: None,
            field: field.into(),
            message,
        };
        self.grid_spec().map_err(|e| err("grid.h", e.to_string()))?;
        self.shape_spec()?;
        let grid = self.grid_spec().expect("checked above");
        self.schedule().validate(&grid).map_err(|e| err("schedule.eps", e.to_string()))?;
        FatnessConfig::new(self.shape.fatness_c0, self.shape.fatness_r0).map_err(|e| err("shape.fatness_c0", e.to_string()))?;
        let known = divtrace::fields::FIELD_NAMES;
        let name = self.field.name.as_str();
        if !known.contains(&name) && !name.starts_with("sampled:") {
            return Err(err("field.name", format!("unknown field '{name}'; expected one of {known:?}")));
        }
        if !(self.field.interface_epsilon > 0.0) {
            return Err(err("field.interface_epsilon", "must be positive".into()));
        }
        if self.flux.coarsen == 0 {
            return Err(err("flux.coarsen", "must be at least 1".into()));
        }
        if self.flux.n_slices < 8 {
            return Err(err("flux.n_slices", "at least 8 slices are required".into()));
        }
        if !(self.flux.slack >= 0.0) {
            return Err(err("flux.slack", "must be nonnegative".into()));
        }
        if !(self.flux.sigma_density >= 0.0) || !(self.flux.c_bound >= 0.0) {
            return Err(err("flux.sigma_density", "sigma_density and c_bound must be nonnegative".into()));
        }
        ScalarLaw::by_name(&self.conservation.flux).map_err(|e| err("conservation.flux", e.to_string()))?;
        for e in &self.conservation.entropies {
            Entropy::by_name(e).map_err(|x| err("conservation.entropies", x.to_string()))?;
        }
        if !(self.conservation.u_left.is_finite() && self.conservation.u_right.is_finite()) {
            return Err(err("conservation.u_left", "states must be finite".into()));
        }
        if !(self.conservation.t_max > 0.0) {
            return Err(err("conservation.t_max", "must be positive".into()));
        }
        self.lax_boxes().map_err(|e| err("conservation.boxes", e.to_string()))?;
        if !(self.conservation.spacetime_h > 0.0 && self.conservation.spacetime_h <= 0.025) {
            return Err(err("conservation.spacetime_h", "must lie in (0, 0.025] to resolve the trace schedule".into()));
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> divtrace::Result<GridSpec> {
        GridSpec::cube(self.grid.dim, self.grid.lo, self.grid.hi, self.grid.h)
    }

    pub fn shape_spec(&self) -> Result<ShapeSpec, ConfigError> {
        let dim = self.grid.dim;
        let shape = match &self.shape.spec {
            Some(s) => s.clone(),
            None => named_shape(&self.shape.name, dim).ok_or_else(|| ConfigError {
                line: None,
                field: "shape.name".into(),
                message: format!("unknown shape '{}'; expected one of {SHAPE_NAMES:?}", self.shape.name),
            })?,
        };
        shape.validate(dim).map_err(|e| ConfigError {
            line: None,
            field: "shape.spec".into(),
            message: e.to_string(),
        })?;
        Ok(shape)
    }

    pub fn schedule(&self) -> TraceSchedule {
        TraceSchedule {
            kernel: self.schedule.kernel,
            ..TraceSchedule::new(self.schedule.eps.clone(), self.schedule.levels_per_band)
        }
    }

    pub fn field_params(&self) -> FieldParams {
        FieldParams {
            interface_epsilon: self.field.interface_epsilon,
            seed: self.seed,
        }
    }

    pub fn field(&self, grid: &GridSpec) -> divtrace::Result<DMField> {
        registry(&self.field.name, grid, &self.field_params())
    }

    pub fn fatness(&self) -> FatnessConfig {
        FatnessConfig::new(self.shape.fatness_c0, self.shape.fatness_r0).expect("validated")
    }

    pub fn law(&self) -> ScalarLaw {
        ScalarLaw::by_name(&self.conservation.flux).expect("validated")
    }

    pub fn entropy_pairs(&self) -> Vec<EntropyPair> {
        let law = self.law();
        self.conservation
            .entropies
            .iter()
            .map(|e| make_entropy_pair(&law, Entropy::by_name(e).expect("validated")))
            .collect()
    }

    pub fn lax_boxes(&self) -> divtrace::Result<Vec<SpaceTimeBox>> {
        self.conservation
            .boxes
            .iter()
            .map(|b| SpaceTimeBox::new(b[0], b[1], b[2], b[3]))
            .collect()
    }

    /// The configuration with derived quantities, for report headers.
    pub fn echo(&self) -> serde_json::Value {
        let s = self.schedule();
        serde_json::json!({
            "config": self,
            "grid_cells": self.grid_spec().map(|g| g.cells()[..self.grid.dim].to_vec()).unwrap_or_default(),
            "interior_band": s.interior_band(),
            "exterior_band": s.exterior_band(),
            "shape_spec": self.shape_spec().ok(),
        })
    }
}

/// Corpus shapes by name, in `dim` dimensions.
pub fn named_shape(name: &str, dim: usize) -> Option<ShapeSpec> {
    let zero = vec![0.0; dim];
    let half = vec![0.5; dim];
    Some(match name {
        "disk" => ShapeSpec::ball(&zero, 1.0),
        "square" => ShapeSpec::axis_box(&vec![-0.5; dim], &half),
        "rotated_square" => ShapeSpec::rotated_box(&zero, &half, FRAC_PI_4),
        "annulus" => ShapeSpec::annulus(&zero, 0.5, 1.0),
        "cusp" => cusp_shape(),
        _ => return None,
    })
}

/// Closed-form perimeter and tolerance of the planar corpus shapes.
pub fn known_perimeter(name: &str) -> Option<(f64, f64)> {
    match name {
        "disk" => Some((2.0 * PI, 0.01)),
        "square" | "rotated_square" => Some((4.0, 0.01)),
        "annulus" => Some((3.0 * PI, 0.015)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn inline_shape_round_trips() {
        let text = "[shape]\nspec = { type = \"ball\", center = [0.5, 0.0], radius = 0.75 }\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.shape_spec().unwrap(), ShapeSpec::ball(&[0.5, 0.0], 0.75));
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_names_are_located() {
        let text = "seed = 3\n\n[field]\nname = \"nope\"\n";
        let e = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(e.field, "field.name");
        assert_eq!(e.line, Some(4));

        let e = ExperimentConfig::parse("[grid]\ndim = 2\nsize = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert_eq!(e.field, "size");

        let e = ExperimentConfig::parse("[conservation]\nentropies = [\"quadratic\", \"bogus\"]\n").unwrap_err();
        assert_eq!(e.field, "conservation.entropies");
        assert_eq!(e.line, Some(2));
    }

    #[test]
    fn unresolved_schedules_are_rejected() {
        // eps = 0.05 spans under one cell at h = 0.1
        let e = ExperimentConfig::parse("[grid]\nh = 0.1\n").unwrap_err();
        assert_eq!(e.field, "schedule.eps");
        let e = ExperimentConfig::parse("[schedule]\neps = [0.05, 0.1]\n").unwrap_err();
        assert_eq!(e.field, "schedule.eps");
    }

    #[test]
    fn resolution_overrides_spacing_and_schedule() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_resolution(Resolution::Coarse);
        assert_eq!(cfg.grid.h, 1.0 / 64.0);
        cfg.validate().unwrap();
        cfg.apply_resolution(Resolution::Fine);
        assert_eq!(cfg.schedule.eps, vec![0.1, 0.05, 0.025]);
        cfg.validate().unwrap();
    }
}
