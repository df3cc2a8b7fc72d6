//! One function per subcommand. Each fills a [`Report`]; errors raised by
//! bad inputs abort with a config error, errors raised by the mathematics
//! (a fatness or Lax violation, say) become failed checks.

use std::path::Path;

use clap::ValueEnum;
use divtrace::conservation::{
    dissipation_total, entropy_dissipation, lax_values, shock_segment_dissipation, solve_riemann_at, space_time_closure,
    EntropySolution1D, SpaceTime, SpaceTimeBox, Wave, LAX_TOL,
};
use divtrace::fields::DMField;
use divtrace::flux::{
    axiom_checks, face_flux_agreement, production_measure, reconstructed_field, reconstruction_l1_error, slice_reconstruct,
    CauchyFluxSpec, FluxSource, Lattice, OrientedSurface, SyntheticFlux,
};
use divtrace::geometry::{coarea_check, perimeter};
use divtrace::grid::{mollify, rasterize, GridSpec, MollifierKernel, ShapeSpec, VectorGridField};
use divtrace::measures::SignedMeasure;
use divtrace::report::{Check, Report};
use divtrace::traces::{
    convergence_diagnostics, gauss_green_check, jump_check, one_sided_inclusion, t_stability, trace_with, Side,
    TestFunction, TraceContext, TraceSchedule,
};
use divtrace::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{known_perimeter, ConfigError, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Perimeter,
    Coarea,
    Approx,
    Trace,
    GaussGreen,
    Jump,
    Fatness,
    FluxAxioms,
    FluxReconstruct,
    Production,
    BurgersDissipation,
    Lax,
    All,
}

impl Command {
    pub const EXPERIMENTS: [Command; 12] = [
        Command::Perimeter,
        Command::Coarea,
        Command::Approx,
        Command::Trace,
        Command::GaussGreen,
        Command::Jump,
        Command::Fatness,
        Command::FluxAxioms,
        Command::FluxReconstruct,
        Command::Production,
        Command::BurgersDissipation,
        Command::Lax,
    ];

    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

/// Quadrature levels for the coarea identity.
const COAREA_LEVELS: usize = 16;
/// Relative tolerance shared by the coarea, trace and Gauss-Green checks.
const REL_TOL: f64 = 0.02;

struct Inputs<'a> {
    cfg: &'a ExperimentConfig,
    grid: GridSpec,
    shape: ShapeSpec,
    schedule: TraceSchedule,
}

impl Inputs<'_> {
    fn field(&self) -> Result<DMField, Error> {
        self.cfg.field(&self.grid)
    }

    fn context(&self) -> Result<TraceContext, Error> {
        TraceContext::new(&self.shape, &self.grid, &self.schedule)
    }

    fn lattice(&self) -> Result<Lattice, Error> {
        Lattice::coarsen(&self.grid, self.cfg.flux.coarsen, self.cfg.flux.n_slices)
    }

    fn flux_spec(&self, lattice: &Lattice) -> Result<CauchyFluxSpec, Error> {
        match &self.cfg.flux.table {
            Some(path) => {
                let table = SyntheticFlux::read(path, lattice.clone())?;
                let sigma = SignedMeasure::lebesgue(&lattice.grid).scaled(self.cfg.flux.sigma_density);
                CauchyFluxSpec::synthetic(table, sigma, self.cfg.flux.c_bound)
            }
            None => Ok(CauchyFluxSpec::from_field(self.field()?, self.cfg.flux.slack)?.with_schedule(self.schedule.clone())),
        }
    }
}

/// Errors that point at the inputs rather than at the mathematics.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidInput(_)
            | Error::Bounds(_)
            | Error::Resolution { .. }
            | Error::DivergenceMismatch { .. }
            | Error::Partition(_)
            | Error::AtomOnBoundary { .. }
            | Error::Config { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::UnknownFace(_)
    )
}

fn input_error(e: &Error) -> ConfigError {
    let field = match e {
        Error::Bounds(_) | Error::AtomOnBoundary { .. } => "shape",
        Error::Resolution { .. } => "schedule.eps",
        Error::DivergenceMismatch { .. } | Error::Partition(_) => "field.name",
        Error::UnknownFace(_) => "flux.table",
        Error::Config { location, .. } => location.as_str(),
        _ => "<experiment>",
    };
    ConfigError {
        line: None,
        field: field.to_string(),
        message: e.to_string(),
    }
}

/// Runs one experiment (every experiment for `All`) and writes its report
/// under `out`. Returns the reports in run order.
pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Report>, ConfigError> {
    cfg.validate()?;
    let inputs = Inputs {
        cfg,
        grid: cfg.grid_spec().map_err(|e| input_error(&e))?,
        shape: cfg.shape_spec()?,
        schedule: cfg.schedule(),
    };
    let write = |r: &Report, dir: &Path| {
        r.write(dir).map_err(|e| ConfigError {
            line: None,
            field: "output".into(),
            message: e.to_string(),
        })
    };
    if cmd != Command::All {
        let r = run_one(cmd, &inputs)?;
        write(&r, out)?;
        return Ok(vec![r]);
    }
    let mut reports = Vec::new();
    let mut summary = Report::new("all", cfg.echo());
    for c in Command::EXPERIMENTS {
        let r = run_one(c, &inputs)?;
        write(&r, &out.join(c.name()))?;
        summary.check(Check::holds(&c.name(), r.pass()));
        reports.push(r);
    }
    write(&summary, out)?;
    reports.push(summary);
    Ok(reports)
}

fn run_one(cmd: Command, inputs: &Inputs) -> Result<Report, ConfigError> {
    let mut report = Report::new(&cmd.name(), inputs.cfg.echo());
    let outcome = match cmd {
        Command::Perimeter => run_perimeter(inputs, &mut report),
        Command::Coarea => run_coarea(inputs, &mut report),
        Command::Approx => run_approx(inputs, &mut report),
        Command::Trace => run_trace(inputs, &mut report),
        Command::GaussGreen => run_gauss_green(inputs, &mut report),
        Command::Jump => run_jump(inputs, &mut report),
        Command::Fatness => run_fatness(inputs, &mut report),
        Command::FluxAxioms => run_flux_axioms(inputs, &mut report),
        Command::FluxReconstruct => run_flux_reconstruct(inputs, &mut report),
        Command::Production => run_production(inputs, &mut report),
        Command::BurgersDissipation => run_burgers(inputs, &mut report),
        Command::Lax => run_lax(inputs, &mut report),
        Command::All => unreachable!("expanded by run"),
    };
    match outcome {
        Ok(()) => Ok(report),
        Err(e) if is_input_error(&e) => Err(input_error(&e)),
        Err(e) => {
            report.result("error", e.to_string());
            report.check(Check::holds("completed", false).with_note(e.to_string()));
            Ok(report)
        }
    }
}

fn run_perimeter(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let r = perimeter(&inp.shape, &inp.grid, &inp.schedule.eps_list, inp.schedule.kernel)?;
    report.table("perimeter", r.table.to_csv());
    report.result("perimeter", &r);
    if inp.grid.dim() == 2 && inp.cfg.shape.spec.is_none() {
        if let Some((expected, tol)) = known_perimeter(&inp.cfg.shape.name) {
            report.check(Check::relative("perimeter", r.extrapolated, expected, tol));
        }
    }
    Ok(())
}

fn run_coarea(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let chi = rasterize(&inp.shape, &inp.grid)?;
    let mut csv = String::from("epsilon,gradient_mass,level_integral,residual\n");
    let mut rows = Vec::new();
    for &eps in &inp.schedule.eps_list {
        let u = mollify(&chi, &MollifierKernel::new(inp.schedule.kernel, eps)?)?;
        let c = coarea_check(&u, COAREA_LEVELS)?;
        csv.push_str(&format!("{eps},{},{},{}\n", c.gradient_mass, c.level_integral, c.residual));
        report.check(Check::at_most(&format!("coarea residual at eps {eps}"), c.residual, REL_TOL));
        rows.push(json!({"epsilon": eps, "result": c}));
    }
    report.table("coarea", csv);
    report.result("coarea", rows);
    Ok(())
}

fn run_approx(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let ctx = inp.context()?;
    let f = inp.field()?;
    let d = convergence_diagnostics(&ctx, f.divergence(), Some(&f))?;
    report.table("symdiff", d.symdiff.to_csv());
    report.table("exterior_area", d.exterior_area.to_csv());
    if let Some(t) = &d.exterior_flux {
        report.table("exterior_flux", t.to_csv());
    }
    let ratio = |t: &divtrace::measures::ConvergenceTable| t.first_value() / t.last_value().max(f64::MIN_POSITIVE);
    report.check(
        Check::holds("symdiff decreases 2x", d.symdiff.decreases_by(2.0)).with_note(format!("ratio {}", ratio(&d.symdiff))),
    );
    report.check(
        Check::holds("exterior area decreases 2x", d.exterior_area.decreases_by(2.0))
            .with_note(format!("ratio {}", ratio(&d.exterior_area))),
    );
    report.result("diagnostics", &d);
    Ok(())
}

fn run_trace(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let ctx = inp.context()?;
    let f = inp.field()?;
    let scale = f.sup_bound() * ctx.perimeter();
    for side in [Side::Interior, Side::Exterior] {
        let t = trace_with(&f, &ctx, side)?;
        let name = match side {
            Side::Interior => "interior",
            Side::Exterior => "exterior",
        };
        report.table(&format!("{name}_trace"), t.to_csv());
        report.check(Check::at_most(
            &format!("{name} Gauss-Green residual"),
            t.limit_residual / scale.max(f64::MIN_POSITIVE),
            REL_TOL,
        ));
        report.result(name, t.to_json());
    }
    report.result("perimeter", ctx.perimeter());
    report.result("t_stability", t_stability(&f, &ctx));
    Ok(())
}

fn run_gauss_green(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let ctx = inp.context()?;
    let f = inp.field()?;
    let mut csv = String::from("test_function,epsilon,residual\n");
    for phi in [TestFunction::one(), TestFunction::gaussian()] {
        let g = gauss_green_check(&f, &ctx, &phi)?;
        for (eps, r) in &g.residuals {
            csv.push_str(&format!("{},{eps},{r}\n", phi.name));
        }
        report.check(Check::at_most(&format!("residual ({})", phi.name), g.residual, REL_TOL));
        report.result(&phi.name, &g);
    }
    report.table("gauss_green", csv);
    Ok(())
}

fn run_jump(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let ctx = inp.context()?;
    let f = inp.field()?;
    let j = jump_check(&f, &ctx)?;
    // A divergence that charges ∂*E shows up as collar variation of order
    // sup|F|·Per; otherwise both traces agree and only the limit jump is tested.
    let scale = f.sup_bound() * ctx.perimeter();
    if j.collar_tv >= REL_TOL * scale {
        report.check(Check::at_most("jump residual", j.residual, REL_TOL));
    } else {
        report.check(Check::at_most("limit jump (continuous field)", j.limit_relative_jump, REL_TOL));
    }
    report.result("jump", &j);
    Ok(())
}

fn run_fatness(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let r = one_sided_inclusion(&inp.shape, &inp.cfg.fatness(), &inp.grid, &inp.schedule)?;
    let mut csv = String::from("epsilon,t,included\n");
    for (eps, t, ok) in &r.checks {
        csv.push_str(&format!("{eps},{t},{ok}\n"));
    }
    report.table("inclusion", csv);
    let above = r.checks.iter().filter(|c| c.1 > r.threshold);
    report.check(Check::holds("inclusion above threshold", above.clone().all(|c| c.2)));
    report.result("inclusion", &r);
    Ok(())
}

fn run_flux_axioms(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let lattice = inp.lattice()?;
    let spec = inp.flux_spec(&lattice)?;
    let surfaces = match inp.cfg.flux.table {
        Some(_) => Vec::new(),
        None => vec![OrientedSurface::boundary(&inp.shape, &inp.grid, &inp.schedule)?],
    };
    let r = axiom_checks(&spec, std::slice::from_ref(&inp.shape), &surfaces)?;
    let mut csv = String::from("axiom,subject,value,bound,pass\n");
    for c in &r.checks {
        csv.push_str(&format!("{},\"{}\",{},{},{}\n", c.axiom, c.subject, c.value, c.bound, c.pass));
        report.check(Check::at_most(&format!("axiom ({}) {}", c.axiom, c.subject), c.value, c.bound));
    }
    report.table("axioms", csv);
    report.result("skipped", &r.skipped);
    Ok(())
}

fn reconstruction_csv(rec: &VectorGridField) -> String {
    let g = rec.grid();
    let dim = g.dim();
    let axes = ["y1", "y2", "y3"];
    let mut s = String::new();
    for a in 0..dim {
        s.push_str(axes[a]);
        s.push(',');
    }
    s.push_str(&(0..dim).map(|a| format!("f{}", a + 1)).collect::<Vec<_>>().join(","));
    s.push('\n');
    for k in 0..g.len() {
        let (c, v) = (g.center_flat(k), rec.at(&g.multi(k)));
        let row: Vec<String> = (0..dim).map(|a| c[a].to_string()).chain((0..dim).map(|a| v[a].to_string())).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn run_flux_reconstruct(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let lattice = inp.lattice()?;
    let spec = inp.flux_spec(&lattice)?;
    let rec = slice_reconstruct(&spec, &lattice)?;
    report.table("reconstruction", reconstruction_csv(&rec));
    if inp.cfg.flux.table.is_none() {
        let err = reconstruction_l1_error(&inp.field()?, &rec, |_| false);
        report.check(Check::at_most("L1 error", err, 0.03));
    }
    let back = CauchyFluxSpec::from_field(reconstructed_field(&rec, "reconstructed")?, inp.cfg.flux.slack)?;
    let agreement = face_flux_agreement(&spec, &back, &lattice)?;
    report.check(Check::at_most("face flux round trip", agreement, 0.03));
    report.result("lattice", &lattice);
    Ok(())
}

fn run_production(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let lattice = inp.lattice()?;
    let spec = inp.flux_spec(&lattice)?;
    let r = production_measure(&spec, &lattice)?;
    report.table("production", r.to_csv());
    let dim = lattice.dim();
    let (hh, sup) = (lattice.spacing(), spec.sup_scale());
    // Largest possible |F(∂I)|.
    let scale = sup * 2.0 * dim as f64 * lattice.face_area();
    match &spec.source {
        FluxSource::Field(f) => {
            let div = f.divergence();
            let gap = (0..lattice.grid.len())
                .map(|k| {
                    let lo = lattice.corner(k);
                    let mu = div.eval_where(|p| (0..dim).all(|a| p[a] > lo[a] && p[a] < lo[a] + hh));
                    (r.per_cube[k] - mu).abs()
                })
                .fold(0.0, f64::max);
            report.check(Check::at_most("balance law |P(I) - div F(I)|", gap, REL_TOL * scale));
            if div.tv_total() == 0.0 {
                let bound = 1e-3 * sup * inp.grid.spacing();
                report.check(Check::at_most("max |P| (divergence-free)", r.max_abs_production, bound));
            }
        }
        FluxSource::Synthetic(_) => {
            report.check(Check::at_most("balance residual", r.max_residual, REL_TOL * scale));
        }
    }
    report.result("max_residual", r.max_residual);
    report.result("total", r.total);
    report.result("max_abs_production", r.max_abs_production);
    report.result("max_density", r.max_abs_production / lattice.cube_volume());
    report.result("shock_cubes", &r.shock_cubes);
    Ok(())
}

fn solution(inp: &Inputs) -> Result<EntropySolution1D, Error> {
    let c = &inp.cfg.conservation;
    let law = inp.cfg.law();
    if c.forced_shock && c.u_left != c.u_right {
        EntropySolution1D::forced_shock(&law, c.u_left, c.u_right)
    } else {
        solve_riemann_at(&law, c.u_left, c.u_right, 0.0)
    }
}

fn run_burgers(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let c = &inp.cfg.conservation;
    let sol = solution(inp)?;
    let t_max = c.t_max;
    let st = SpaceTime::for_solution(&sol, t_max, c.spacetime_h)?;
    report.result("wave", sol.wave);
    report.result("admissible", sol.is_admissible());
    if sol.shock().is_some() {
        report.check(Check::at_most("Rankine-Hugoniot residual", sol.rankine_hugoniot_residual(), 1e-12));
    }
    let reach = st.grid.upper()[1] - 2.0;
    let window = SpaceTimeBox::new(0.0, t_max, -reach, reach)?;
    let mut csv = String::from("entropy,closed_form,measure_total,trace_value,trace_reference\n");
    let mut rows = Vec::new();
    for pair in inp.cfg.entropy_pairs() {
        let name = pair.name().to_string();
        let mu = entropy_dissipation(&sol, &pair, &window)?;
        let closed = dissipation_total(&sol, &pair, &window);
        report.check(Check::near(&format!("measure total ({name})"), mu.eval_total(), closed, 1e-12 * closed.abs().max(1.0)));
        if pair.is_convex_on(sol.range().0, sol.range().1) {
            report.check(Check::at_most(&format!("Lax sign ({name})"), closed, LAX_TOL));
        }
        let (trace_value, trace_reference) = match sol.wave {
            Wave::Shock { .. } => {
                let seg = shock_segment_dissipation(&sol, &pair, t_max, &st)?;
                let sup = pair.eta(sol.u_left).hypot(pair.q(sol.u_left)).max(pair.eta(sol.u_right).hypot(pair.q(sol.u_right)));
                let tol = 0.05 * seg.closed_form.abs() + 1e-3 * sup * seg.area;
                report.check(Check::near(&format!("shock segment fluxes ({name})"), seg.fluxes.sum, seg.closed_form, tol));
                rows.push(json!({"entropy": name, "closed_form": closed, "segment": seg}));
                (seg.fluxes.sum, seg.closed_form)
            }
            _ => {
                let rect = SpaceTimeBox::new(0.5 * t_max, 1.5 * t_max, -1.0, 1.0 + 1.5 * t_max * sol.law.speed(sol.range().1).abs())?;
                let cl = space_time_closure(&sol, &pair, &rect, &st)?;
                report.check(Check::at_most(&format!("space-time Gauss-Green ({name})"), cl.residual, REL_TOL));
                rows.push(json!({"entropy": name, "closed_form": closed, "closure": cl}));
                (cl.boundary, cl.dissipation)
            }
        };
        csv.push_str(&format!("{name},{closed},{},{trace_value},{trace_reference}\n", mu.eval_total()));
    }
    report.table("dissipation", csv);
    report.result("entropies", rows);
    report.result("window", window);
    Ok(())
}

fn run_lax(inp: &Inputs, report: &mut Report) -> Result<(), Error> {
    let sol = solution(inp)?;
    let pairs = inp.cfg.entropy_pairs();
    let boxes = inp.cfg.lax_boxes()?;
    let r = lax_values(&sol, &pairs, &boxes)?;
    let mut csv = String::from("entropy,box,value\n");
    for v in &r.values {
        csv.push_str(&format!("{},\"{}\",{}\n", v.entropy, v.region, v.value));
        report.check(Check::at_most(&format!("Lax ({}, {})", v.entropy, v.region), v.value, LAX_TOL));
    }
    report.table("lax", csv);
    report.result("worst", &r.worst);
    report.result("admissible", sol.is_admissible());
    Ok(())
}
