//! Desk-scale acceptance run at the reference resolution: h = 1/256 on
//! [−2, 2]², ε ∈ {0.2, 0.1, 0.05}, 8 levels per band. Prints one PASS/FAIL
//! line per criterion followed by its individual checks.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::time::{Duration, Instant};

use divtrace::conservation::{
    entropy_dissipation, lax_check, make_entropy_pair, shock_segment_dissipation, solve_riemann, standard_entropies,
    Entropy, EntropySolution1D, ScalarLaw, SpaceTime, SpaceTimeBox, Wave,
};
use divtrace::fields::{registry, DMField, FieldParams};
use divtrace::flux::{
    evaluate_flux, face_flux_agreement, production_measure, reconstructed_field, reconstruction_l1_error,
    slice_reconstruct, CauchyFluxSpec, Lattice, OrientedSurface, DEFAULT_SLACK,
};
use divtrace::geometry::{coarea_check, perimeter, surface_measure};
use divtrace::grid::{GridSpec, ShapeSpec};
use divtrace::measures::ConvergenceTable;
use divtrace::traces::{
    classical_consistency, convergence_diagnostics, cusp_shape, gauss_green_check, jump_check, one_sided_inclusion,
    trace_with, FatnessConfig, Side, TestFunction, TraceContext, TraceSchedule,
};
use divtrace::Error;

const H: f64 = 1.0 / 256.0;
/// Wall-clock budget per experiment.
const BUDGET: Duration = Duration::from_secs(60);

struct Line {
    label: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Criterion {
    lines: Vec<Line>,
}

impl Criterion {
    fn at_most(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.push(label, value <= bound, format!("{value:.6e} <= {bound:.3e}"));
    }

    /// `|value − expected| ≤ rel·|expected|`.
    fn relative(&mut self, label: impl Into<String>, value: f64, expected: f64, rel: f64) {
        let dev = (value - expected).abs() / expected.abs();
        self.push(label, dev <= rel, format!("{value:.6} vs {expected:.6}, rel {dev:.2e} <= {rel:.0e}"));
    }

    fn near(&mut self, label: impl Into<String>, value: f64, expected: f64, tol: f64) {
        let dev = (value - expected).abs();
        self.push(label, dev <= tol, format!("{value:.6e} vs {expected:.6e}, |diff| {dev:.2e} <= {tol:.0e}"));
    }

    fn push(&mut self, label: impl Into<String>, pass: bool, detail: String) {
        self.lines.push(Line {
            label: label.into(),
            pass,
            detail,
        });
    }

    fn pass(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(|l| l.pass)
    }
}

/// Trace contexts shared between criteria; the reference grid and schedule
/// are fixed, so each shape is built once.
struct Corpus {
    grid: GridSpec,
    schedule: TraceSchedule,
    shapes: Vec<(&'static str, ShapeSpec)>,
    contexts: HashMap<&'static str, TraceContext>,
}

impl Corpus {
    fn new() -> Self {
        let z = [0.0, 0.0];
        Corpus {
            grid: GridSpec::cube(2, -2.0, 2.0, H).unwrap(),
            schedule: TraceSchedule::reference(),
            shapes: vec![
                ("disk", ShapeSpec::ball(&z, 1.0)),
                ("square", ShapeSpec::axis_box(&[-0.5, -0.5], &[0.5, 0.5])),
                ("rotated_square", ShapeSpec::rotated_box(&z, &[0.5, 0.5], FRAC_PI_4)),
                ("annulus", ShapeSpec::annulus(&z, 0.5, 1.0)),
            ],
            contexts: HashMap::new(),
        }
    }

    fn shape(&self, name: &str) -> &ShapeSpec {
        &self.shapes.iter().find(|s| s.0 == name).expect("corpus shape").1
    }

    fn ctx(&mut self, name: &'static str) -> &TraceContext {
        if !self.contexts.contains_key(name) {
            let c = TraceContext::new(self.shape(name), &self.grid, &self.schedule).unwrap();
            self.contexts.insert(name, c);
        }
        &self.contexts[name]
    }

    fn field(&self, name: &str) -> DMField {
        registry(name, &self.grid, &FieldParams::default()).unwrap()
    }
}

fn perimeters(c: &mut Criterion, corpus: &mut Corpus) {
    for (name, expected, tol) in [("disk", TAU, 0.01), ("square", 4.0, 0.01), ("annulus", 3.0 * PI, 0.015)] {
        let r = perimeter(corpus.shape(name), &corpus.grid, &corpus.schedule.eps_list, corpus.schedule.kernel).unwrap();
        c.relative(format!("{name} (finest-eps mass {:.4})", r.value), r.extrapolated, expected, tol);
    }
}

fn coarea(c: &mut Criterion, corpus: &mut Corpus) {
    for name in ["disk", "square", "annulus"] {
        for s in &corpus.ctx(name).scales.clone() {
            let r = coarea_check(&s.u, 16).unwrap();
            c.at_most(format!("{name} eps={}", s.epsilon), r.residual, 0.02);
        }
    }
}

fn gauss_green(c: &mut Criterion, corpus: &mut Corpus) {
    let fields: Vec<DMField> = ["linear", "rotation", "piecewise:radial_unit", "chen_frid"]
        .iter()
        .map(|n| corpus.field(n))
        .collect();
    for shape in ["disk", "square", "rotated_square"] {
        let ctx = corpus.ctx(shape);
        for f in &fields {
            let g = gauss_green_check(f, ctx, &TestFunction::one()).unwrap();
            c.at_most(format!("{} on {shape}", f.name()), g.residual, 0.02);
            if f.name() == "chen_frid" && shape == "rotated_square" {
                c.near("chen_frid boundary flux on rotated_square", g.boundary, 0.0, 0.02);
            }
        }
    }
}

fn jump(c: &mut Criterion, corpus: &mut Corpus) {
    let f = corpus.field("piecewise:radial_unit");
    let ctx = corpus.ctx("disk");
    let j = jump_check(&f, ctx).unwrap();
    c.relative("jump integral", j.jump_integral, TAU, 0.02);
    let ti = trace_with(&f, ctx, Side::Interior).unwrap();
    c.near("interior trace total", ti.total, 0.0, 0.02);
}

fn atoms(c: &mut Criterion, corpus: &mut Corpus) {
    let spec = CauchyFluxSpec::from_field(corpus.field("radial_inv"), DEFAULT_SLACK).unwrap();
    let mut fluxes = Vec::new();
    for r in [0.5, 0.75, 1.0, 1.5] {
        let s = OrientedSurface::boundary(&ShapeSpec::ball(&[0.0, 0.0], r), &corpus.grid, &corpus.schedule).unwrap();
        let v = evaluate_flux(&spec, &s).unwrap();
        c.relative(format!("outward flux through |y| = {r}"), v, TAU, 0.02);
        fluxes.push(v);
    }
    let spread = fluxes.iter().cloned().fold(f64::MIN, f64::max) - fluxes.iter().cloned().fold(f64::MAX, f64::min);
    c.at_most("spread over radii / 2pi", spread / TAU, 0.02);
}

fn approximation(c: &mut Criterion, corpus: &mut Corpus) {
    let mu = corpus.field("linear").divergence().clone();
    for (name, _) in corpus.shapes.clone() {
        let d = convergence_diagnostics(corpus.ctx(name), &mu, None).unwrap();
        let detail = |t: &ConvergenceTable| format!("eps=0.2: {:.4e}, eps=0.05: {:.4e}", t.first_value(), t.last_value());
        c.push(format!("{name} symmetric difference"), d.symdiff.decreases_by(2.0), detail(&d.symdiff));
        c.push(format!("{name} exterior level area"), d.exterior_area.decreases_by(2.0), detail(&d.exterior_area));
    }
}

fn slice_bound(c: &mut Criterion, corpus: &mut Corpus) {
    for (name, shape) in corpus.shapes.clone() {
        let p = perimeter(&shape, &corpus.grid, &corpus.schedule.eps_list, corpus.schedule.kernel).unwrap();
        let ctx = corpus.ctx(name);
        let sup = ctx
            .scales
            .iter()
            .flat_map(|s| s.interior.iter().chain(&s.exterior))
            .filter(|(t, _)| *t > 0.1 && *t < 0.9)
            .map(|(_, m)| surface_measure(m))
            .fold(0.0, f64::max);
        c.at_most(format!("{name} sup level measure"), sup, 1.5 * p.extrapolated);
    }
}

fn inclusion(c: &mut Criterion, corpus: &mut Corpus) {
    let fat = FatnessConfig::new(0.4, 0.25).unwrap();
    let r = one_sided_inclusion(corpus.shape("disk"), &fat, &corpus.grid, &corpus.schedule).unwrap();
    let finest: Vec<f64> = corpus.schedule.eps_list.iter().rev().take(2).copied().collect();
    let tested: Vec<_> = r.checks.iter().filter(|(e, t, _)| finest.contains(e) && *t > 0.9).collect();
    let bad = tested.iter().filter(|x| !x.2).count();
    c.push(
        "disk c0=0.4: A(k,t) inside E for t > 0.9 at the two finest eps",
        !tested.is_empty() && bad == 0,
        format!("{} pairs tested, {bad} failed", tested.len()),
    );
    let cusp = one_sided_inclusion(&cusp_shape(), &fat, &corpus.grid, &corpus.schedule);
    let detail = match &cusp {
        Err(e) => e.to_string(),
        Ok(r) => format!("accepted, min exterior density {}", r.min_exterior_density),
    };
    c.push("cusp raises FatnessViolated", matches!(cusp, Err(Error::FatnessViolated { .. })), detail);
}

fn reconstruction(c: &mut Criterion, corpus: &mut Corpus) {
    let lat = Lattice::coarsen(&corpus.grid, 16, 8).unwrap();
    let lin = corpus.field("linear");
    let spec = CauchyFluxSpec::from_field(lin.clone(), DEFAULT_SLACK).unwrap();
    let rec = slice_reconstruct(&spec, &lat).unwrap();
    c.at_most("linear L1 error", reconstruction_l1_error(&lin, &rec, |_| false), 0.03);
    let back = CauchyFluxSpec::from_field(reconstructed_field(&rec, "reconstructed").unwrap(), DEFAULT_SLACK).unwrap();
    c.at_most("face-flux round trip", face_flux_agreement(&spec, &back, &lat).unwrap(), 0.03);

    let constant = CauchyFluxSpec::from_field(corpus.field("constant"), DEFAULT_SLACK).unwrap();
    let rec = slice_reconstruct(&constant, &lat).unwrap();
    let worst = (0..lat.grid.len())
        .map(|k| {
            let v = rec.at(&lat.grid.multi(k));
            (v[0] - 1.0).abs().max(v[1].abs())
        })
        .fold(0.0, f64::max);
    c.at_most("constant field max deviation", worst, 1e-10);
}

fn production(c: &mut Criterion, corpus: &mut Corpus) {
    let lat = Lattice::coarsen(&corpus.grid, 16, 8).unwrap();
    for name in ["rotation", "constant", "chen_frid"] {
        let spec = CauchyFluxSpec::from_field(corpus.field(name), DEFAULT_SLACK).unwrap();
        let r = production_measure(&spec, &lat).unwrap();
        c.at_most(format!("{name} max |P|"), r.max_abs_production, 1e-3 * spec.sup_scale() * H);
    }
    let spec = CauchyFluxSpec::from_field(corpus.field("linear"), DEFAULT_SLACK).unwrap();
    let r = production_measure(&spec, &lat).unwrap();
    let vol = lat.cube_volume();
    let worst = r.per_cube.iter().map(|p| (p / vol - 2.0).abs() / 2.0).fold(0.0, f64::max);
    c.at_most("linear max |P(I)/|I| - 2| / 2", worst, 0.02);
}

fn burgers(c: &mut Criterion, _: &mut Corpus) {
    let law = ScalarLaw::burgers();
    let shock = solve_riemann(&law, 1.0, 0.0).unwrap();
    match shock.wave {
        Wave::Shock { speed } => c.push("shock speed", speed == 0.5, format!("{speed} == 0.5")),
        w => c.push("shock speed", false, format!("{w:?}")),
    }
    let quadratic = make_entropy_pair(&law, Entropy::quadratic());
    let window = SpaceTimeBox::new(0.0, 1.0, -2.0, 2.0).unwrap();
    let closed = entropy_dissipation(&shock, &quadratic, &window).unwrap().eval_total();
    c.relative("closed-form bracket total", closed, -1.0 / 12.0, 1e-3);

    let st = SpaceTime::reference().unwrap();
    let seg = shock_segment_dissipation(&shock, &quadratic, 1.0, &st).unwrap();
    c.relative("space-time trace fluxes F(S) + F(-S)", seg.fluxes.sum, -1.0 / 12.0, 0.05);

    let fan = solve_riemann(&law, 0.0, 1.0).unwrap();
    for pair in standard_entropies().iter().map(|e| make_entropy_pair(&law, e.clone())) {
        let total = entropy_dissipation(&fan, &pair, &window).unwrap().eval_total();
        c.near(format!("rarefaction dissipation ({})", pair.name()), total, 0.0, 1e-3);
    }
    for sign in [1.0, -1.0] {
        let pair = make_entropy_pair(&law, Entropy::linear(sign));
        let total = entropy_dissipation(&shock, &pair, &window).unwrap().eval_total();
        c.near(format!("shock dissipation ({})", pair.name()), total, 0.0, 1e-12);
    }

    let boxes = [
        window,
        SpaceTimeBox::new(0.5, 1.5, 0.0, 2.0).unwrap(),
        SpaceTimeBox::new(0.0, 1.0, 2.0, 3.0).unwrap(),
    ];
    let pairs: Vec<_> = standard_entropies().iter().map(|e| make_entropy_pair(&law, e.clone())).collect();
    let sols: [(&str, &EntropySolution1D); 2] = [("shock", &shock), ("rarefaction", &fan)];
    for (label, sol) in sols {
        let r = lax_check(sol, &pairs, &boxes);
        let detail = match &r {
            Ok(rep) => format!("{} values, max {:.3e}", rep.values.len(), rep.max_value),
            Err(e) => e.to_string(),
        };
        c.push(format!("Lax sign on the {label}, 5 entropies"), r.is_ok(), detail);
    }
}

fn consistency(c: &mut Criterion, corpus: &mut Corpus) {
    let fields: Vec<DMField> = ["linear", "rotation", "constant"].iter().map(|n| corpus.field(n)).collect();
    for shape in ["disk", "square", "rotated_square"] {
        let ctx = corpus.ctx(shape);
        for f in &fields {
            let r = classical_consistency(f, ctx).unwrap();
            let dev = r.max_interior_deviation.max(r.max_exterior_deviation);
            c.at_most(format!("{} on {shape}: per-facet |density - F.nu|", f.name()), dev, r.facet_tolerance);
            c.at_most(format!("{} on {shape}: sigma_i vs sigma_e", f.name()), r.total_gap, 0.02);
        }
    }
}

type Run = fn(&mut Criterion, &mut Corpus);

#[test]
fn acceptance() {
    let criteria: [(&str, Run); 12] = [
        ("perimeter", perimeters),
        ("coarea identity", coarea),
        ("Gauss-Green residual", gauss_green),
        ("jump formula", jump),
        ("atom detection", atoms),
        ("approximation diagnostics", approximation),
        ("slice bound", slice_bound),
        ("one-sided inclusion", inclusion),
        ("flux reconstruction", reconstruction),
        ("production", production),
        ("Burgers entropy dissipation", burgers),
        ("classical consistency", consistency),
    ];
    let mut corpus = Corpus::new();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let mut c = Criterion::default();
        let start = Instant::now();
        run(&mut c, &mut corpus);
        let took = start.elapsed();
        c.push("wall clock", took <= BUDGET, format!("{:.1} s <= {} s", took.as_secs_f64(), BUDGET.as_secs()));
        println!("{} {:>2}. {name}", if c.pass() { "PASS" } else { "FAIL" }, i + 1);
        for l in &c.lines {
            println!("       [{}] {}: {}", if l.pass { "ok" } else { "!!" }, l.label, l.detail);
        }
        if !c.pass() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn lax_check_reports_a_witness_for_an_inadmissible_shock() {
    let law = ScalarLaw::burgers();
    let forced = EntropySolution1D::forced_shock(&law, 0.0, 1.0).unwrap();
    let pairs = [make_entropy_pair(&law, Entropy::quadratic())];
    let bx = [SpaceTimeBox::new(0.0, 1.0, -1.0, 2.0).unwrap()];
    assert!(matches!(lax_check(&forced, &pairs, &bx), Err(Error::LaxViolation { .. })));
}
