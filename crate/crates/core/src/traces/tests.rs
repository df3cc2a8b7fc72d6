use super::*;
use crate::fields::{registry, FieldParams};
use crate::grid::Mask;
use std::f64::consts::{E, FRAC_PI_4, TAU};
use std::sync::OnceLock;

fn grid(h: f64) -> GridSpec {
    GridSpec::cube(2, -2.0, 2.0, h).unwrap()
}

fn disk() -> ShapeSpec {
    ShapeSpec::ball(&[0.0, 0.0], 1.0)
}

fn field(name: &str, g: &GridSpec) -> DMField {
    registry(name, g, &FieldParams::default()).unwrap()
}

/// Shared disk context at h = 1/128.
fn disk_ctx() -> &'static TraceContext {
    static CTX: OnceLock<TraceContext> = OnceLock::new();
    CTX.get_or_init(|| TraceContext::new(&disk(), &grid(1.0 / 128.0), &TraceSchedule::reference()).unwrap())
}

#[test]
fn schedule_validation() {
    let g = grid(1.0 / 64.0);
    assert!(TraceSchedule::reference().validate(&g).is_ok());
    assert!(TraceSchedule::new(vec![0.1, 0.2], 8).validate(&g).is_err());
    assert!(TraceSchedule::new(vec![0.2, 0.1], 3).validate(&g).is_err());
    assert!(matches!(
        TraceSchedule::new(vec![0.2, 0.01], 8).validate(&g),
        Err(Error::Resolution { .. })
    ));
    let s = TraceSchedule::reference();
    assert_eq!(s.interior_band(), (0.55, 0.95));
    assert_eq!(s.exterior_band(), (0.05, 0.45));
}

#[test]
fn sigma_kt_obeys_the_divergence_theorem_on_approximants() {
    let g = grid(1.0 / 128.0);
    let lin = field("linear", &g);
    let sigma = sigma_kt(&lin, &disk(), 0.05, 0.7, KernelKind::SmoothBump).unwrap();
    let chi = rasterize(&disk(), &g).unwrap();
    let u = mollify(&chi, &MollifierKernel::smooth_bump(0.05).unwrap()).unwrap();
    let a = u.above(0.7);
    let expected = -lin.divergence().eval(&a).unwrap();
    let got = sigma.eval_total();
    assert!((got - expected).abs() < 0.02 * expected.abs(), "{got} vs {expected}");

    let rot = field("rotation", &g);
    assert!(sigma_kt(&rot, &disk(), 0.05, 0.7, KernelKind::SmoothBump).unwrap().eval_total().abs() < 1e-3);
}

#[test]
fn chen_frid_flux_vanishes_on_the_rotated_square() {
    let g = grid(1.0 / 128.0);
    let cf = field("chen_frid", &g);
    let sq = ShapeSpec::rotated_box(&[0.0, 0.0], &[0.5, 0.5], FRAC_PI_4);
    for (eps, t) in [(0.2, 0.6), (0.1, 0.9), (0.05, 0.3)] {
        let s = sigma_kt(&cf, &sq, eps, t, KernelKind::SmoothBump).unwrap();
        assert!(s.eval_total().abs() < 0.02, "{eps} {t}: {}", s.eval_total());
    }
}

#[test]
fn linear_field_interior_trace_on_disk() {
    let ctx = disk_ctx();
    let lin = field("linear", &ctx.grid);
    let tr = trace_with(&lin, ctx, Side::Interior).unwrap();
    assert!(tr.density.iter().all(|d| (d + 1.0).abs() < 0.06));
    assert!((tr.region_mass - TAU).abs() < 0.02 * TAU);
    assert!((tr.limit_total + TAU).abs() < 0.02 * TAU, "{}", tr.limit_total);
    assert!(tr.limit_residual < 0.02 * TAU);
    assert!(tr.unassigned.abs() < 1e-12);
    // The finest-ε totals approach the limit monotonically.
    let totals: Vec<f64> = tr.scales.iter().map(|s| s.total).collect();
    assert!(totals.windows(2).all(|w| (w[1] + TAU).abs() < (w[0] + TAU).abs()));
    assert!(tr.sup_density <= 1.05 * lin.sup_bound());
}

#[test]
fn interior_trace_does_not_see_the_outside() {
    let ctx = disk_ctx();
    let f = field("radial_unit", &ctx.grid);
    let ti = trace_with(&f, ctx, Side::Interior).unwrap();
    let te = trace_with(&f, ctx, Side::Exterior).unwrap();
    assert!(ti.density.iter().all(|d| d.abs() < 0.02));
    assert!(ti.total.abs() < 0.02);
    assert!((te.total + TAU).abs() < 0.02 * TAU, "{}", te.total);
    let mean = te.total / ctx.perimeter();
    assert!((mean + 1.0).abs() < 0.02);
}

#[test]
fn continuous_field_traces_agree() {
    let ctx = disk_ctx();
    let lin = field("linear", &ctx.grid);
    let ti = trace_with(&lin, ctx, Side::Interior).unwrap();
    let te = trace_with(&lin, ctx, Side::Exterior).unwrap();
    assert!((ti.limit_total - te.limit_total).abs() < 0.02 * TAU);
    let zero = field("zero", &ctx.grid);
    let tz = trace_with(&zero, ctx, Side::Exterior).unwrap();
    assert!(tz.density.iter().all(|&d| d == 0.0));
    assert_eq!(tz.total, 0.0);
}

#[test]
fn gauss_green_with_constant_and_gaussian_test_functions() {
    let ctx = disk_ctx();
    let lin = field("linear", &ctx.grid);
    let one = gauss_green_check(&lin, ctx, &TestFunction::one()).unwrap();
    assert!(one.residual < 0.02, "{one:?}");
    assert!(one.limit_residual < one.residual);

    // Closed forms on the unit disk for φ = exp(-|y|²), F = y:
    // ∫ 2φ = 2π(1 − 1/e), ∫ F·∇φ = −2π(1 − 2/e), ∮ φ F·ν = −2π/e.
    let g = gauss_green_check(&lin, ctx, &TestFunction::gaussian()).unwrap();
    assert!(g.residual < 0.02);
    let bulk = TAU * (1.0 - 1.0 / E);
    let grad = -TAU * (1.0 - 2.0 / E);
    let bdry = -TAU / E;
    assert!((g.bulk_divergence - bulk).abs() < 0.01 * bulk, "{}", g.bulk_divergence);
    assert!((g.bulk_gradient - grad).abs() < 0.02 * grad.abs(), "{}", g.bulk_gradient);
    assert!((g.boundary - bdry).abs() < 0.05 * bdry.abs(), "{}", g.boundary);
}

#[test]
fn jump_of_radial_unit_field() {
    let ctx = disk_ctx();
    let f = field("radial_unit", &ctx.grid);
    let j = jump_check(&f, ctx).unwrap();
    assert!((j.jump_integral - TAU).abs() < 0.02 * TAU, "{j:?}");
    assert!(j.residual < 0.02, "{j:?}");
}

#[test]
fn continuous_field_has_no_jump() {
    let ctx = disk_ctx();
    let f = field("piecewise:radial_clamped", &ctx.grid);
    let j = jump_check(&f, ctx).unwrap();
    assert!(j.limit_relative_jump < 0.02, "{j:?}");
}

#[test]
fn constant_jump_across_a_segment() {
    let g = grid(1.0 / 128.0);
    let e = ShapeSpec::axis_box(&[-1.0, -1.0], &[1.0, 0.0]);
    let ctx = TraceContext::new(&e, &g, &TraceSchedule::reference()).unwrap();
    let f = field("piecewise:flat_jump", &g);
    let j = jump_check(&f, &ctx).unwrap();
    assert!((j.jump_integral - 6.0).abs() < 0.02 * 6.0, "{j:?}");
    assert!(j.residual < 0.02, "{j:?}");
}

#[test]
fn classical_consistency_for_continuous_fields() {
    let ctx = disk_ctx();
    for name in ["linear", "rotation"] {
        let r = classical_consistency(&field(name, &ctx.grid), ctx).unwrap();
        assert!(r.pass, "{name}: {r:?}");
    }
    let g = grid(1.0 / 128.0);
    let sq = ShapeSpec::axis_box(&[-0.5, -0.5], &[0.5, 0.5]);
    let ctx = TraceContext::new(&sq, &g, &TraceSchedule::reference()).unwrap();
    let r = classical_consistency(&field("constant", &g), &ctx).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.regular_facets > ctx.boundary.len() / 2);
}

#[test]
fn trace_totals_are_stable_across_the_band() {
    let ctx = disk_ctx();
    let s = t_stability(&field("linear", &ctx.grid), ctx);
    assert_eq!(s.totals.len(), 8);
    assert!(s.variation < 0.02, "{s:?}");
}

#[test]
fn traces_respect_the_field_bound() {
    let ctx = disk_ctx();
    for name in ["linear", "rotation", "chen_frid", "constant", "radial_unit", "radial_inv"] {
        let f = field(name, &ctx.grid);
        let t = trace_with(&f, ctx, Side::Interior).unwrap();
        assert!(t.sup_density <= 1.05 * f.sup_bound(), "{name}: {} > {}", t.sup_density, f.sup_bound());
    }
}

#[test]
fn fat_sets_satisfy_one_sided_inclusion() {
    let g = grid(1.0 / 128.0);
    let s = TraceSchedule::reference();
    let r = one_sided_inclusion(&disk(), &FatnessConfig::new(0.4, 0.25).unwrap(), &g, &s).unwrap();
    assert!((r.c_tilde - 0.1).abs() < 1e-15);
    assert!(r.smallest_passing_t <= 0.9 + 1e-6);
    assert!(r.min_exterior_density >= 0.4);
    let sq = ShapeSpec::axis_box(&[-0.5, -0.5], &[0.5, 0.5]);
    let r = one_sided_inclusion(&sq, &FatnessConfig::new(0.2, 0.25).unwrap(), &g, &s).unwrap();
    assert!(r.smallest_passing_t <= 0.95 + 1e-6);
}

#[test]
fn cusp_violates_fatness() {
    let g = grid(1.0 / 64.0);
    let err = one_sided_inclusion(&cusp_shape(), &FatnessConfig::new(0.45, 0.25).unwrap(), &g, &TraceSchedule::reference())
        .unwrap_err();
    match err {
        Error::FatnessViolated { point, density, .. } => {
            assert!((point[0] - 0.2).abs() < 1e-6 && point[1].abs() < 1e-6);
            assert!(density < 0.1);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn diagnostics_shrink_with_epsilon() {
    let ctx = disk_ctx();
    let leb = SignedMeasure::lebesgue(&ctx.grid);
    let d = convergence_diagnostics(ctx, &leb, None).unwrap();
    assert!(d.symdiff.decreases_by(2.0), "{:?}", d.symdiff.means());
    assert!(d.exterior_area.decreases_by(2.0));

    let surf = SignedMeasure::zero(&ctx.grid)
        .with_surface(ctx.boundary.clone(), vec![1.0; ctx.boundary.len()])
        .unwrap();
    let d = convergence_diagnostics(ctx, &surf, Some(&field("linear", &ctx.grid))).unwrap();
    assert!(d.exterior_area.last_value() < 0.05 * TAU);
    assert!(d.exterior_flux.unwrap().last_value() < 0.05 * TAU);

    let atom = leb.with_atom([0.1, 0.2, 0.0], 1.0);
    assert!(matches!(convergence_diagnostics(ctx, &atom, None), Err(Error::AtomRejected { dim: 2 })));
}

#[test]
fn diagnostics_add_over_separated_components() {
    let g = grid(1.0 / 128.0);
    let s = TraceSchedule::reference();
    let a = ShapeSpec::ball(&[-1.0, 0.0], 0.5);
    let b = ShapeSpec::ball(&[1.0, 0.0], 0.5);
    let both = ShapeSpec::union(vec![a.clone(), b.clone()]);
    let leb = SignedMeasure::lebesgue(&g);
    let run = |sh: &ShapeSpec| {
        let ctx = TraceContext::new(sh, &g, &s).unwrap();
        convergence_diagnostics(&ctx, &leb, None).unwrap().symdiff.means()
    };
    let (da, db, dab) = (run(&a), run(&b), run(&both));
    for i in 0..3 {
        assert!((da[i] + db[i] - dab[i]).abs() <= 1e-6 * dab[i].abs().max(1e-12), "{da:?} {db:?} {dab:?}");
    }
}

#[test]
fn region_masks_follow_the_proxy_levels() {
    let ctx = disk_ctx();
    let m: Mask = ctx.finest().u.above(E1_LEVEL);
    let c = ctx.grid.center_flat(ctx.grid.flat(&ctx.grid.locate(&[0.2, 0.3, 0.0]).unwrap()));
    assert!(m.contains_point(&c) && ctx.in_interior(&c) && ctx.in_closure(&c));
    assert!(!ctx.in_closure(&[1.1, 0.0, 0.0]));
}
