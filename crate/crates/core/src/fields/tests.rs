use super::*;
use crate::grid::Mask;
use crate::point::dist;
use crate::traces::TraceSchedule;
use std::f64::consts::TAU;

fn grid(h: f64) -> GridSpec {
    GridSpec::cube(2, -2.0, 2.0, h).unwrap()
}

fn params() -> FieldParams {
    FieldParams::default()
}

#[test]
fn analytic_fields_pass_the_divergence_spot_check() {
    let g = grid(1.0 / 32.0);
    let lin = make_analytic("lin", &g, |p| [p[0], p[1], 0.0], |_| 2.0, 3.0, 1).unwrap();
    assert_eq!(lin.divergence().ac().unwrap().values()[17], 2.0);
    make_analytic("rot", &g, |p| [-p[1], p[0], 0.0], |_| 0.0, 3.0, 1).unwrap();
    let err = make_analytic("bad", &g, |p| [p[0], p[1], 0.0], |_| 3.0, 3.0, 1).unwrap_err();
    assert!(matches!(err, Error::DivergenceMismatch { declared, .. } if declared == 3.0));
}

#[test]
fn declared_bound_is_enforced() {
    let g = grid(1.0 / 32.0);
    assert!(make_analytic("lin", &g, |p| [p[0], p[1], 0.0], |_| 2.0, 1.0, 1).is_err());
}

#[test]
fn chen_frid_values_and_divergence() {
    let g = grid(1.0 / 32.0);
    let f = make_chen_frid(&g).unwrap();
    let v = f.eval(&[1.0, 0.0, 0.0]);
    assert_eq!(v, [1f64.sin(), 1f64.sin(), 0.0]);
    assert_eq!(f.eval(&[0.3, 0.3, 0.0]), [0.0; 3]);
    let boxed = Mask::from_shape(&ShapeSpec::axis_box(&[-1.0, -0.5], &[0.7, 1.2]), &g);
    assert_eq!(f.divergence().eval(&boxed).unwrap(), 0.0);
    // Centered differences away from the singular line see no divergence.
    let step = 1e-6;
    for p in [[0.9, 0.1, 0.0], [-0.4, 0.6, 0.0], [1.3, -1.1, 0.0]] {
        let dx = (f.eval(&[p[0] + step, p[1], 0.0])[0] - f.eval(&[p[0] - step, p[1], 0.0])[0]) / (2.0 * step);
        let dy = (f.eval(&[p[0], p[1] + step, 0.0])[1] - f.eval(&[p[0], p[1] - step, 0.0])[1]) / (2.0 * step);
        assert!((dx + dy).abs() < 1e-6);
    }
}

#[test]
fn radial_unit_jump_and_bulk() {
    let g = grid(1.0 / 128.0);
    let f = registry("radial_unit", &g, &params()).unwrap();
    let div = f.divergence();
    let part = &div.surfaces()[0];
    for (fc, d) in part.mesh.facets.iter().zip(&part.density) {
        assert!((dist(&fc.midpoint, &[0.0; 3]) - 1.0).abs() < 1e-3);
        assert!((d - 1.0).abs() < 1e-4, "density {d}");
    }
    assert!((part.mesh.area() - TAU).abs() < 1e-3 * TAU);
    let ac = div.ac().unwrap();
    let idx = g.locate(&[1.5, 0.3, 0.0]).unwrap();
    let c = g.center(&idx);
    assert!((ac.at(&idx) - 1.0 / dist(&c, &[0.0; 3])).abs() < 1e-12);
    assert_eq!(ac.at(&g.locate(&[0.2, 0.1, 0.0]).unwrap()), 0.0);
}

#[test]
fn continuous_piecewise_field_has_no_jump() {
    let g = grid(1.0 / 64.0);
    let f = registry("piecewise:radial_clamped", &g, &params()).unwrap();
    let part = &f.divergence().surfaces()[0];
    assert!(!part.density.is_empty());
    assert!(part.density.iter().all(|d| d.abs() < 1e-6));
}

#[test]
fn radial_inv_carries_unit_circle_flux() {
    let g = grid(1.0 / 128.0);
    let f = registry("radial_inv", &g, &params()).unwrap();
    let part = &f.divergence().surfaces()[0];
    let flux = part.mesh.integrate(|i, _| part.density[i]);
    assert!((flux - TAU).abs() < 0.01 * TAU, "flux {flux}");
    assert!(part.density.iter().all(|d| (d - 4.0).abs() < 1e-3));
    assert!((f.sup_bound() - 4.0).abs() < 1e-12);
}

#[test]
fn flat_jump_interface_is_the_clipped_line() {
    let g = grid(1.0 / 64.0);
    let f = registry("piecewise:flat_jump", &g, &params()).unwrap();
    let part = &f.divergence().surfaces()[0];
    // Away from the corners of the clip box the interface is the line itself.
    for (fc, d) in part.mesh.facets.iter().zip(&part.density) {
        if fc.midpoint[0].abs() < 1.5 {
            assert!(fc.midpoint[1].abs() < 1e-9);
            assert!((d - 3.0).abs() < 1e-9);
        }
    }
    let on_segment = part
        .mesh
        .integrate(|i, fc| if fc.midpoint[0].abs() < 1.0 { part.density[i] } else { 0.0 });
    assert!((on_segment - 6.0).abs() < 0.05);
}

#[test]
fn jump_formula_is_additive() {
    let g = grid(1.0 / 64.0);
    for name in ["radial_unit", "radial_inv", "piecewise:flat_jump"] {
        let f = registry(name, &g, &params()).unwrap();
        let div = f.divergence();
        let bulk = div.ac().unwrap().integral();
        let iface: f64 = div
            .surfaces()
            .iter()
            .map(|p| p.mesh.integrate(|i, _| p.density[i]))
            .sum();
        let total = div.eval_total();
        assert!((total - bulk - iface).abs() <= 1e-6 * total.abs().max(1.0), "{name}");
    }
}

#[test]
fn overlapping_regions_are_rejected() {
    let g = grid(1.0 / 32.0);
    let zero = |r: ShapeSpec| Piece {
        region: r,
        field: Arc::new(|_: &Point| [0.0; 3]),
        divergence: Arc::new(|_: &Point| 0.0),
    };
    let a = ShapeSpec::ball(&[0.0, 0.0], 1.0);
    let b = ShapeSpec::ball(&[0.5, 0.0], 1.0);
    let err = make_piecewise("x", &g, vec![zero(a.clone()), zero(ShapeSpec::complement(b))], 0.0, 0.1).unwrap_err();
    assert!(matches!(err, Error::Partition(_)));
    let err = make_piecewise("x", &g, vec![zero(a)], 0.0, 0.1).unwrap_err();
    assert!(matches!(err, Error::Partition(_)));
}

#[test]
fn registry_rejects_unknown_names() {
    let g = grid(1.0 / 32.0);
    assert!(registry("nope", &g, &params()).is_err());
    assert!(registry("piecewise:nope", &g, &params()).is_err());
}

#[test]
fn sampled_fields_round_trip_through_files() {
    let g = grid(1.0 / 32.0);
    let v = VectorGridField::from_fn(&g, |p| [p[0], 2.0 * p[1], 0.0]);
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("f");
    crate::grid::io::write_vector(&v, &stem).unwrap();
    let f = registry(&format!("sampled:{}", stem.display()), &g, &params()).unwrap();
    let p = [0.31, -0.47, 0.0];
    let e = f.eval(&p);
    assert!((e[0] - 0.31).abs() < 1e-12 && (e[1] + 0.94).abs() < 1e-12);
    let div = f.divergence().ac().unwrap();
    assert!((div.at(&g.locate(&p).unwrap()) - 3.0).abs() < 1e-9);
}

#[test]
fn constant_weight_leaves_divergence_unchanged() {
    let g = grid(1.0 / 64.0);
    let f = registry("radial_unit", &g, &params()).unwrap();
    let w = BVWeight::constant(&g, 1.0, &[0.4, 0.2, 0.1]).unwrap();
    let out = product_rule(&w, &f).unwrap();
    let (a, b) = (out.field.divergence(), f.divergence());
    assert_eq!(a.ac().unwrap().values(), b.ac().unwrap().values());
    assert_eq!(a.surfaces()[0].mesh, b.surfaces()[0].mesh);
    for (x, y) in a.surfaces()[0].density.iter().zip(&b.surfaces()[0].density) {
        assert!((x - y).abs() < 1e-14);
    }
    assert_eq!(out.field.eval(&[1.5, 0.0, 0.0]), f.eval(&[1.5, 0.0, 0.0]));
}

#[test]
fn smooth_weight_follows_the_classical_product_rule() {
    let g = grid(1.0 / 64.0);
    let f = registry("linear", &g, &params()).unwrap();
    let w = BVWeight::from_fn(&g, |p| p[0].clamp(-1.0, 1.0), &[0.4, 0.2, 0.1]).unwrap();
    let out = product_rule(&w, &f).unwrap();
    let ac = out.field.divergence().ac().unwrap();
    let reach = 0.1 + 2.0 * g.spacing();
    let mut worst: f64 = 0.0;
    for k in 0..g.len() {
        let c = g.center_flat(k);
        let away = (c[0].abs() < 1.0 - reach) && c[0].abs() < 2.0 - reach && c[1].abs() < 2.0 - reach;
        if away {
            let exact = 2.0 * c[0] + c[0];
            worst = worst.max((ac.values()[k] - exact).abs());
        }
    }
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn indicator_weight_concentrates_on_the_circle() {
    let g = grid(1.0 / 128.0);
    let f = registry("constant", &g, &params()).unwrap();
    let disk = ShapeSpec::ball(&[0.0, 0.0], 1.0);
    let w = BVWeight::indicator(&disk, &g, &[0.4, 0.2, 0.1]).unwrap();
    let out = product_rule(&w, &f).unwrap();
    assert!(out.field.divergence().eval_total().abs() < 1e-9);
    // Row by row, the slice of ∂₁g_k integrates to ±1 at each crossing, so
    // the total variation tends to twice the diameter.
    let tv = out.table.means();
    assert!(tv.windows(2).all(|w| (w[1] - 4.0).abs() < (w[0] - 4.0).abs()));
    assert!((tv[2] - 4.0).abs() < 0.02 * 4.0, "{tv:?}");
    let wt = w.table().means();
    assert!((wt[2] - TAU).abs() < 0.02 * TAU);
}

#[test]
fn extension_by_zero_balances() {
    let g = grid(1.0 / 256.0);
    let sched = TraceSchedule::new(vec![0.2, 0.1, 0.05], 8);
    let disk = ShapeSpec::ball(&[0.0, 0.0], 1.0);

    let c = registry("constant", &g, &params()).unwrap();
    let ext = extend_by_zero(&c, &disk, &sched).unwrap();
    let div = ext.divergence();
    assert!(div.eval_total().abs() < 1e-3);
    let part = &div.surfaces()[0];
    let worst = part
        .mesh
        .facets
        .iter()
        .zip(&part.density)
        .map(|(fc, d)| (d - fc.normal[0]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "worst {worst}");
    assert_eq!(ext.eval(&[1.5, 0.0, 0.0]), [0.0; 3]);

    let lin = registry("linear", &g, &params()).unwrap();
    let ext = extend_by_zero(&lin, &disk, &sched).unwrap();
    let div = ext.divergence();
    let u = Mask::from_shape(&disk, &g);
    let inside = div.ac().unwrap().values().iter().zip(u.cells()).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>()
        * g.cell_volume();
    let surface = div.surfaces()[0].mesh.integrate(|i, _| div.surfaces()[0].density[i]);
    assert!((inside - TAU).abs() < 0.02 * TAU);
    assert!((surface + TAU).abs() < 0.02 * TAU, "{surface}");
    assert!(div.eval_total().abs() < 2e-3, "{}", div.eval_total());
    let bound = lin.divergence().tv(&u).unwrap() + lin.sup_bound() * TAU * 1.05;
    assert!(div.tv_total() <= bound);

    let zero = registry("zero", &g, &params()).unwrap();
    assert_eq!(extend_by_zero(&zero, &disk, &sched).unwrap().divergence().tv_total(), 0.0);
}
