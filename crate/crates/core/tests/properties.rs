//! Randomized invariants across modules, on coarse grids so each case stays
//! cheap.

use std::sync::OnceLock;

use divtrace::conservation::{
    dissipation_total, entropy_dissipation, lax_values, make_entropy_pair, solve_riemann_at, Entropy, ScalarLaw,
    SpaceTimeBox,
};
use divtrace::fields::{registry, DMField, FieldParams};
use divtrace::flux::{block_production, cube_production, CauchyFluxSpec, Lattice, DEFAULT_SLACK};
use divtrace::geometry::extract_level_set;
use divtrace::grid::{mollify, rasterize, GridSpec, KernelKind, MollifierKernel, ShapeSpec};
use divtrace::point::dot;
use proptest::prelude::*;

fn coarse() -> GridSpec {
    GridSpec::cube(2, -2.0, 2.0, 1.0 / 32.0).unwrap()
}

fn shape() -> impl Strategy<Value = ShapeSpec> {
    let ball = (-0.5..0.5f64, -0.5..0.5f64, 0.4..1.0f64).prop_map(|(x, y, r)| ShapeSpec::ball(&[x, y], r));
    let rect = (-0.5..0.5f64, -0.5..0.5f64, 0.3..0.9f64, 0.3..0.9f64, 0.0..1.6f64)
        .prop_map(|(x, y, a, b, th)| ShapeSpec::rotated_box(&[x, y], &[a, b], th));
    prop_oneof![ball, rect]
}

fn kernel() -> impl Strategy<Value = MollifierKernel> {
    (prop_oneof![Just(KernelKind::SmoothBump), Just(KernelKind::Plateau)], 0.1..0.4f64)
        .prop_map(|(k, e)| MollifierKernel::new(k, e).unwrap())
}

fn corpus_fields() -> &'static Vec<DMField> {
    static F: OnceLock<Vec<DMField>> = OnceLock::new();
    F.get_or_init(|| {
        let g = GridSpec::cube(2, -2.0, 2.0, 1.0 / 64.0).unwrap();
        ["constant", "linear", "rotation", "chen_frid", "radial_unit", "radial_inv", "piecewise:radial_clamped"]
            .iter()
            .map(|n| registry(n, &g, &FieldParams::default()).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mollification_keeps_mass_and_range(s in shape(), k in kernel()) {
        let chi = rasterize(&s, &coarse()).unwrap();
        let u = mollify(&chi, &k).unwrap();
        let (m0, m1): (f64, f64) = (chi.values().iter().sum(), u.values().iter().sum());
        prop_assert!((m1 - m0).abs() <= 1e-8 * m0);
        prop_assert!(u.values().iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn level_set_normals_point_into_convex_approximants(s in shape(), k in kernel(), t in 0.2..0.8f64) {
        let u = mollify(&rasterize(&s, &coarse()).unwrap(), &k).unwrap();
        let mesh = extract_level_set(&u, t).unwrap();
        prop_assume!(!mesh.is_empty());
        let g = u.grid();
        let (mut c, mut n) = ([0.0; 3], 0.0);
        for i in (0..g.len()).filter(|&i| u.values()[i] > t) {
            let p = g.center_flat(i);
            c[0] += p[0];
            c[1] += p[1];
            n += 1.0;
        }
        let centroid = [c[0] / n, c[1] / n, 0.0];
        let inward = mesh
            .facets
            .iter()
            .filter(|f| {
                let d = [centroid[0] - f.midpoint[0], centroid[1] - f.midpoint[1], 0.0];
                dot(&f.normal, &d) > 0.0
            })
            .count();
        prop_assert!(inward as f64 >= 0.99 * mesh.len() as f64, "{inward} of {}", mesh.len());
    }

    #[test]
    fn fields_respect_their_bounds(x in -2.0..2.0f64, y in -2.0..2.0f64) {
        for f in corpus_fields() {
            let v = f.eval(&[x, y, 0.0]);
            prop_assert!(v[0].hypot(v[1]) <= f.sup_bound() * (1.0 + 1e-12), "{} at ({x}, {y})", f.name());
        }
    }

    #[test]
    fn production_is_additive_over_blocks(i in 0usize..14, j in 0usize..14, w in 0usize..3, h in 0usize..3) {
        let g = GridSpec::cube(2, -2.0, 2.0, 1.0 / 64.0).unwrap();
        let lat = Lattice::coarsen(&g, 16, 8).unwrap();
        let f = &corpus_fields()[2];
        let spec = CauchyFluxSpec::from_field(f.clone(), DEFAULT_SLACK).unwrap();
        let (lo, hi) = ([i, j, 0], [(i + w).min(15), (j + h).min(15), 0]);
        let whole = block_production(&spec, &lat, &lo, &hi).unwrap();
        let mut parts = 0.0;
        for idx in lat.grid.indices() {
            if (0..2).all(|a| idx[a] >= lo[a] && idx[a] <= hi[a]) {
                parts += cube_production(&spec, &lat, lat.grid.flat(&idx)).unwrap();
            }
        }
        prop_assert!((whole - parts).abs() < 1e-12);
    }

    #[test]
    fn linear_entropies_are_conserved(ul in -2.0..2.0f64, ur in -2.0..2.0f64, x0 in -1.0..1.0f64) {
        let law = ScalarLaw::burgers();
        let sol = solve_riemann_at(&law, ul, ur, x0).unwrap();
        let bx = SpaceTimeBox::new(0.0, 1.0, -2.0, 2.0).unwrap();
        for sign in [1.0, -1.0] {
            let pair = make_entropy_pair(&law, Entropy::linear(sign));
            prop_assert!(dissipation_total(&sol, &pair, &bx).abs() < 1e-12);
        }
    }

    #[test]
    fn admissible_solutions_dissipate(
        ul in -2.0..2.0f64,
        ur in -2.0..2.0f64,
        k in -1.5..1.5f64,
        t0 in 0.0..1.0f64,
        x0 in -2.0..1.0f64,
    ) {
        let law = ScalarLaw::burgers();
        let sol = solve_riemann_at(&law, ul, ur, 0.0).unwrap();
        let pairs: Vec<_> = [Entropy::quadratic(), Entropy::kruzkov(k), Entropy::smooth_abs(k, 0.1), Entropy::quartic()]
            .into_iter()
            .map(|e| make_entropy_pair(&law, e))
            .collect();
        let bx = SpaceTimeBox::new(t0, t0 + 1.0, x0, x0 + 1.5).unwrap();
        let r = lax_values(&sol, &pairs, &[bx]).unwrap();
        prop_assert!(r.values.iter().all(|v| v.value <= 1e-12), "{:?}", r.worst);
    }

    #[test]
    fn shock_dissipation_is_linear_in_time(ul in 0.5..2.0f64, drop in 0.2..2.0f64, t in 0.1..2.0f64) {
        let law = ScalarLaw::burgers();
        let sol = solve_riemann_at(&law, ul, ul - drop, 0.0).unwrap();
        let pair = make_entropy_pair(&law, Entropy::quadratic());
        let total = |t1: f64| {
            let bx = SpaceTimeBox::new(0.0, t1, -5.0, 5.0).unwrap();
            dissipation_total(&sol, &pair, &bx)
        };
        prop_assert!((total(t) - t * total(1.0)).abs() <= 1e-12 * total(1.0).abs().max(1.0));
        // the measure agrees with the closed form
        let bx = SpaceTimeBox::new(0.0, t, -5.0, 5.0).unwrap();
        let mu = entropy_dissipation(&sol, &pair, &bx).unwrap().eval_total();
        prop_assert!((mu - total(t)).abs() <= 1e-10 * total(t).abs().max(1e-3));
    }
}
