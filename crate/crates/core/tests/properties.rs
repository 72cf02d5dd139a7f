use proptest::prelude::*;

use rieszgrad::fracops::{apply_multiplier, fractional_divergence, riesz_gradient, symbol, MultiplierKind};
use rieszgrad::grid::{bump, lp_norm, Grid, GridSpec, ScalarField, VectorField};
use rieszgrad::inequalities::{seeded_band_limited, vector_pairing};
use rieszgrad::io::{field_bytes, parse_fields};
use rieszgrad::weights::{ap_constant, dual_weight, power_weight, CubeFamily, Weight};

fn line(points: usize) -> Grid {
    Grid::new(GridSpec::centered(1, points, 4.0)).unwrap()
}

fn plane(points: usize) -> Grid {
    Grid::new(GridSpec::centered(2, points, 2.0)).unwrap()
}

fn rel(a: &ScalarField, b: &ScalarField) -> f64 {
    lp_norm(&a.sub(b).unwrap(), 2.0, None) / lp_norm(b, 2.0, None).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_symbol_is_homogeneous(s in 0.05f64..0.95, x in -3.0f64..3.0, y in 0.1f64..3.0, lam in 0.1f64..10.0) {
        let kind = MultiplierKind::RieszGradient { j: 1, s };
        let a = symbol(&kind, &[lam * x, lam * y]).unwrap();
        let b = symbol(&kind, &[x, y]).unwrap() * lam.powf(s);
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
    }

    #[test]
    fn laplacian_symbol_is_homogeneous(sigma in 0.1f64..2.0, x in 0.1f64..3.0, lam in 0.1f64..10.0) {
        let kind = MultiplierKind::FractionalLaplacian { sigma };
        let a = symbol(&kind, &[lam * x]).unwrap();
        let b = symbol(&kind, &[x]).unwrap() * lam.powf(sigma);
        prop_assert!((a - b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn gradient_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.1f64..0.9) {
        let g = line(128);
        let u = seeded_band_limited(&g, seed, 16).unwrap();
        let v = seeded_band_limited(&g, seed + 1, 16).unwrap();
        let mut w = u.scaled(a);
        w.axpy(b, &v).unwrap();
        let lhs = riesz_gradient(&w, s).unwrap().component(0).clone();
        let mut rhs = riesz_gradient(&u, s).unwrap().component(0).scaled(a);
        rhs.axpy(b, riesz_gradient(&v, s).unwrap().component(0)).unwrap();
        prop_assert!(lp_norm(&lhs.sub(&rhs).unwrap(), 2.0, None) <= 1e-12 * (1.0 + lp_norm(&rhs, 2.0, None)));
    }

    #[test]
    fn bessel_round_trip(seed in 0u64..1000, sigma in -2.0f64..2.0) {
        let g = plane(32);
        let u = seeded_band_limited(&g, seed, 4).unwrap();
        let there = apply_multiplier(&u, &MultiplierKind::BesselPotential { sigma }).unwrap();
        let back = apply_multiplier(&there, &MultiplierKind::BesselPotential { sigma: -sigma }).unwrap();
        prop_assert!(rel(&back, &u) <= 1e-12);
    }

    #[test]
    fn divergence_is_minus_adjoint(seed in 0u64..1000, s in 0.1f64..0.9) {
        let g = plane(32);
        let u = seeded_band_limited(&g, seed, 4).unwrap();
        let v = VectorField::new(vec![
            seeded_band_limited(&g, seed + 7, 4).unwrap(),
            seeded_band_limited(&g, seed + 8, 4).unwrap(),
        ]).unwrap();
        let lhs = vector_pairing(&riesz_gradient(&u, s).unwrap(), &v).unwrap();
        let rhs = -u.dot(&fractional_divergence(&v, s).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + lhs.abs()));
    }

    #[test]
    fn field_bytes_round_trip(seed in 0u64..1000) {
        let g = Grid::new(GridSpec::with_origin(2, 16, 1.5, vec![-0.25, 0.5])).unwrap();
        let u = seeded_band_limited(&g, seed, 3).unwrap();
        let back = parse_fields(&field_bytes(&u)).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(back[0].grid().spec(), u.grid().spec());
        prop_assert_eq!(back[0].values(), u.values());
    }

    #[test]
    fn ap_constant_bounds_and_duality(seed in 0u64..1000, p in 1.3f64..4.0) {
        let g = line(256);
        let noise = seeded_band_limited(&g, seed, 8).unwrap();
        let m = noise.max_abs().max(1e-12);
        let w = Weight::tabulated(noise.map(|v| (v / m).exp()), p).unwrap();
        let fam = CubeFamily::dyadic(&g, 0, 5);
        let c = ap_constant(&w, p, &fam).unwrap().constant;
        prop_assert!(c >= 1.0 - 1e-12);
        let pp = p / (p - 1.0);
        let cd = ap_constant(&dual_weight(&w, p).unwrap(), pp, &fam).unwrap().constant;
        prop_assert!((cd - c.powf(1.0 / (p - 1.0))).abs() <= 1e-10 * cd);
        let scaled = Weight::tabulated(w.values().scaled(3.7), p).unwrap();
        let cs = ap_constant(&scaled, p, &fam).unwrap().constant;
        prop_assert!((cs - c).abs() <= 1e-12 * c);
    }
}

#[test]
fn unit_weight_has_constant_one() {
    let g = line(128);
    let w = Weight::unit(&g, 2.0).unwrap();
    let c = ap_constant(&w, 2.0, &CubeFamily::dyadic(&g, 0, 4)).unwrap().constant;
    assert!((c - 1.0).abs() < 1e-14);
}

#[test]
fn power_weight_outside_class_is_flagged() {
    let g = line(256);
    assert_eq!(power_weight(&g, &[0.0], 0.5, 2.0).unwrap().in_class(), Some(true));
    assert_eq!(power_weight(&g, &[0.0], 1.5, 2.0).unwrap().in_class(), Some(false));
}

#[test]
fn gradient_tends_to_classical_derivative() {
    let g = line(256);
    let u = bump(&g, &[0.0], 1.0, 1.0).unwrap();
    let d = apply_multiplier(&u, &MultiplierKind::Derivative { j: 0 }).unwrap();
    let mut last = f64::INFINITY;
    for s in [0.9, 0.99, 0.999] {
        let e = rel(riesz_gradient(&u, s).unwrap().component(0), &d);
        assert!(e < last, "s={s}: {e} not below {last}");
        last = e;
    }
    assert!(last < 5e-3, "{last}");
}
