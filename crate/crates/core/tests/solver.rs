use rieszgrad::grid::{bump, lp_norm, Grid, GridSpec, ScalarField};
use rieszgrad::inequalities::seeded_band_limited;
use rieszgrad::solver::{
    manufacture, monotonicity_gap, solve, solve_plaplace, Coefficient, Domain, Method, Omega, SolveOptions,
};
use rieszgrad::weights::{power_weight, Weight};

fn rel(a: &ScalarField, b: &ScalarField) -> f64 {
    lp_norm(&a.sub(b).unwrap(), 2.0, None) / lp_norm(b, 2.0, None)
}

#[test]
fn manufactured_disc_p2() {
    let g = Grid::new(GridSpec::centered(2, 32, 2.0)).unwrap();
    let dom = Domain::new(
        &g,
        Omega::Ball {
            center: vec![0.0, 0.0],
            radius: 0.6,
        },
    )
    .unwrap();
    let w = power_weight(&g, &[0.1, 0.0], 0.5, 2.0).unwrap();
    let u = bump(&g, &[0.0, 0.05], 0.4, 1.0).unwrap();
    let prob = manufacture(dom, 0.5, 2.0, Coefficient::Scalar(w), &u).unwrap();
    let rep = solve(&prob, &SolveOptions::default()).unwrap();
    assert!(rep.converged);
    assert!(rel(rep.solution(), &u) < 1e-8, "{}", rel(rep.solution(), &u));
}

#[test]
fn kacanov_and_descent_agree_for_p3() {
    let g = Grid::new(GridSpec::centered(1, 128, 2.0)).unwrap();
    let dom = Domain::new(
        &g,
        Omega::Box {
            lower: vec![-0.5],
            upper: vec![0.5],
        },
    )
    .unwrap();
    let u = bump(&g, &[0.0], 0.3, 1.0).unwrap();
    let prob = manufacture(dom, 0.4, 3.0, Coefficient::Scalar(Weight::unit(&g, 3.0).unwrap()), &u).unwrap();
    let opts = SolveOptions {
        tol: 1e-9,
        ..Default::default()
    };
    let k = solve_plaplace(&prob, Method::Kacanov, &opts).unwrap();
    let d = solve_plaplace(&prob, Method::Descent, &opts).unwrap();
    assert!(k.converged && d.converged);
    assert!(k.energy_monotone() && d.energy_monotone());
    assert!(rel(k.solution(), &u) < 1e-6);
    assert!(rel(k.solution(), d.solution()) < 1e-5);
}

#[test]
fn operator_is_monotone_on_random_pairs() {
    let g = Grid::new(GridSpec::centered(1, 64, 2.0)).unwrap();
    let dom = Domain::new(
        &g,
        Omega::Box {
            lower: vec![-0.5],
            upper: vec![0.5],
        },
    )
    .unwrap();
    let u = bump(&g, &[0.0], 0.3, 1.0).unwrap();
    let prob = manufacture(dom.clone(), 0.5, 1.5, Coefficient::Scalar(Weight::unit(&g, 1.5).unwrap()), &u).unwrap();
    for seed in 0..20 {
        let mut a = seeded_band_limited(&g, 2 * seed, 8).unwrap().into_values();
        let mut b = seeded_band_limited(&g, 2 * seed + 1, 8).unwrap().into_values();
        dom.project(&mut a);
        dom.project(&mut b);
        let a = ScalarField::new(g.clone(), a).unwrap();
        let b = ScalarField::new(g.clone(), b).unwrap();
        let gap = monotonicity_gap(&prob, &a, &b).unwrap();
        assert!(gap.holds(1e-10), "seed {seed}: {gap:?}");
    }
}
