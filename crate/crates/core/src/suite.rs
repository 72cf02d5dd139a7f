//! The verification suite behind `rieszgrad verify`: identity residuals,
//! constants, quadrature cross-checks, weight constants, inequality reports
//! and solver checks, each reduced to a [`Check`] with its measured values.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fracops::{
    apply_multiplier, constants, fractional_divergence, gamma_c_product, pv_covered_points,
    riesz_gradient, riesz_gradient_pv, MultiplierKind,
};
use crate::grid::{bump, lp_norm, sample, Grid, GridSpec, ScalarField, VectorField};
use crate::inequalities::{
    caps, dual_representation_check, embedding_report, equivalence_report, gn_ratio, gn_report,
    holder_extremal, poincare_constant, poincare_report, s_limit_report, sobolev_report,
    two_weight_embedding_report, vector_pairing, InequalityReport, PoincareOptions, SampleFamily,
    Verdict,
};
use crate::solver::{
    manufacture, monotonicity_gap, solve_linear, solve_plaplace, Coefficient, Domain,
    MatrixField, Method, Omega, PDEProblem, Rhs, SolveOptions,
};
use crate::weights::{
    ap_constant, apq_constant, dual_weight, power_weight, sawyer_wheeden_constant, CubeFamily,
    Weight,
};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Fails as stated in the source for a documented reason; does not fail `verify`.
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub criterion: u8,
    pub status: Status,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

impl Check {
    fn new(id: &str, criterion: u8, pass: bool, detail: String) -> Self {
        Check {
            id: id.to_string(),
            criterion,
            status: if pass { Status::Pass } else { Status::Fail },
            detail,
            metrics: BTreeMap::new(),
        }
    }

    fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    fn conflict_if_failed(mut self) -> Self {
        if self.status == Status::Fail {
            self.status = Status::Conflict;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub quick: bool,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            quick: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub config: SuiteConfig,
    pub checks: Vec<Check>,
    pub reports: Vec<InequalityReport>,
}

impl SuiteOutcome {
    /// A check failed or a report with a known constant was violated.
    pub fn has_violation(&self) -> bool {
        self.checks.iter().any(|c| c.status == Status::Fail)
            || self.reports.iter().any(|r| r.verdict == Verdict::Violated)
    }

    pub fn criterion(&self, k: u8) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |c| c.criterion == k)
    }
}

fn rel(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    let d = lp_norm(&a.sub(b)?, 2.0, None);
    let n = lp_norm(b, 2.0, None);
    Ok(if n == 0.0 { d } else { d / n })
}

fn rel_vec(a: &VectorField, b: &VectorField) -> Result<f64> {
    Ok(lp_norm(&a.sub(b)?, 2.0, None) / lp_norm(b, 2.0, None).max(1e-300))
}

/// Bump with random centre and radius, keeping the one-radius margin.
pub fn random_bump(grid: &Grid, rng: &mut ChaCha8Rng) -> Result<ScalarField> {
    let l = grid.length();
    let r = rng.gen_range(l / 16.0..l / 6.0);
    let c: Vec<f64> = grid
        .origin()
        .iter()
        .map(|o| rng.gen_range(o + 2.0 * r..o + l - 2.0 * r))
        .collect();
    let sharp = rng.gen_range(0.5..2.0);
    bump(grid, &c, r, sharp)
}

/// Largest relative residual of each identity over a set of seeded bumps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub integration_by_parts: f64,
    pub fundamental_theorem: f64,
    pub derivative_of_potential: f64,
    pub bessel_inverse: f64,
    pub divergence_of_gradient: f64,
    pub x_equals_h: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.integration_by_parts,
            self.fundamental_theorem,
            self.derivative_of_potential,
            self.bessel_inverse,
            self.divergence_of_gradient,
            self.x_equals_h,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn merge(self, o: Self) -> Self {
        IdentityResiduals {
            integration_by_parts: self.integration_by_parts.max(o.integration_by_parts),
            fundamental_theorem: self.fundamental_theorem.max(o.fundamental_theorem),
            derivative_of_potential: self.derivative_of_potential.max(o.derivative_of_potential),
            bessel_inverse: self.bessel_inverse.max(o.bessel_inverse),
            divergence_of_gradient: self.divergence_of_gradient.max(o.divergence_of_gradient),
            x_equals_h: self.x_equals_h.max(o.x_equals_h),
        }
    }
}

fn identity_residuals(u: &ScalarField, v: &VectorField, s: f64) -> Result<IdentityResiduals> {
    let dim = u.grid().dim();
    let u = u.without_nyquist()?;
    let grad = riesz_gradient(&u, s)?;

    let div_v = fractional_divergence(v, s)?;
    let ibp = (vector_pairing(&grad, v)? + u.dot(&div_v)?).abs()
        / (lp_norm(&grad, 2.0, None) * lp_norm(v, 2.0, None)
            + lp_norm(&u, 2.0, None) * lp_norm(&div_v, 2.0, None));

    let um = u.mean_free();
    let gm = riesz_gradient(&um, s)?;
    let mut rg = ScalarField::zeros(u.grid());
    for j in 0..dim {
        rg.axpy(1.0, &apply_multiplier(gm.component(j), &MultiplierKind::RieszTransform { j })?)?;
    }
    let ftc = rel(&apply_multiplier(&rg, &MultiplierKind::RieszPotential { sigma: s })?, &um)?;

    let pot = apply_multiplier(&u, &MultiplierKind::RieszPotential { sigma: 1.0 - s })?;
    let dpot = VectorField::new(
        (0..dim)
            .map(|j| apply_multiplier(&pot, &MultiplierKind::Derivative { j }))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let dip = rel_vec(&dpot, &grad)?;

    let lam = apply_multiplier(
        &apply_multiplier(&u, &MultiplierKind::BesselPotential { sigma: s })?,
        &MultiplierKind::BesselPotential { sigma: -s },
    )?;
    let bes = rel(&lam, &u)?;

    let dg = fractional_divergence(&grad, s)?.scaled(-1.0);
    let fl = apply_multiplier(&u, &MultiplierKind::FractionalLaplacian { sigma: 2.0 * s })?;
    let dvg = rel(&dg, &fl)?;

    let mut inner = u.clone();
    for j in 0..dim {
        inner.axpy(1.0, &apply_multiplier(grad.component(j), &MultiplierKind::RieszTransform { j })?)?;
    }
    let vx = apply_multiplier(&inner, &MultiplierKind::Gs { s })?;
    let back = apply_multiplier(&vx, &MultiplierKind::BesselPotential { sigma: s })?;
    let xh = rel(&back, &u)?;

    Ok(IdentityResiduals {
        integration_by_parts: ibp,
        fundamental_theorem: ftc,
        derivative_of_potential: dip,
        bessel_inverse: bes,
        divergence_of_gradient: dvg,
        x_equals_h: xh,
    })
}

/// Identity residuals over `samples` seeded bumps (and vector bumps for the
/// integration by parts) on an `n`-dimensional grid with `points` per axis.
pub fn identity_study(
    n: usize,
    points: usize,
    s: f64,
    samples: usize,
    seed: u64,
) -> Result<IdentityResiduals> {
    let grid = Grid::new(GridSpec::centered(n, points, 4.0))?;
    let cases: Vec<(ScalarField, VectorField)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let u = random_bump(&grid, &mut rng)?;
                let v = VectorField::new(
                    (0..n)
                        .map(|_| random_bump(&grid, &mut rng))
                        .collect::<Result<Vec<_>>>()?,
                )?;
                Ok((u, v))
            })
            .collect::<Result<_>>()?
    };
    let parts = cases
        .par_iter()
        .map(|(u, v)| identity_residuals(u, v, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(parts
        .into_iter()
        .fold(IdentityResiduals::default(), IdentityResiduals::merge))
}

/// Largest relative deviation of `γ_{n,1-s} c_{n,s}` from `n + 1 - s` (as
/// printed) and from `n + s - 1` (the value the closed forms give), over
/// `s = k/100`, `k = 1..99`, `n = 1, 2, 3`.
pub fn constants_study() -> Result<(f64, f64)> {
    let mut printed: f64 = 0.0;
    let mut derived: f64 = 0.0;
    for n in 1..=3 {
        for k in 1..100 {
            let s = k as f64 / 100.0;
            let prod = gamma_c_product(n, s)?;
            let nf = n as f64;
            printed = printed.max((prod - (nf + 1.0 - s)).abs() / (nf + 1.0 - s));
            derived = derived.max((prod - (nf + s - 1.0)).abs() / (nf + s - 1.0));
        }
    }
    Ok((printed, derived))
}

/// Relative L² discrepancy between quadrature and multiplier gradients of a
/// bump (radius `L/16`, n = 1, L = 4, s = 1/2, ε = 2h, R = L/4), over the
/// points whose `R`-ball covers the support.
pub fn pv_discrepancy(points: usize) -> Result<f64> {
    let grid = Grid::new(GridSpec::centered(1, points, 4.0))?;
    let l = grid.length();
    let u = bump(&grid, &[0.0], l / 16.0, 1.0)?;
    let h = grid.spacing();
    let radius = l / 4.0;
    let pv = riesz_gradient_pv(&u, 0.5, 2.0 * h, radius)?;
    let sp = riesz_gradient(&u, 0.5)?;
    let mask = pv_covered_points(&u, radius);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (a, b) in pv.components().iter().zip(sp.components()) {
        for (i, &m) in mask.iter().enumerate() {
            if m {
                num += (a.values()[i] - b.values()[i]).powi(2);
                den += b.values()[i].powi(2);
            }
        }
    }
    Ok((num / den).sqrt())
}

/// `[w]_2` of `|x|^α` on centred cubes of edge `2 / 2^ℓ`, `ℓ = 0..=max_level`,
/// on `[-1, 1)` with `points` samples; one value per finest level.
pub fn power_weight_levels(points: usize, alpha: f64, max_level: usize) -> Result<Vec<f64>> {
    let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
    let w = power_weight(&grid, &[0.0], alpha, 2.0)?;
    (0..=max_level)
        .map(|l| {
            Ok(ap_constant(&w, 2.0, &CubeFamily::centered(&[0.0], 2.0, 0, l))?.constant)
        })
        .collect()
}

/// `[w]_2` of `|x|^α` on centred cubes down to eight cells, for each grid
/// size in `sizes`: refinement adds one level per doubling.
pub fn power_weight_refinement(alpha: f64, sizes: &[usize]) -> Result<Vec<f64>> {
    sizes
        .iter()
        .map(|&points| {
            let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
            let w = power_weight(&grid, &[0.0], alpha, 2.0)?;
            let finest = (points / 8).trailing_zeros() as usize;
            Ok(ap_constant(&w, 2.0, &CubeFamily::centered(&[0.0], 2.0, 0, finest))?.constant)
        })
        .collect()
}

/// Worst relative deviation of `[w*]_{p'}` from `[w]_p^{1/(p-1)}` over the
/// dyadic and centred families, power weights and exponents.
pub fn duality_study(points: usize) -> Result<f64> {
    let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
    let families = [
        CubeFamily::dyadic(&grid, 0, 6),
        CubeFamily::centered(&[0.0], 2.0, 0, 8),
        CubeFamily::centered(&[0.3], 1.0, 0, 6),
    ];
    let mut worst: f64 = 0.0;
    for alpha in [-0.5, 0.5, 1.0] {
        for p in [1.5, 2.0, 3.0] {
            let w = power_weight(&grid, &[0.0], alpha, p)?;
            let d = dual_weight(&w, p)?;
            for fam in &families {
                let a = ap_constant(&w, p, fam)?.constant;
                let b = ap_constant(&d, p / (p - 1.0), fam)?.constant;
                worst = worst.max((b - a.powf(1.0 / (p - 1.0))).abs() / b);
            }
        }
    }
    Ok(worst)
}

/// Poincaré measurements for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareCase {
    pub label: String,
    pub constant: f64,
    pub residual: f64,
    pub converged: bool,
    pub family_max: f64,
    pub family_ok: bool,
}

fn poincare_case(
    label: &str,
    domain: &Domain,
    s: f64,
    w: &Weight,
    seed: u64,
    members: usize,
) -> Result<(PoincareCase, InequalityReport)> {
    let est = poincare_constant(domain, s, 2.0, w, &PoincareOptions { seed, ..Default::default() })?;
    let fam = SampleFamily::supported_in(w.grid(), domain, seed, members)?;
    let rep = poincare_report(&fam, domain, s, 2.0, w, &est)?;
    Ok((
        PoincareCase {
            label: label.to_string(),
            constant: est.constant,
            residual: est.residual,
            converged: est.converged,
            family_max: rep.max,
            family_ok: rep.verdict == Verdict::Bounded,
        },
        rep,
    ))
}

/// The three domains: an interval, a disc and a rectangle.
pub fn poincare_study(quick: bool, seed: u64) -> Result<(Vec<PoincareCase>, Vec<InequalityReport>)> {
    let (n1, n2) = if quick { (128, 32) } else { (256, 64) };
    let members = if quick { 8 } else { 24 };
    let line = Grid::new(GridSpec::centered(1, n1, 2.0))?;
    let plane = Grid::new(GridSpec::centered(2, n2, 2.0))?;
    let interval = Domain::new(&line, Omega::Box { lower: vec![-0.25], upper: vec![0.25] })?;
    let disc = Domain::new(&plane, Omega::Ball { center: vec![0.05, -0.05], radius: 0.5 })?;
    let rect = Domain::new(
        &plane,
        Omega::Box { lower: vec![-0.5, -0.3], upper: vec![0.4, 0.3] },
    )?;
    let mut cases = Vec::new();
    let mut reps = Vec::new();
    for (label, dom, w) in [
        ("interval", &interval, Weight::unit(&line, 2.0)?),
        ("disc", &disc, power_weight(&plane, &[0.0, 0.0], 0.5, 2.0)?),
        ("rectangle", &rect, Weight::unit(&plane, 2.0)?),
    ] {
        let (c, r) = poincare_case(label, dom, 0.5, &w, seed, members)?;
        cases.push(c);
        reps.push(r);
    }
    Ok((cases, reps))
}

/// `constant · (1 - 2^{-s})` on the interval of length 1/2 in a box of length 2.
pub fn poincare_s_sweep(points: usize, s_list: &[f64]) -> Result<Vec<(f64, f64, bool)>> {
    let line = Grid::new(GridSpec::centered(1, points, 2.0))?;
    let interval = Domain::new(&line, Omega::Box { lower: vec![-0.25], upper: vec![0.25] })?;
    let w = Weight::unit(&line, 2.0)?;
    s_list
        .par_iter()
        .map(|&s| {
            let est = poincare_constant(&interval, s, 2.0, &w, &PoincareOptions::default())?;
            Ok((s, est.scaled, est.converged))
        })
        .collect()
}

/// Worst `|ratio - 1|` of the Gagliardo–Nirenberg ratio for `sin(6πx)` over all
/// admissible triples from `values³`.
pub fn gn_single_mode(values: &[f64]) -> Result<(f64, usize)> {
    let grid = Grid::new(GridSpec::with_origin(1, 64, 1.0, vec![0.0]))?;
    let u = sample(&grid, |x| (6.0 * std::f64::consts::PI * x[0]).sin())?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &r in values {
        for &s in values {
            for &t in values {
                if r <= s && s <= t && r < t {
                    worst = worst.max((gn_ratio(&u, r, s, t, 2.0, None)? - 1.0).abs());
                    count += 1;
                }
            }
        }
    }
    Ok((worst, count))
}

/// Errors of the four `p = 2` cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearCases {
    pub spectral: f64,
    pub manufactured: f64,
    pub matrix: f64,
    /// `‖(u - g) - ũ‖ / ‖ũ‖`, `ũ` solving the shifted problem with zero data.
    pub lifting: f64,
    /// `max |u - g|` on the exterior.
    pub exterior: f64,
}

fn tight() -> SolveOptions {
    SolveOptions {
        tol: 1e-12,
        max_iter: 20_000,
        ..Default::default()
    }
}

pub fn linear_cases(quick: bool) -> Result<LinearCases> {
    let n1 = if quick { 128 } else { 256 };
    let n2 = if quick { 32 } else { 64 };
    let s = 0.5;
    let pi = std::f64::consts::PI;

    let torus_grid = Grid::new(GridSpec::with_origin(1, 64, 1.0, vec![0.0]))?;
    let exact = sample(&torus_grid, |x| (2.0 * pi * x[0]).sin())?;
    let torus = Domain::new(&torus_grid, Omega::Torus)?;
    let f = exact.scaled((2.0 * pi).powf(2.0 * s));
    let prob = PDEProblem::new(
        torus,
        s,
        2.0,
        Coefficient::Scalar(Weight::unit(&torus_grid, 2.0)?),
        Rhs::Field(f),
        None,
    )?;
    let spectral = solve_linear(&prob, &tight())?.solution().sub(&exact)?.max_abs();

    let line = Grid::new(GridSpec::centered(1, n1, 2.0))?;
    let interval = Domain::new(&line, Omega::Box { lower: vec![-0.5], upper: vec![0.5] })?;
    let u_star = bump(&line, &[0.05], 0.3, 1.0)?;
    let w = power_weight(&line, &[0.0], 0.5, 2.0)?;
    let prob = manufacture(interval.clone(), s, 2.0, Coefficient::Scalar(w.clone()), &u_star)?;
    let manufactured = rel(solve_linear(&prob, &tight())?.solution(), &u_star)?;

    let plane = Grid::new(GridSpec::centered(2, n2, 2.0))?;
    let disc = Domain::new(&plane, Omega::Ball { center: vec![0.0, 0.0], radius: 0.7 })?;
    let wp = power_weight(&plane, &[0.1, 0.0], 0.5, 2.0)?;
    let b = VectorField::new(vec![
        sample(&plane, |x| (pi * x[1]).cos() / 2f64.sqrt())?,
        sample(&plane, |x| (pi * x[0]).sin() / 2f64.sqrt())?,
    ])?;
    let a = MatrixField::rank_one(wp, &b, 0.5)?;
    let u2 = bump(&plane, &[0.1, -0.05], 0.45, 1.0)?;
    let prob = manufacture(disc, s, 2.0, Coefficient::Matrix(a), &u2)?;
    let matrix = rel(solve_linear(&prob, &tight())?.solution(), &u2)?;

    let g = sample(&line, |x| 1.0 + 0.5 * (pi * x[0]).cos() + 0.25 * (2.0 * pi * x[0]).sin())?;
    let f = bump(&line, &[-0.1], 0.35, 1.0)?;
    let with_g = PDEProblem::new(
        interval.clone(),
        s,
        2.0,
        Coefficient::Scalar(w.clone()),
        Rhs::Field(f.clone()),
        Some(g.clone()),
    )?;
    let u = solve_linear(&with_g, &tight())?.solution().clone();
    let shifted = u.sub(&g)?;
    let tg = with_g.with_rhs(Rhs::Field(ScalarField::zeros(&line)))?.apply_operator(&g)?;
    let zero_data = PDEProblem::new(
        interval.clone(),
        s,
        2.0,
        Coefficient::Scalar(w),
        Rhs::Field(f.sub(&tg)?),
        None,
    )?;
    let tilde = solve_linear(&zero_data, &tight())?.solution().clone();
    let lifting = rel(&shifted, &tilde)?;
    let exterior = (0..line.len())
        .filter(|&i| !interval.inside()[i])
        .map(|i| (u.values()[i] - g.values()[i]).abs())
        .fold(0.0, f64::max);

    Ok(LinearCases {
        spectral,
        manufactured,
        matrix,
        lifting,
        exterior,
    })
}

/// One nonlinear manufactured case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearCase {
    pub p: f64,
    pub alpha: f64,
    pub kacanov_error: f64,
    pub descent_error: f64,
    pub agreement: f64,
    pub monotone: bool,
    pub converged: bool,
}

pub fn nonlinear_cases(points: usize, p_list: &[f64], alphas: &[f64]) -> Result<Vec<NonlinearCase>> {
    let line = Grid::new(GridSpec::centered(1, points, 2.0))?;
    let interval = Domain::new(&line, Omega::Box { lower: vec![-0.5], upper: vec![0.5] })?;
    let u_star = bump(&line, &[0.05], 0.3, 1.0)?;
    let opts = SolveOptions {
        tol: 1e-8,
        max_iter: 20_000,
        ..Default::default()
    };
    let mut out = Vec::new();
    for &p in p_list {
        for &alpha in alphas {
            let w = power_weight(&line, &[0.0], alpha, p)?;
            let prob = manufacture(interval.clone(), 0.5, p, Coefficient::Scalar(w), &u_star)?;
            let k = solve_plaplace(&prob, Method::Kacanov, &opts)?;
            let d = solve_plaplace(&prob, Method::Descent, &opts)?;
            out.push(NonlinearCase {
                p,
                alpha,
                kacanov_error: rel(k.solution(), &u_star)?,
                descent_error: rel(d.solution(), &u_star)?,
                agreement: rel(k.solution(), d.solution())?,
                monotone: k.energy_monotone() && d.energy_monotone(),
                converged: k.converged && d.converged,
            });
        }
    }
    Ok(out)
}

/// Random interior pairs failing the monotonicity lower bound, out of `pairs`.
pub fn monotonicity_sweep(points: usize, p: f64, pairs: usize, seed: u64) -> Result<usize> {
    let line = Grid::new(GridSpec::centered(1, points, 2.0))?;
    let interval = Domain::new(&line, Omega::Box { lower: vec![-0.5], upper: vec![0.5] })?;
    let w = power_weight(&line, &[0.0], 0.5, p)?;
    let prob = PDEProblem::new(
        interval.clone(),
        0.5,
        p,
        Coefficient::Scalar(w),
        Rhs::Field(ScalarField::zeros(&line)),
        None,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<(ScalarField, ScalarField)> = (0..pairs)
        .map(|_| {
            let mut draw = || -> Result<ScalarField> {
                let scale = 10f64.powf(rng.gen_range(-2.0..1.0));
                let mut v: Vec<f64> =
                    (0..line.len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
                interval.project(&mut v);
                ScalarField::new(line.clone(), v)
            };
            Ok((draw()?, draw()?))
        })
        .collect::<Result<_>>()?;
    let fails = fields
        .par_iter()
        .map(|(u, v)| Ok(!monotonicity_gap(&prob, u, v)?.holds(1e-10)))
        .collect::<Result<Vec<bool>>>()?;
    Ok(fails.into_iter().filter(|f| *f).count())
}

/// Largest relative spread between solves from `starts` random initial
/// iterates, and the tolerance used.
pub fn uniqueness_spread(points: usize, p: f64, starts: usize, seed: u64) -> Result<(f64, f64)> {
    let line = Grid::new(GridSpec::centered(1, points, 2.0))?;
    let interval = Domain::new(&line, Omega::Box { lower: vec![-0.5], upper: vec![0.5] })?;
    let w = power_weight(&line, &[0.0], 0.5, p)?;
    let f = bump(&line, &[0.1], 0.3, 1.0)?.add(&bump(&line, &[-0.2], 0.2, 1.0)?.scaled(-0.5))?;
    let prob = PDEProblem::new(interval.clone(), 0.5, p, Coefficient::Scalar(w), Rhs::Field(f), None)?;
    let tol = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sols: Vec<ScalarField> = Vec::new();
    for _ in 0..starts {
        let mut v: Vec<f64> = (0..line.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        interval.project(&mut v);
        let opts = SolveOptions {
            tol,
            max_iter: 20_000,
            initial: Some(ScalarField::new(line.clone(), v)?),
            ..Default::default()
        };
        let rep = if p == 2.0 {
            solve_linear(&prob, &opts)?
        } else {
            solve_plaplace(&prob, Method::Kacanov, &opts)?
        };
        sols.push(rep.solution().clone());
    }
    let mut spread: f64 = 0.0;
    for a in &sols {
        for b in &sols {
            spread = spread.max(rel(a, b)?);
        }
    }
    Ok((spread, tol))
}

fn inequality_reports(quick: bool, seed: u64) -> Result<Vec<InequalityReport>> {
    let mut out = Vec::new();
    let line = Grid::new(GridSpec::centered(1, if quick { 128 } else { 256 }, 4.0))?;
    let plane = Grid::new(GridSpec::centered(2, if quick { 32 } else { 64 }, 4.0))?;
    let randoms = if quick { 4 } else { 8 };
    for grid in [&line, &plane] {
        let n = grid.dim();
        let fam = SampleFamily::standard(grid, seed, randoms)?;
        let centre = vec![0.0; n];
        for p in [1.5, 2.0, 3.0] {
            let ws = [Weight::unit(grid, p)?, power_weight(grid, &centre, 0.5, p)?];
            for w in &ws {
                for s in [0.25, 0.5, 0.75] {
                    out.push(equivalence_report(&fam, s, p, Some(w))?);
                    out.push(embedding_report(&fam, 0.5 * s, s, p, Some(w))?);
                    if s * p < n as f64 {
                        out.push(sobolev_report(&fam, s, p, Some(w))?);
                    }
                }
                out.push(gn_report(&fam, 0.0, 0.5, 1.0, p, Some(w))?);
                out.push(gn_report(&fam, 0.2, 0.5, 0.8, p, Some(w))?);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
                let g = VectorField::new(
                    (0..n)
                        .map(|_| random_bump(grid, &mut rng))
                        .collect::<Result<Vec<_>>>()?,
                )?;
                out.push(dual_representation_check(&g, &fam, 0.5, p, w)?);
                let (_, u0) = &fam.members[4];
                let ext = holder_extremal(u0, 0.5, p, w)?;
                out.push(dual_representation_check(&ext, &fam, 0.5, p, w)?);
            }
        }
    }
    let band = &SampleFamily::standard(&line, seed, 1)?.members[9].1;
    out.push(s_limit_report(band, &[0.5, 0.9, 0.99, 0.999, 1.0])?);

    let dom = Domain::new(&plane, Omega::Ball { center: vec![0.0, 0.0], radius: 1.0 })?;
    let fam = SampleFamily::supported_in(&plane, &dom, seed, if quick { 6 } else { 16 })?;
    let (p, s) = (2.0, 0.5);
    let q = 2.0 * p / (2.0 - s * p);
    let v = power_weight(&plane, &[0.0, 0.0], 0.5, q)?;
    let w = power_weight(&plane, &[0.0, 0.0], 0.5, p)?;
    out.push(two_weight_embedding_report(&fam, s, p, q, &v, &w)?);
    Ok(out)
}

/// Runs every check. `quick` shrinks sample counts and grids.
pub fn run(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let quick = cfg.quick;
    let seed = cfg.seed;
    let mut checks = Vec::new();

    let samples = if quick { 10 } else { 100 };
    for n in [1, 2] {
        let points = match (n, quick) {
            (1, false) => 256,
            (1, true) => 128,
            (_, false) => 128,
            (_, true) => 32,
        };
        for s in [0.25, 0.5, 0.75] {
            let r = identity_study(n, points, s, samples, seed)?;
            let worst = r.max();
            checks.push(
                Check::new(
                    &format!("identities n={n} s={s}"),
                    1,
                    worst <= 1e-10,
                    format!("{samples} bumps at N={points}, worst residual {worst:e} (limit 1e-10)"),
                )
                .metric("integration_by_parts", r.integration_by_parts)
                .metric("fundamental_theorem", r.fundamental_theorem)
                .metric("derivative_of_potential", r.derivative_of_potential)
                .metric("bessel_inverse", r.bessel_inverse)
                .metric("divergence_of_gradient", r.divergence_of_gradient)
                .metric("x_equals_h", r.x_equals_h),
            );
        }
    }

    let (printed, derived) = constants_study()?;
    checks.push(
        Check::new(
            "gamma*c = n+1-s",
            2,
            printed <= 1e-12,
            format!("stated relation, worst relative deviation {printed:e}"),
        )
        .metric("max_rel", printed)
        .conflict_if_failed(),
    );
    checks.push(
        Check::new(
            "gamma*c = n+s-1",
            2,
            derived <= 1e-12,
            format!("closed-form relation, worst relative deviation {derived:e}"),
        )
        .metric("max_rel", derived),
    );
    let c = constants(1, 0.5)?;
    checks.push(
        Check::new(
            "c bounded",
            2,
            (1..=3).all(|n| {
                (1..100).all(|k| {
                    constants(n, k as f64 / 100.0).map(|c| c.c.is_finite() && c.c < 10.0).unwrap_or(false)
                })
            }),
            format!("c_{{n,s}} finite and below 10 on s ∈ [0.01, 0.99]; c_{{1,1/2}} = {}", c.c),
        )
        .metric("c_1_half", c.c),
    );

    let coarse = pv_discrepancy(128)?;
    let fine = pv_discrepancy(256)?;
    checks.push(
        Check::new(
            "pv vs spectral",
            3,
            fine <= 1e-2 && coarse / fine >= 2.0,
            format!("N=128: {coarse:e}, N=256: {fine:e}"),
        )
        .metric("n128", coarse)
        .metric("n256", fine),
    );

    let wpoints = if quick { 1024 } else { 4096 };
    let half = power_weight_levels(wpoints, 0.5, 8)?;
    let last = *half.last().unwrap();
    checks.push(
        Check::new(
            "[|x|^1/2]_2 = 4/3",
            4,
            (last - 4.0 / 3.0).abs() <= 0.02 * 4.0 / 3.0,
            format!("centred cubes, N={wpoints}: {last}"),
        )
        .metric("estimate", last),
    );
    let dual = duality_study(if quick { 512 } else { 2048 })?;
    checks.push(
        Check::new(
            "dual constants",
            4,
            dual <= 1e-10,
            format!("worst deviation {dual:e}"),
        )
        .metric("max_rel", dual),
    );
    let sizes: &[usize] = if quick { &[256, 512, 1024] } else { &[256, 512, 1024, 2048, 4096] };
    let edge = power_weight_refinement(1.0, sizes)?;
    let growth = edge
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(f64::INFINITY, f64::min);
    checks.push(
        Check::new(
            "alpha=1 growth",
            4,
            growth >= 2.0,
            format!("N = {sizes:?}: {edge:?}; smallest growth factor per level {growth}"),
        )
        .metric("min_growth", growth)
        .conflict_if_failed(),
    );
    let grid = Grid::new(GridSpec::centered(1, 1024, 2.0))?;
    let fam = CubeFamily::dyadic(&grid, 0, 7);
    let mut ok = true;
    for alpha in [0.5, 1.5, 3.0] {
        let w = power_weight(&grid, &[0.0], alpha, 2.0)?;
        let r = 1.0 + 3.0 / 2.0;
        let apq = apq_constant(&w, 2.0, 3.0, &fam)?.constant;
        let ar = ap_constant(&w, r, &fam)?.constant;
        ok &= (apq - ar).abs() <= 1e-12 * ar;
    }
    let unit = Weight::unit(&grid, 2.0)?;
    let sw = sawyer_wheeden_constant(&unit, &unit, 0.25, 2.0, 4.0, &fam)?;
    ok &= (sw.estimate.constant - 1.0).abs() < 1e-12;
    checks.push(
        Check::new(
            "A_pq and two-weight",
            4,
            ok,
            format!("[w]_{{2,3}} = [w]_{{5/2}}; Sawyer–Wheeden at q = p*: {}", sw.estimate.constant),
        )
        .metric("sawyer_wheeden", sw.estimate.constant),
    );

    let (cases, mut reports) = poincare_study(quick, seed)?;
    for c in &cases {
        checks.push(
            Check::new(
                &format!("poincare {}", c.label),
                5,
                c.converged && c.residual <= 1e-8 && c.family_ok,
                format!(
                    "C = {}, eigen-residual {:e}, family max ratio {}",
                    c.constant, c.residual, c.family_max
                ),
            )
            .metric("constant", c.constant)
            .metric("residual", c.residual)
            .metric("family_max", c.family_max),
        );
    }
    let s_list: Vec<f64> = if quick {
        vec![0.1, 0.5, 0.9]
    } else {
        (1..10).map(|k| k as f64 / 10.0).collect()
    };
    let sweep = poincare_s_sweep(if quick { 128 } else { 256 }, &s_list)?;
    let hi = sweep.iter().map(|x| x.1).fold(0.0, f64::max);
    let lo = sweep.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    checks.push(
        Check::new(
            "poincare s-sweep",
            5,
            sweep.iter().all(|x| x.2) && hi / lo <= 10.0,
            format!("C(1-2^-s) in [{lo}, {hi}] over s = {s_list:?}"),
        )
        .metric("spread", hi / lo),
    );

    let values = [0.0, 0.2, 0.4, 0.6, 0.8];
    let (gn_worst, triples) = gn_single_mode(&values)?;
    checks.push(
        Check::new(
            "gn single mode",
            6,
            gn_worst <= 1e-12,
            format!("{triples} triples, worst |ratio-1| = {gn_worst:e}"),
        )
        .metric("max_dev", gn_worst),
    );

    let ineq = inequality_reports(quick, seed)?;
    let gn_max = ineq
        .iter()
        .filter(|r| r.name == "gagliardo_nirenberg")
        .map(|r| r.max)
        .fold(0.0, f64::max);
    checks.push(
        Check::new(
            "gn family",
            6,
            gn_max <= caps::GAGLIARDO_NIRENBERG,
            format!("max ratio {gn_max} (cap {})", caps::GAGLIARDO_NIRENBERG),
        )
        .metric("max", gn_max),
    );
    reports.extend(ineq);

    let lin = linear_cases(quick)?;
    checks.push(
        Check::new("spectral solve", 7, lin.spectral <= 1e-9, format!("max error {:e}", lin.spectral))
            .metric("error", lin.spectral),
    );
    checks.push(
        Check::new(
            "manufactured p=2",
            7,
            lin.manufactured <= 1e-8,
            format!("relative error {:e}", lin.manufactured),
        )
        .metric("error", lin.manufactured),
    );
    checks.push(
        Check::new(
            "matrix coefficient",
            7,
            lin.matrix <= 1e-8,
            format!("A = w(I + 0.5 b b^T), relative error {:e}", lin.matrix),
        )
        .metric("error", lin.matrix),
    );
    checks.push(
        Check::new(
            "exterior data",
            7,
            lin.lifting <= 1e-8 && lin.exterior == 0.0,
            format!("lifting discrepancy {:e}, exterior mismatch {:e}", lin.lifting, lin.exterior),
        )
        .metric("lifting", lin.lifting)
        .metric("exterior", lin.exterior),
    );

    let npoints = if quick { 128 } else { 256 };
    let alphas: &[f64] = if quick { &[0.0] } else { &[0.0, 0.5] };
    for c in nonlinear_cases(npoints, &[1.5, 3.0], alphas)? {
        checks.push(
            Check::new(
                &format!("manufactured p={} alpha={}", c.p, c.alpha),
                8,
                c.converged
                    && c.kacanov_error <= 1e-6
                    && c.descent_error <= 1e-6
                    && c.agreement <= 1e-5
                    && c.monotone,
                format!(
                    "kacanov {:e}, descent {:e}, agreement {:e}, monotone {}",
                    c.kacanov_error, c.descent_error, c.agreement, c.monotone
                ),
            )
            .metric("kacanov", c.kacanov_error)
            .metric("descent", c.descent_error)
            .metric("agreement", c.agreement),
        );
    }
    let pairs = if quick { 100 } else { 1000 };
    for p in [1.5, 3.0] {
        let fails = monotonicity_sweep(npoints, p, pairs, seed)?;
        checks.push(
            Check::new(
                &format!("monotonicity p={p}"),
                8,
                fails == 0,
                format!("{fails} violations in {pairs} pairs"),
            )
            .metric("violations", fails as f64),
        );
    }

    for p in [2.0, 3.0] {
        let (spread, tol) = uniqueness_spread(npoints, p, if quick { 3 } else { 5 }, seed)?;
        checks.push(
            Check::new(
                &format!("uniqueness p={p}"),
                9,
                spread <= 10.0 * tol,
                format!("spread {spread:e} against 10 × {tol:e}"),
            )
            .metric("spread", spread),
        );
    }

    Ok(SuiteOutcome {
        config: *cfg,
        checks,
        reports,
    })
}
