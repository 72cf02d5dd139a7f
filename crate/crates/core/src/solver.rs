//! Discrete weak form of
//!
//! ```text
//! -div^s(w |∇^s u|^{p-2} ∇^s u) = f  in Ω,     u = g  outside Ω
//! ```
//!
//! and of its linear matrix-coefficient variant `-div^s(A ∇^s u) = f` (p = 2).
//!
//! Unknowns are the grid values inside Ω; `∇^s` always acts on the full field,
//! so the nonlocal interaction with the exterior is kept. On the whole torus
//! ([`Omega::Torus`]) the unknowns are the mean-free fields instead.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fracops::{symbol_table, MultiplierKind};
use crate::grid::{compensated_sum, lp_norm, Grid, ScalarField, SpectralField, VectorField};
use crate::weights::Weight;
use crate::{Error, Result};

/// Shape of Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Omega {
    /// Every grid point, mean-free fields.
    Torus,
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned box `[lower, upper]`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

/// Ω resolved on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    shape: Omega,
    inside: Vec<bool>,
}

/// Minimum distance, in cells, between Ω and the box boundary.
pub const MARGIN_CELLS: usize = 4;

impl Domain {
    pub fn new(grid: &Grid, shape: Omega) -> Result<Self> {
        let dim = grid.dim();
        let inside: Vec<bool> = match &shape {
            Omega::Torus => vec![true; grid.len()],
            Omega::Ball { center, radius } => {
                if center.len() != dim || !(*radius > 0.0) {
                    return Err(Error::Geometry(format!(
                        "ball centre {center:?} / radius {radius} invalid for dimension {dim}"
                    )));
                }
                (0..grid.len())
                    .map(|i| {
                        let x = grid.point(i);
                        let d2: f64 = (0..dim).map(|a| (x[a] - center[a]).powi(2)).sum();
                        d2 < radius * radius
                    })
                    .collect()
            }
            Omega::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::Geometry(format!(
                        "box corners do not match dimension {dim}"
                    )));
                }
                (0..grid.len())
                    .map(|i| {
                        let x = grid.point(i);
                        (0..dim).all(|a| x[a] > lower[a] && x[a] < upper[a])
                    })
                    .collect()
            }
        };
        Domain::from_mask(grid, shape, inside)
    }

    /// Ω given point by point; `shape` is kept as a label.
    pub fn from_mask(grid: &Grid, shape: Omega, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                found: inside.len(),
            });
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::Geometry("Ω contains no grid points".into()));
        }
        if shape != Omega::Torus {
            let n = grid.points();
            for (i, _) in inside.iter().enumerate().filter(|(_, &b)| b) {
                let m = grid.multi_index(i);
                if (0..grid.dim()).any(|a| m[a] < MARGIN_CELLS || m[a] + MARGIN_CELLS >= n) {
                    return Err(Error::Geometry(format!(
                        "Ω must stay {MARGIN_CELLS} cells away from the box boundary"
                    )));
                }
            }
        }
        Ok(Domain { shape, inside })
    }

    pub fn shape(&self) -> &Omega {
        &self.shape
    }

    pub fn is_torus(&self) -> bool {
        self.shape == Omega::Torus
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    /// Orthogonal projection onto admissible fields.
    pub fn project(&self, u: &mut [f64]) {
        if self.is_torus() {
            let m = compensated_sum(u.iter().copied()) / u.len() as f64;
            u.iter_mut().for_each(|v| *v -= m);
        } else {
            for (v, &b) in u.iter_mut().zip(&self.inside) {
                if !b {
                    *v = 0.0;
                }
            }
        }
    }

    /// True if `u` vanishes outside Ω.
    pub fn supports(&self, u: &ScalarField) -> bool {
        self.is_torus()
            || u
                .values()
                .iter()
                .zip(&self.inside)
                .all(|(v, &b)| b || *v == 0.0)
    }

    /// Is Ω a subset of `other`?
    pub fn within(&self, other: &Domain) -> bool {
        self.inside.iter().zip(&other.inside).all(|(&a, &b)| !a || b)
    }
}

/// Symmetric matrix field with degenerate ellipticity
/// `c1 w |ξ|² <= A ξ·ξ <= c2 w |ξ|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    weight: Weight,
    /// Row-major `n × n` entries, each a field.
    entries: Vec<ScalarField>,
    c1: f64,
    c2: f64,
}

/// Random directions per grid point used by the ellipticity check.
pub const ELLIPTICITY_DIRECTIONS: usize = 16;

impl MatrixField {
    pub fn new(weight: Weight, entries: Vec<ScalarField>, c1: f64, c2: f64) -> Result<Self> {
        let grid = weight.grid().clone();
        let n = grid.dim();
        if entries.len() != n * n {
            return Err(Error::Parameter(format!(
                "matrix field needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        for e in &entries {
            grid.check_same(e.grid())?;
        }
        if !(c1 > 0.0) || !(c2 >= c1) {
            return Err(Error::Parameter(format!(
                "ellipticity constants must satisfy 0 < c1 <= c2, got {c1}, {c2}"
            )));
        }
        let a = MatrixField {
            weight,
            entries,
            c1,
            c2,
        };
        a.check(0)?;
        Ok(a)
    }

    /// `A = w (I + β b bᵀ)` with `|b| <= 1` pointwise; `c1 = 1`, `c2 = 1 + β`.
    pub fn rank_one(weight: Weight, b: &VectorField, beta: f64) -> Result<Self> {
        let grid = weight.grid().clone();
        grid.check_same(b.grid())?;
        let n = grid.dim();
        if !(beta >= 0.0) {
            return Err(Error::Parameter(format!("β={beta} must be nonnegative")));
        }
        if (0..grid.len()).any(|i| b.magnitude_at(i) > 1.0 + 1e-12) {
            return Err(Error::Parameter("rank-one direction exceeds unit length".into()));
        }
        let w = weight.values().values();
        let mut entries = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                let bj = b.component(j).values();
                let bk = b.component(k).values();
                let vals = (0..grid.len())
                    .map(|i| w[i] * (if j == k { 1.0 } else { 0.0 } + beta * bj[i] * bk[i]))
                    .collect();
                entries.push(ScalarField::new(grid.clone(), vals)?);
            }
        }
        MatrixField::new(weight, entries, 1.0, 1.0 + beta)
    }

    /// `A = w I`.
    pub fn isotropic(weight: Weight) -> Result<Self> {
        let zero = VectorField::zeros(weight.grid());
        MatrixField::rank_one(weight, &zero, 0.0)
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn constants(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    fn entry(&self, j: usize, k: usize, i: usize) -> f64 {
        self.entries[j * self.weight.grid().dim() + k].values()[i]
    }

    /// Symmetry everywhere, ellipticity along seeded random directions.
    pub fn check(&self, seed: u64) -> Result<()> {
        let grid = self.weight.grid();
        let n = grid.dim();
        let w = self.weight.values().values();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..grid.len() {
            for j in 0..n {
                for k in 0..j {
                    let (a, b) = (self.entry(j, k, i), self.entry(k, j, i));
                    if (a - b).abs() > 1e-12 * (a.abs() + b.abs()) {
                        return Err(Error::Parameter(format!(
                            "matrix field is not symmetric at {:?}",
                            &grid.point(i)[..n]
                        )));
                    }
                }
            }
            for _ in 0..ELLIPTICITY_DIRECTIONS {
                let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm2: f64 = xi.iter().map(|v| v * v).sum();
                let mut q = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        q += self.entry(j, k, i) * xi[j] * xi[k];
                    }
                }
                let lo = self.c1 * w[i] * norm2;
                let hi = self.c2 * w[i] * norm2;
                let slack = 1e-12 * hi;
                if q < lo - slack || q > hi + slack {
                    return Err(Error::Parameter(format!(
                        "degenerate ellipticity fails at {:?}",
                        &grid.point(i)[..n]
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Scalar(Weight),
    Matrix(MatrixField),
}

impl Coefficient {
    pub fn weight(&self) -> &Weight {
        match self {
            Coefficient::Scalar(w) => w,
            Coefficient::Matrix(a) => a.weight(),
        }
    }
}

/// Right-hand side: a field `f` acting by `∫ f v`, or a flux `G` acting by
/// `∫ G·∇^s v = ∫ (-div^s G) v`.
#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Field(ScalarField),
    Flux(VectorField),
}

/// Linear coefficient used by the inner solves.
enum LinearCoefficient<'a> {
    Scalar(&'a [f64]),
    Matrix(&'a MatrixField),
}

struct Tables {
    gradient: Vec<Vec<Complex64>>,
    /// `(2π|ξ|)^{2s}`
    flap: Vec<f64>,
    /// `⟨ξ⟩^{-s}`
    bessel: Vec<Complex64>,
}

/// Discrete problem. See the module documentation.
#[derive(Clone)]
pub struct PDEProblem {
    grid: Grid,
    domain: Domain,
    s: f64,
    p: f64,
    coefficient: Coefficient,
    rhs: Rhs,
    /// Interior part of the right-hand side as a field.
    f: ScalarField,
    g: ScalarField,
    tables: Arc<Tables>,
}

impl std::fmt::Debug for PDEProblem {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("PDEProblem")
            .field("grid", &self.grid)
            .field("omega", self.domain.shape())
            .field("s", &self.s)
            .field("p", &self.p)
            .finish()
    }
}

/// Smallest admissible exponent.
pub const MIN_P: f64 = 1.1;

impl PDEProblem {
    pub fn new(
        domain: Domain,
        s: f64,
        p: f64,
        coefficient: Coefficient,
        rhs: Rhs,
        g: Option<ScalarField>,
    ) -> Result<Self> {
        let grid = coefficient.weight().grid().clone();
        if domain.inside().len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Parameter(format!("order s={s} must lie in (0,1)")));
        }
        if !(p >= MIN_P) || !p.is_finite() {
            return Err(Error::Parameter(format!(
                "exponent p={p} is below {MIN_P}; the degenerate coefficient |∇^s u|^(p-2) \
                 makes the iteration unreliable this close to 1"
            )));
        }
        if matches!(coefficient, Coefficient::Matrix(_)) && p != 2.0 {
            return Err(Error::Parameter("matrix coefficients require p = 2".into()));
        }
        let g = match g {
            Some(g) => {
                grid.check_same(g.grid())?;
                if p != 2.0 && g.max_abs() != 0.0 {
                    return Err(Error::Parameter("exterior data g must vanish unless p = 2".into()));
                }
                if domain.is_torus() && g.max_abs() != 0.0 {
                    return Err(Error::Parameter("the torus has no exterior".into()));
                }
                g
            }
            None => ScalarField::zeros(&grid),
        };
        let gradient = (0..grid.dim())
            .map(|j| symbol_table(&grid, &MultiplierKind::RieszGradient { j, s }))
            .collect::<Result<Vec<_>>>()?;
        let flap = (0..grid.len())
            .map(|i| gradient.iter().map(|t| t[i].norm_sqr()).sum::<f64>())
            .collect();
        let bessel = symbol_table(&grid, &MultiplierKind::BesselPotential { sigma: s })?;
        let tables = Arc::new(Tables {
            gradient,
            flap,
            bessel,
        });
        let mut prob = PDEProblem {
            f: ScalarField::zeros(&grid),
            grid,
            domain,
            s,
            p,
            coefficient,
            rhs: Rhs::Field(ScalarField::zeros(&g.grid().clone())),
            g,
            tables,
        };
        prob.set_rhs(rhs)?;
        Ok(prob)
    }

    fn set_rhs(&mut self, rhs: Rhs) -> Result<()> {
        let mut f = match &rhs {
            Rhs::Field(f) => {
                self.grid.check_same(f.grid())?;
                f.values().to_vec()
            }
            Rhs::Flux(v) => {
                self.grid.check_same(v.grid())?;
                let flux: Vec<Vec<f64>> =
                    v.components().iter().map(|c| c.values().to_vec()).collect();
                self.neg_div(flux)?
            }
        };
        self.domain.project(&mut f);
        self.f = ScalarField::new(self.grid.clone(), f)?;
        self.rhs = rhs;
        Ok(())
    }

    /// Same problem with another right-hand side.
    pub fn with_rhs(&self, rhs: Rhs) -> Result<Self> {
        let mut p = self.clone();
        p.set_rhs(rhs)?;
        Ok(p)
    }

    /// Same problem with other exterior data.
    pub fn with_exterior(&self, g: ScalarField) -> Result<Self> {
        PDEProblem::new(
            self.domain.clone(),
            self.s,
            self.p,
            self.coefficient.clone(),
            self.rhs.clone(),
            Some(g),
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn domain(&self) -> &Domain {
        &self.domain
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn coefficient(&self) -> &Coefficient {
        &self.coefficient
    }
    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }
    /// Interior right-hand side as a field.
    pub fn rhs_field(&self) -> &ScalarField {
        &self.f
    }
    pub fn exterior(&self) -> &ScalarField {
        &self.g
    }

    fn weight_values(&self) -> &[f64] {
        self.coefficient.weight().values().values()
    }

    fn h_n(&self) -> f64 {
        self.grid.cell_volume()
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h_n() * compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
    }

    fn gradient_raw(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let spec = self
            .grid
            .forward(&ScalarField::new(self.grid.clone(), u.to_vec())?)?;
        self.tables
            .gradient
            .iter()
            .map(|t| {
                let c = spec.coefficients().iter().zip(t).map(|(a, m)| a * m).collect();
                Ok(self
                    .grid
                    .inverse(&SpectralField::new(self.grid.clone(), c)?)?
                    .into_values())
            })
            .collect()
    }

    fn neg_div(&self, flux: Vec<Vec<f64>>) -> Result<Vec<f64>> {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for (comp, t) in flux.into_iter().zip(&self.tables.gradient) {
            let spec = self.grid.forward(&ScalarField::new(self.grid.clone(), comp)?)?;
            for ((a, c), m) in acc.iter_mut().zip(spec.coefficients()).zip(t) {
                *a -= c * m;
            }
        }
        Ok(self
            .grid
            .inverse(&SpectralField::new(self.grid.clone(), acc)?)?
            .into_values())
    }

    /// `-div^s(a ∇^s u)` with a frozen linear coefficient, unprojected.
    fn linear_raw(&self, coef: &LinearCoefficient<'_>, u: &[f64]) -> Result<Vec<f64>> {
        let grad = self.gradient_raw(u)?;
        let flux = match coef {
            LinearCoefficient::Scalar(a) => grad
                .iter()
                .map(|gj| gj.iter().zip(a.iter()).map(|(x, w)| w * x).collect())
                .collect(),
            LinearCoefficient::Matrix(m) => {
                let n = self.grid.dim();
                (0..n)
                    .map(|j| {
                        (0..self.grid.len())
                            .map(|i| (0..n).map(|k| m.entry(j, k, i) * grad[k][i]).sum())
                            .collect()
                    })
                    .collect()
            }
        };
        self.neg_div(flux)
    }

    /// `w |G|^{p-2} G`, zero where `G = 0`.
    fn nonlinear_flux(&self, grad: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let w = self.weight_values();
        let n = self.grid.len();
        let factor: Vec<f64> = (0..n)
            .map(|i| {
                let m2: f64 = grad.iter().map(|g| g[i] * g[i]).sum();
                if self.p == 2.0 {
                    w[i]
                } else if m2 == 0.0 {
                    0.0
                } else {
                    w[i] * m2.powf(0.5 * (self.p - 2.0))
                }
            })
            .collect();
        grad.iter()
            .map(|g| g.iter().zip(&factor).map(|(x, a)| a * x).collect())
            .collect()
    }

    fn operator_raw(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = match &self.coefficient {
            Coefficient::Matrix(m) => self.linear_raw(&LinearCoefficient::Matrix(m), u)?,
            Coefficient::Scalar(_) => {
                let grad = self.gradient_raw(u)?;
                self.neg_div(self.nonlinear_flux(&grad))?
            }
        };
        self.domain.project(&mut out);
        Ok(out)
    }

    /// `T u = -div^s(w |∇^s u|^{p-2} ∇^s u)` (or `-div^s(A ∇^s u)`) on the
    /// interior; exterior entries are zero.
    pub fn apply_operator(&self, u: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(u.grid())?;
        ScalarField::new(self.grid.clone(), self.operator_raw(u.values())?)
    }

    /// `∇^s u` of the full field.
    pub fn gradient(&self, u: &ScalarField) -> Result<VectorField> {
        let comps = self
            .gradient_raw(u.values())?
            .into_iter()
            .map(|c| ScalarField::new(self.grid.clone(), c))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(comps)
    }

    fn energy_raw(&self, u: &[f64]) -> Result<f64> {
        let grad = self.gradient_raw(u)?;
        let n = self.grid.len();
        let dim = self.grid.dim();
        let w = self.weight_values();
        let density: Vec<f64> = match &self.coefficient {
            Coefficient::Scalar(_) => (0..n)
                .map(|i| {
                    let m2: f64 = grad.iter().map(|g| g[i] * g[i]).sum();
                    w[i] * m2.powf(0.5 * self.p) / self.p
                })
                .collect(),
            Coefficient::Matrix(m) => (0..n)
                .map(|i| {
                    let mut q = 0.0;
                    for j in 0..dim {
                        for k in 0..dim {
                            q += m.entry(j, k, i) * grad[j][i] * grad[k][i];
                        }
                    }
                    0.5 * q
                })
                .collect(),
        };
        Ok(self.h_n() * compensated_sum(density) - self.dot(self.f.values(), u))
    }

    /// `E(u) = (1/p) ∫ w |∇^s u|^p - ∫_Ω f u`.
    pub fn energy(&self, u: &ScalarField) -> Result<f64> {
        self.grid.check_same(u.grid())?;
        self.energy_raw(u.values())
    }

    /// `∫_Ω a b`, the pairing of interior fields.
    pub fn pairing(&self, a: &ScalarField, b: &ScalarField) -> Result<f64> {
        let mut av = a.values().to_vec();
        self.domain.project(&mut av);
        Ok(self.dot(&av, b.values()))
    }

    fn bessel_norm(&self, r: &[f64]) -> Result<f64> {
        let spec = self
            .grid
            .forward(&ScalarField::new(self.grid.clone(), r.to_vec())?)?;
        Ok((self.grid.spec().volume()
            * compensated_sum(
                spec.coefficients()
                    .iter()
                    .zip(&self.tables.bessel)
                    .map(|(c, m)| (c * m).norm_sqr()),
            ))
        .sqrt())
    }

    /// Interior right-hand side after lifting: `f - T g` on Ω.
    fn lifted_rhs(&self) -> Result<Vec<f64>> {
        let mut b = self.f.values().to_vec();
        if self.g.max_abs() != 0.0 {
            let tg = self.operator_raw(self.g.values())?;
            for (x, t) in b.iter_mut().zip(tg) {
                *x -= t;
            }
        }
        Ok(b)
    }

    fn residual_scale(&self) -> Result<f64> {
        let s = self.bessel_norm(&self.lifted_rhs()?)?;
        Ok(if s > 0.0 { s } else { 1.0 })
    }

    /// Dual-norm surrogate of the weak residual `T u - f` tested against
    /// interior fields: `‖Λ_s P(Tu - f)‖_{L²}`, relative to `‖Λ_s P(f - Tg)‖`.
    pub fn residual_norm(&self, u: &ScalarField) -> Result<f64> {
        let r = self.residual_raw(u.values())?;
        Ok(self.bessel_norm(&r)? / self.residual_scale()?)
    }

    fn residual_raw(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.operator_raw(u)?;
        for (x, f) in r.iter_mut().zip(self.f.values()) {
            *x -= f;
        }
        Ok(r)
    }

    /// `P (c (-Δ)^s + I)^{-1} P r`, the spectral preconditioner with constant `c`.
    pub fn spectral_smoother(&self, r: &ScalarField, c: f64) -> Result<ScalarField> {
        self.grid.check_same(r.grid())?;
        let pc = SpectralPreconditioner {
            prob: self,
            kind: Preconditioner::Spectral,
            c,
            scale: Vec::new(),
        };
        ScalarField::new(self.grid.clone(), pc.solve(r.values())?)
    }

    /// Median of the weight over Ω.
    pub fn median_weight(&self) -> f64 {
        self.median_over_domain(self.weight_values())
    }

    fn median_over_domain(&self, a: &[f64]) -> f64 {
        let mut v: Vec<f64> = a
            .iter()
            .zip(self.domain.inside())
            .filter(|(_, &b)| b)
            .map(|(x, _)| *x)
            .collect();
        v.sort_by(|x, y| x.total_cmp(y));
        let m = v[v.len() / 2];
        if m > 0.0 {
            m
        } else {
            v.iter().copied().filter(|x| *x > 0.0).fold(1.0, f64::min)
        }
    }
}

/// Preconditioner for the conjugate-gradient and descent iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    /// `(c (-Δ)^s + I)^{-1}` with `c` the median coefficient over Ω.
    Spectral,
    /// `D^{-1/2} (c (-Δ)^s + I)^{-1} D^{-1/2}`, `D = a / c`.
    WeightScaled,
    None,
}

struct SpectralPreconditioner<'a> {
    prob: &'a PDEProblem,
    kind: Preconditioner,
    c: f64,
    scale: Vec<f64>,
}

impl<'a> SpectralPreconditioner<'a> {
    fn new(prob: &'a PDEProblem, kind: Preconditioner, coefficient: &[f64]) -> Self {
        let c = prob.median_over_domain(coefficient);
        let scale = match kind {
            Preconditioner::WeightScaled => coefficient
                .iter()
                .map(|a| (a / c).max(1e-6).powf(-0.5))
                .collect(),
            _ => Vec::new(),
        };
        SpectralPreconditioner {
            prob,
            kind,
            c,
            scale,
        }
    }

    fn spectral(&self, r: &[f64], inverse: bool) -> Result<Vec<f64>> {
        let grid = &self.prob.grid;
        let spec = grid.forward(&ScalarField::new(grid.clone(), r.to_vec())?)?;
        let coeffs = spec
            .coefficients()
            .iter()
            .zip(&self.prob.tables.flap)
            .map(|(x, l)| {
                let m = self.c * l + 1.0;
                if inverse {
                    x / m
                } else {
                    x * m
                }
            })
            .collect();
        Ok(grid
            .inverse(&SpectralField::new(grid.clone(), coeffs)?)?
            .into_values())
    }

    fn scaled(&self, r: &[f64], inverse: bool) -> Result<Vec<f64>> {
        let mut x = r.to_vec();
        self.prob.domain.project(&mut x);
        match self.kind {
            Preconditioner::None => Ok(x),
            Preconditioner::Spectral => {
                let mut z = self.spectral(&x, inverse)?;
                self.prob.domain.project(&mut z);
                Ok(z)
            }
            Preconditioner::WeightScaled => {
                let pow = if inverse { 1.0 } else { -1.0 };
                for (v, d) in x.iter_mut().zip(&self.scale) {
                    *v *= d.powf(pow);
                }
                let mut z = self.spectral(&x, inverse)?;
                for (v, d) in z.iter_mut().zip(&self.scale) {
                    *v *= d.powf(pow);
                }
                self.prob.domain.project(&mut z);
                Ok(z)
            }
        }
    }

    /// `M^{-1} r`
    fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.scaled(r, true)
    }

    /// `M r`
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.scaled(r, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Preconditioned conjugate gradients, p = 2.
    Cg,
    /// Damped Kačanov fixed point.
    Kacanov,
    /// Preconditioned Barzilai–Borwein gradient descent with Armijo backtracking.
    Descent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative tolerance: preconditioned residual for CG, dual-norm residual
    /// for the nonlinear methods.
    pub tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
    /// Starting iterate; projected onto admissible fields (`u - g` on Ω).
    pub initial: Option<ScalarField>,
    /// Inner CG tolerance of the Kačanov steps.
    pub inner_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 5000,
            preconditioner: Preconditioner::Spectral,
            initial: None,
            inner_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Option<ScalarField>,
    pub method: Method,
    pub preconditioner: Preconditioner,
    pub iterations: usize,
    /// Dual-norm residual surrogate per iterate (see [`PDEProblem::residual_norm`]).
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub converged: bool,
    pub final_residual: f64,
    /// Inner conjugate-gradient iterations (Kačanov only).
    pub inner_iterations: usize,
}

impl SolveReport {
    pub fn solution(&self) -> &ScalarField {
        self.solution.as_ref().expect("report carries its solution")
    }

    /// Energy never increases beyond rounding.
    pub fn energy_monotone(&self) -> bool {
        self.energy_history
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-13 * w[0].abs().max(1e-300))
    }
}

struct CgOutcome {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// PCG on the admissible subspace; `apply` and `precond` must return projected
/// vectors.
fn pcg<A, M, C>(
    prob: &PDEProblem,
    apply: A,
    precond: M,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
    mut each: C,
) -> Result<CgOutcome>
where
    A: Fn(&[f64]) -> Result<Vec<f64>>,
    M: Fn(&[f64]) -> Result<Vec<f64>>,
    C: FnMut(&[f64]) -> Result<()>,
{
    let mut x = x0;
    let zb = precond(b)?;
    let bnorm = prob.dot(b, &zb).max(0.0).sqrt();
    if bnorm == 0.0 {
        let x = vec![0.0; b.len()];
        each(&x)?;
        return Ok(CgOutcome {
            x,
            iterations: 0,
            converged: true,
        });
    }
    let ax = apply(&x)?;
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z = precond(&r)?;
    let mut rz = prob.dot(&r, &z);
    let mut d = z.clone();
    let mut residuals = vec![rz.max(0.0).sqrt() / bnorm];
    each(&x)?;
    let mut it = 0;
    while it < max_iter && residuals[residuals.len() - 1] > tol {
        let ad = apply(&d)?;
        let dad = prob.dot(&d, &ad);
        if !(dad > 0.0) {
            return Err(Error::Breakdown(format!(
                "operator not positive definite (⟨d, Ad⟩ = {dad:e}) at iteration {it}"
            )));
        }
        let alpha = rz / dad;
        for i in 0..x.len() {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        z = precond(&r)?;
        let rz_new = prob.dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..d.len() {
            d[i] = z[i] + beta * d[i];
        }
        it += 1;
        residuals.push(rz.max(0.0).sqrt() / bnorm);
        each(&x)?;
    }
    let converged = residuals[residuals.len() - 1] <= tol;
    Ok(CgOutcome {
        x,
        iterations: it,
        converged,
    })
}

fn initial_shift(prob: &PDEProblem, opts: &SolveOptions) -> Result<Vec<f64>> {
    Ok(match &opts.initial {
        Some(u0) => {
            prob.grid.check_same(u0.grid())?;
            let mut x: Vec<f64> = u0
                .values()
                .iter()
                .zip(prob.g.values())
                .map(|(u, g)| u - g)
                .collect();
            prob.domain.project(&mut x);
            x
        }
        None => vec![0.0; prob.grid.len()],
    })
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Solve the `p = 2` problem for `ũ = u - g` by preconditioned conjugate
/// gradients and return `u = ũ + g`.
pub fn solve_linear(prob: &PDEProblem, opts: &SolveOptions) -> Result<SolveReport> {
    if prob.p != 2.0 {
        return Err(Error::Parameter(format!(
            "linear solve needs p = 2, got {}",
            prob.p
        )));
    }
    let coef: Vec<f64>;
    let lin = match &prob.coefficient {
        Coefficient::Scalar(w) => {
            coef = w.values().values().to_vec();
            LinearCoefficient::Scalar(&coef)
        }
        Coefficient::Matrix(m) => {
            coef = m.weight().values().values().to_vec();
            LinearCoefficient::Matrix(m)
        }
    };
    let pc = SpectralPreconditioner::new(prob, opts.preconditioner, &coef);
    let b = prob.lifted_rhs()?;
    let g = prob.g.values().to_vec();
    let scale = prob.residual_scale()?;
    let mut energies = Vec::new();
    let mut duals = Vec::new();
    let out = pcg(
        prob,
        |d| {
            let mut y = prob.linear_raw(&lin, d)?;
            prob.domain.project(&mut y);
            Ok(y)
        },
        |r| pc.solve(r),
        &b,
        initial_shift(prob, opts)?,
        opts.tol,
        opts.max_iter,
        |x| {
            let u = add(x, &g);
            energies.push(prob.energy_raw(&u)?);
            duals.push(prob.bessel_norm(&prob.residual_raw(&u)?)? / scale);
            Ok(())
        },
    )?;
    let solution = ScalarField::new(prob.grid.clone(), add(&out.x, &g))?;
    Ok(SolveReport {
        final_residual: *duals.last().unwrap_or(&0.0),
        solution: Some(solution),
        method: Method::Cg,
        preconditioner: opts.preconditioner,
        iterations: out.iterations,
        residual_history: duals,
        energy_history: energies,
        converged: out.converged,
        inner_iterations: 0,
    })
}

/// Start for the nonlinear methods when none is given: the `p = 2` solution
/// `v` scaled to minimise `t ↦ E(t v)`.
fn nonlinear_start(prob: &PDEProblem, opts: &SolveOptions) -> Result<Vec<f64>> {
    if opts.initial.is_some() {
        return initial_shift(prob, opts);
    }
    let w = prob.weight_values().to_vec();
    let pc = SpectralPreconditioner::new(prob, opts.preconditioner, &w);
    let lin = LinearCoefficient::Scalar(&w);
    let out = pcg(
        prob,
        |d| {
            let mut y = prob.linear_raw(&lin, d)?;
            prob.domain.project(&mut y);
            Ok(y)
        },
        |r| pc.solve(r),
        prob.f.values(),
        vec![0.0; prob.grid.len()],
        1e-6,
        opts.max_iter,
        |_| Ok(()),
    )?;
    let v = out.x;
    let b = prob.dot(prob.f.values(), &v);
    if !(b > 0.0) {
        return Ok(vec![0.0; v.len()]);
    }
    let a = prob.energy_raw(&v)? + b; // (1/p) ∫ w |∇^s v|^p
    let t = (b / (prob.p * a)).powf(1.0 / (prob.p - 1.0));
    Ok(v.iter().map(|x| t * x).collect())
}

/// Backtracking along `d` from `x`; `slope = ⟨E'(x), d⟩ < 0`.
fn armijo(
    prob: &PDEProblem,
    x: &[f64],
    e0: f64,
    d: &[f64],
    slope: f64,
    t0: f64,
) -> Result<Option<(Vec<f64>, f64, f64)>> {
    let mut t = t0;
    for _ in 0..60 {
        let trial: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        let e = prob.energy_raw(&trial)?;
        if e <= e0 + 1e-4 * t * slope {
            return Ok(Some((trial, e, t)));
        }
        t *= 0.5;
    }
    Ok(None)
}

/// Nonlinear solve for `g = 0`.
pub fn solve_plaplace(prob: &PDEProblem, method: Method, opts: &SolveOptions) -> Result<SolveReport> {
    if prob.g.max_abs() != 0.0 {
        return Err(Error::Parameter("nonlinear solves need g = 0".into()));
    }
    if let Coefficient::Matrix(_) = prob.coefficient {
        return Err(Error::Parameter("nonlinear solves need a scalar weight".into()));
    }
    match method {
        Method::Cg => solve_linear(prob, opts),
        Method::Kacanov => kacanov(prob, opts),
        Method::Descent => descent(prob, opts),
    }
}

/// Dispatch on `p`: conjugate gradients for `p = 2`, Kačanov otherwise.
pub fn solve(prob: &PDEProblem, opts: &SolveOptions) -> Result<SolveReport> {
    if prob.p == 2.0 {
        solve_linear(prob, opts)
    } else {
        solve_plaplace(prob, Method::Kacanov, opts)
    }
}

fn gradient_magnitudes(prob: &PDEProblem, x: &[f64]) -> Result<Vec<f64>> {
    let grad = prob.gradient_raw(x)?;
    Ok((0..x.len())
        .map(|i| grad.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt())
        .collect())
}

fn kacanov(prob: &PDEProblem, opts: &SolveOptions) -> Result<SolveReport> {
    let scale = prob.residual_scale()?;
    let mut x = nonlinear_start(prob, opts)?;
    let mut e = prob.energy_raw(&x)?;
    let mut energies = vec![e];
    let mut residual = prob.bessel_norm(&prob.residual_raw(&x)?)? / scale;
    let mut duals = vec![residual];
    let w = prob.weight_values().to_vec();
    let mag0 = gradient_magnitudes(prob, &x)?;
    let eps0 = 1e-8 * prob.median_over_domain(&mag0).max(f64::MIN_POSITIVE);
    let mut inner_total = 0;
    let mut it = 0;
    while it < opts.max_iter && residual > opts.tol && prob.f.max_abs() > 0.0 {
        let eps = (eps0 * 0.5f64.powi(it as i32)).max(1e-6 * eps0);
        let mag = gradient_magnitudes(prob, &x)?;
        let a: Vec<f64> = mag
            .iter()
            .zip(&w)
            .map(|(m, w)| w * (m * m + eps * eps).powf(0.5 * (prob.p - 2.0)))
            .collect();
        let lin = LinearCoefficient::Scalar(&a);
        let pc = SpectralPreconditioner::new(prob, opts.preconditioner, &a);
        let inner_tol = opts.inner_tol.max(1e-3 * residual * residual).min(1e-2);
        let out = pcg(
            prob,
            |d| {
                let mut y = prob.linear_raw(&lin, d)?;
                prob.domain.project(&mut y);
                Ok(y)
            },
            |r| pc.solve(r),
            prob.f.values(),
            x.clone(),
            inner_tol,
            opts.max_iter,
            |_| Ok(()),
        )?;
        inner_total += out.iterations;
        let d: Vec<f64> = out.x.iter().zip(&x).map(|(v, u)| v - u).collect();
        let r = prob.residual_raw(&x)?;
        let slope = prob.dot(&r, &d);
        let step = if slope < 0.0 {
            armijo(prob, &x, e, &d, slope, 1.0)?
        } else {
            None
        };
        let (nx, ne) = match step {
            Some((nx, ne, _)) => (nx, ne),
            None => {
                // Frozen-coefficient direction not usable: take a preconditioned
                // gradient step instead.
                let z = pc.solve(&r)?;
                let dz: Vec<f64> = z.iter().map(|v| -v).collect();
                let slope = prob.dot(&r, &dz);
                match armijo(prob, &x, e, &dz, slope, 1.0)? {
                    Some((nx, ne, _)) => (nx, ne),
                    None => break,
                }
            }
        };
        x = nx;
        e = ne;
        residual = prob.bessel_norm(&prob.residual_raw(&x)?)? / scale;
        energies.push(e);
        duals.push(residual);
        it += 1;
    }
    finish(prob, x, Method::Kacanov, opts, it, duals, energies, inner_total)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prob: &PDEProblem,
    x: Vec<f64>,
    method: Method,
    opts: &SolveOptions,
    iterations: usize,
    duals: Vec<f64>,
    energies: Vec<f64>,
    inner: usize,
) -> Result<SolveReport> {
    let final_residual = *duals.last().unwrap_or(&0.0);
    Ok(SolveReport {
        solution: Some(ScalarField::new(prob.grid.clone(), x)?),
        method,
        preconditioner: opts.preconditioner,
        iterations,
        converged: final_residual <= opts.tol || prob.f.max_abs() == 0.0,
        final_residual,
        residual_history: duals,
        energy_history: energies,
        inner_iterations: inner,
    })
}

fn descent(prob: &PDEProblem, opts: &SolveOptions) -> Result<SolveReport> {
    let scale = prob.residual_scale()?;
    let mut x = nonlinear_start(prob, opts)?;
    let mut e = prob.energy_raw(&x)?;
    let mut r = prob.residual_raw(&x)?;
    let mut residual = prob.bessel_norm(&r)? / scale;
    let mut energies = vec![e];
    let mut duals = vec![residual];
    let mag = gradient_magnitudes(prob, &x)?;
    let coef: Vec<f64> = mag
        .iter()
        .zip(prob.weight_values())
        .map(|(m, w)| {
            if prob.p == 2.0 || *m == 0.0 {
                *w
            } else {
                w * (prob.p - 1.0) * m.powf(prob.p - 2.0)
            }
        })
        .collect();
    let pc = SpectralPreconditioner::new(prob, opts.preconditioner, &coef);
    let mut z = pc.solve(&r)?;
    let mut alpha = 1.0;
    let mut it = 0;
    while it < opts.max_iter && residual > opts.tol && prob.f.max_abs() > 0.0 {
        let d: Vec<f64> = z.iter().map(|v| -v).collect();
        let slope = prob.dot(&r, &d);
        if !(slope < 0.0) {
            break;
        }
        let Some((nx, ne, _)) = armijo(prob, &x, e, &d, slope, alpha)? else {
            break;
        };
        let nr = prob.residual_raw(&nx)?;
        let nz = pc.solve(&nr)?;
        let s: Vec<f64> = nx.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = nr.iter().zip(&r).map(|(a, b)| a - b).collect();
        let yz: Vec<f64> = nz.iter().zip(&z).map(|(a, b)| a - b).collect();
        let sy = prob.dot(&s, &y);
        let y_my = prob.dot(&y, &yz);
        alpha = if sy > 0.0 && y_my > 0.0 {
            sy / y_my
        } else {
            let ms = pc.apply(&s)?;
            let sms = prob.dot(&s, &ms);
            if sy > 0.0 && sms > 0.0 {
                sms / sy
            } else {
                2.0 * alpha
            }
        };
        x = nx;
        e = ne;
        r = nr;
        z = nz;
        residual = prob.bessel_norm(&r)? / scale;
        energies.push(e);
        duals.push(residual);
        it += 1;
    }
    finish(prob, x, Method::Descent, opts, it, duals, energies, 0)
}

/// `⟨Tu - Tv, u - v⟩` and the lower bound it must exceed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityGap {
    pub lhs: f64,
    pub lower_bound: f64,
}

impl MonotonicityGap {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs >= self.lower_bound - slack * self.lower_bound.abs().max(1.0)
    }
}

/// Lower bounds: `2^{2-p} ‖∇^s(u-v)‖^p` for `p >= 2`;
/// `(p-1) ‖∇^s(u-v)‖² (‖∇^s u‖ + ‖∇^s v‖)^{p-2}` for `1 < p < 2`, all in `L^p_w`.
pub fn monotonicity_gap(prob: &PDEProblem, u: &ScalarField, v: &ScalarField) -> Result<MonotonicityGap> {
    let tu = prob.apply_operator(u)?;
    let tv = prob.apply_operator(v)?;
    let diff = u.sub(v)?;
    let lhs = prob.pairing(&tu.sub(&tv)?, &diff)?;
    let p = prob.p;
    let w = prob.coefficient.weight().values();
    let gd = lp_norm(&prob.gradient(&diff)?, p, Some(w));
    let lower_bound = if p >= 2.0 {
        match &prob.coefficient {
            Coefficient::Matrix(m) => m.c1 * gd * gd,
            Coefficient::Scalar(_) => 2f64.powf(2.0 - p) * gd.powf(p),
        }
    } else {
        let gu = lp_norm(&prob.gradient(u)?, p, Some(w));
        let gv = lp_norm(&prob.gradient(v)?, p, Some(w));
        if gu + gv == 0.0 {
            0.0
        } else {
            (p - 1.0) * gd * gd * (gu + gv).powf(p - 2.0)
        }
    };
    Ok(MonotonicityGap { lhs, lower_bound })
}

/// Problem whose exact discrete solution is `u_star` (with `g = 0`).
pub fn manufacture(
    domain: Domain,
    s: f64,
    p: f64,
    coefficient: Coefficient,
    u_star: &ScalarField,
) -> Result<PDEProblem> {
    if !domain.supports(u_star) {
        return Err(Error::Geometry(
            "manufactured solution is not supported inside Ω".into(),
        ));
    }
    if domain.is_torus() && u_star.mean().abs() > 1e-12 * u_star.max_abs().max(1e-300) {
        return Err(Error::Parameter(
            "manufactured solution on the torus must be mean-free".into(),
        ));
    }
    let grid = u_star.grid().clone();
    let zero = Rhs::Field(ScalarField::zeros(&grid));
    let prob = PDEProblem::new(domain, s, p, coefficient, zero, None)?;
    let f = prob.apply_operator(u_star)?;
    prob.with_rhs(Rhs::Field(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracops::riesz_gradient;
    use crate::grid::{bump, sample, GridSpec};
    use crate::weights::power_weight;
    use std::f64::consts::PI;

    fn line(n: usize, l: f64) -> Grid {
        Grid::new(GridSpec::centered(1, n, l)).unwrap()
    }

    fn interval(g: &Grid, half: f64) -> Domain {
        Domain::new(
            g,
            Omega::Box {
                lower: vec![-half],
                upper: vec![half],
            },
        )
        .unwrap()
    }

    fn rel(a: &ScalarField, b: &ScalarField) -> f64 {
        lp_norm(&a.sub(b).unwrap(), 2.0, None) / lp_norm(b, 2.0, None)
    }

    #[test]
    fn torus_single_mode() {
        let g = Grid::new(GridSpec::with_origin(1, 64, 1.0, vec![0.0])).unwrap();
        let w = Weight::unit(&g, 2.0).unwrap();
        let u = sample(&g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        for s in [0.3, 0.7] {
            let dom = Domain::new(&g, Omega::Torus).unwrap();
            let f = u.scaled((2.0 * PI).powf(2.0 * s));
            let prob = PDEProblem::new(
                dom,
                s,
                2.0,
                Coefficient::Scalar(w.clone()),
                Rhs::Field(f.clone()),
                None,
            )
            .unwrap();
            let tu = prob.apply_operator(&u).unwrap();
            assert!(tu.sub(&f).unwrap().max_abs() < 1e-12 * f.max_abs());
            let opts = SolveOptions {
                tol: 1e-13,
                ..Default::default()
            };
            let rep = solve_linear(&prob, &opts).unwrap();
            assert!(rep.converged);
            assert!(rel(rep.solution(), &u) < 1e-9);
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = line(64, 2.0);
        let w = Weight::unit(&g, 2.0).unwrap();
        for p in [2.0, 3.0, 1.5] {
            let prob = PDEProblem::new(
                interval(&g, 0.5),
                0.5,
                p,
                Coefficient::Scalar(w.with_p(p).unwrap()),
                Rhs::Field(ScalarField::zeros(&g)),
                None,
            )
            .unwrap();
            assert_eq!(prob.energy(&ScalarField::zeros(&g)).unwrap(), 0.0);
            assert_eq!(prob.apply_operator(&ScalarField::zeros(&g)).unwrap().max_abs(), 0.0);
            let rep = solve(&prob, &SolveOptions::default()).unwrap();
            assert_eq!(rep.solution().max_abs(), 0.0);
        }
    }

    #[test]
    fn refuses_p_near_one() {
        let g = line(32, 2.0);
        let w = Weight::unit(&g, 1.05).unwrap();
        let r = PDEProblem::new(
            interval(&g, 0.5),
            0.5,
            1.05,
            Coefficient::Scalar(w),
            Rhs::Field(ScalarField::zeros(&g)),
            None,
        );
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn domain_margin_enforced() {
        let g = line(32, 2.0);
        assert!(Domain::new(
            &g,
            Omega::Box {
                lower: vec![-1.0],
                upper: vec![0.0]
            }
        )
        .is_err());
        assert!(Domain::new(
            &g,
            Omega::Ball {
                center: vec![0.0],
                radius: 1e-3
            }
        )
        .is_ok());
    }

    #[test]
    fn isotropic_matrix_matches_scalar() {
        let g = Grid::new(GridSpec::centered(2, 32, 2.0)).unwrap();
        let w = power_weight(&g, &[0.1, 0.0], 0.5, 2.0).unwrap();
        let dom = Domain::new(
            &g,
            Omega::Ball {
                center: vec![0.0, 0.0],
                radius: 0.6,
            },
        )
        .unwrap();
        let u = bump(&g, &[0.0, 0.1], 0.4, 1.0).unwrap();
        let zero = || Rhs::Field(ScalarField::zeros(&g));
        let a = PDEProblem::new(dom.clone(), 0.4, 2.0, Coefficient::Scalar(w.clone()), zero(), None)
            .unwrap();
        let m = MatrixField::isotropic(w).unwrap();
        let b = PDEProblem::new(dom, 0.4, 2.0, Coefficient::Matrix(m), zero(), None).unwrap();
        let ta = a.apply_operator(&u).unwrap();
        let tb = b.apply_operator(&u).unwrap();
        assert!(ta.sub(&tb).unwrap().max_abs() <= 1e-12 * ta.max_abs());
    }

    #[test]
    fn energy_derivative_matches_operator() {
        let g = line(128, 2.0);
        let dom = interval(&g, 0.6);
        let w = power_weight(&g, &[0.05], 0.5, 3.0).unwrap();
        let f = bump(&g, &[0.1], 0.3, 1.0).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let prob = PDEProblem::new(
                dom.clone(),
                0.5,
                p,
                Coefficient::Scalar(w.with_p(p).unwrap()),
                Rhs::Field(f.clone()),
                None,
            )
            .unwrap();
            let u = bump(&g, &[0.0], 0.5, 1.0).unwrap();
            let v = bump(&g, &[0.2], 0.3, 2.0).unwrap();
            let h = 1e-5;
            let mut up = u.clone();
            up.axpy(h, &v).unwrap();
            let mut um = u.clone();
            um.axpy(-h, &v).unwrap();
            let fd = (prob.energy(&up).unwrap() - prob.energy(&um).unwrap()) / (2.0 * h);
            let tu = prob.apply_operator(&u).unwrap();
            let exact = prob.pairing(&tu.sub(prob.rhs_field()).unwrap(), &v).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "p={p}: {fd} vs {exact}");
            if p == 2.0 {
                let q = 0.5 * prob.pairing(&tu, &u).unwrap() - prob.pairing(&f, &u).unwrap();
                assert!((prob.energy(&u).unwrap() - q).abs() <= 1e-12 * q.abs());
            }
        }
    }

    #[test]
    fn manufactured_linear_and_scaling() {
        let g = line(256, 2.0);
        let dom = interval(&g, 0.5);
        let w = power_weight(&g, &[0.0], 0.5, 2.0).unwrap();
        let u = bump(&g, &[0.05], 0.3, 1.0).unwrap();
        let prob = manufacture(dom.clone(), 0.5, 2.0, Coefficient::Scalar(w.clone()), &u).unwrap();
        let rep = solve_linear(
            &prob,
            &SolveOptions {
                tol: 1e-13,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.converged, "{:?}", rep.final_residual);
        assert!(rep.energy_monotone());
        assert!(rel(rep.solution(), &u) < 1e-8, "{}", rel(rep.solution(), &u));
        let twice = manufacture(dom, 0.5, 2.0, Coefficient::Scalar(w), &u.scaled(2.0)).unwrap();
        let d = twice.rhs_field().sub(&prob.rhs_field().scaled(2.0)).unwrap();
        assert!(d.max_abs() <= 1e-12 * twice.rhs_field().max_abs());
    }

    #[test]
    fn manufacture_rejects_outside_support() {
        let g = line(64, 2.0);
        let dom = interval(&g, 0.25);
        let w = Weight::unit(&g, 2.0).unwrap();
        let u = bump(&g, &[0.0], 0.5, 1.0).unwrap();
        assert!(manufacture(dom, 0.5, 2.0, Coefficient::Scalar(w), &u).is_err());
    }

    #[test]
    fn p2_gap_is_energy_norm() {
        let g = line(64, 2.0);
        let w = Weight::unit(&g, 2.0).unwrap();
        let prob = PDEProblem::new(
            interval(&g, 0.6),
            0.5,
            2.0,
            Coefficient::Scalar(w),
            Rhs::Field(ScalarField::zeros(&g)),
            None,
        )
        .unwrap();
        let u = bump(&g, &[0.0], 0.4, 1.0).unwrap();
        let v = bump(&g, &[0.1], 0.3, 1.0).unwrap();
        let gap = monotonicity_gap(&prob, &u, &v).unwrap();
        let gd = riesz_gradient(&u.sub(&v).unwrap(), 0.5).unwrap();
        let e = lp_norm(&gd, 2.0, None).powi(2);
        assert!((gap.lhs - e).abs() <= 1e-12 * e);
        assert!((gap.lower_bound - e).abs() <= 1e-12 * e);
        let same = monotonicity_gap(&prob, &u, &u).unwrap();
        assert_eq!((same.lhs, same.lower_bound), (0.0, 0.0));
    }
}
