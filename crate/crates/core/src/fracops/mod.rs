//! Fractional operators as Fourier multipliers.
//!
//! With `ξ = k / L` and `⟨ξ⟩ = (1 + 4π²|ξ|²)^{1/2}`:
//!
//! | kind                  | symbol                          | at ξ = 0 |
//! |-----------------------|---------------------------------|----------|
//! | `RieszGradient{j,s}`  | `2πiξ_j / |2πξ|^{1-s}`          | 0        |
//! | `Derivative{j}`       | `2πiξ_j`                        | 0        |
//! | `RieszPotential{σ}`   | `(2π|ξ|)^{-σ}`                  | 0        |
//! | `BesselPotential{σ}`  | `⟨ξ⟩^{-σ}`                      | 1        |
//! | `FractionalLaplacian{σ}` | `(2π|ξ|)^σ`, i.e. `(-Δ)^{σ/2}` | 0     |
//! | `RieszTransform{j}`   | `-iξ_j / |ξ|`                   | 0        |
//! | `Ts{s}`               | `(2π|ξ|)^s / ⟨ξ⟩^s`             | 0        |
//! | `Gs{s}`               | `⟨ξ⟩^s / (1 + (2π|ξ|)^s)`       | 1        |
//!
//! Symbols odd in `ξ_j` are set to zero on the modes with `k_j = -N/2`, which
//! have no partner of opposite sign on the lattice; otherwise the output of a
//! real field would not be real. Identities that mix odd and even symbols
//! therefore hold exactly on Nyquist-free fields
//! ([`ScalarField::without_nyquist`]).

mod constants;
mod pv;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, ScalarField, SpectralField, VectorField};
use crate::{Error, Result};

pub use constants::{constants, gamma_c_product, gradient_constant, potential_constant, FracConstants};
pub use pv::{pv_covered_points, riesz_gradient_pv, riesz_gradient_pv_truncated};

/// `(n, s, p)` shared by operators and norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub n: usize,
    pub s: f64,
    pub p: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64, p: f64) -> Result<Self> {
        if n == 0 || n > crate::grid::MAX_DIM {
            return Err(Error::Parameter(format!("dimension {n} not in 1..=3")));
        }
        check_order(s)?;
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Parameter(format!("exponent p={p} must exceed 1")));
        }
        Ok(FracParams { n, s, p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum MultiplierKind {
    RieszGradient { j: usize, s: f64 },
    Derivative { j: usize },
    RieszPotential { sigma: f64 },
    BesselPotential { sigma: f64 },
    FractionalLaplacian { sigma: f64 },
    RieszTransform { j: usize },
    Ts { s: f64 },
    Gs { s: f64 },
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("order s={s} must lie in (0,1)")))
    }
}

impl MultiplierKind {
    /// Range checks that depend on the ambient dimension.
    pub fn validate(&self, n: usize) -> Result<()> {
        let component = |j: usize| {
            if j < n {
                Ok(())
            } else {
                Err(Error::Parameter(format!(
                    "component {j} out of range for dimension {n}"
                )))
            }
        };
        match *self {
            MultiplierKind::RieszGradient { j, s } => {
                component(j)?;
                check_order(s)
            }
            MultiplierKind::Derivative { j } | MultiplierKind::RieszTransform { j } => component(j),
            MultiplierKind::RieszPotential { sigma } => {
                if sigma > 0.0 && sigma < n as f64 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "Riesz potential order {sigma} must lie in (0,{n})"
                    )))
                }
            }
            MultiplierKind::BesselPotential { sigma } => {
                if sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter("Bessel order must be finite".into()))
                }
            }
            MultiplierKind::FractionalLaplacian { sigma } => {
                if sigma > 0.0 && sigma < 2.0 {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!(
                        "fractional Laplacian order {sigma} must lie in (0,2)"
                    )))
                }
            }
            MultiplierKind::Ts { s } | MultiplierKind::Gs { s } => {
                if s > 0.0 && s.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Parameter(format!("order s={s} must be positive")))
                }
            }
        }
    }

    /// Axis along which the symbol is odd, if any.
    pub fn odd_axis(&self) -> Option<usize> {
        match *self {
            MultiplierKind::RieszGradient { j, .. }
            | MultiplierKind::Derivative { j }
            | MultiplierKind::RieszTransform { j } => Some(j),
            _ => None,
        }
    }
}

fn bracket(r: f64) -> f64 {
    (1.0 + 4.0 * PI * PI * r * r).sqrt()
}

/// Symbol at a frequency vector (no lattice conventions applied).
pub fn symbol(kind: &MultiplierKind, xi: &[f64]) -> Result<Complex64> {
    kind.validate(xi.len())?;
    Ok(raw_symbol(kind, xi))
}

fn raw_symbol(kind: &MultiplierKind, xi: &[f64]) -> Complex64 {
    let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let w = 2.0 * PI * r;
    let zero = Complex64::new(0.0, 0.0);
    match *kind {
        MultiplierKind::RieszGradient { j, s } => {
            if r == 0.0 {
                zero
            } else {
                Complex64::new(0.0, 2.0 * PI * xi[j] * w.powf(s - 1.0))
            }
        }
        MultiplierKind::Derivative { j } => Complex64::new(0.0, 2.0 * PI * xi[j]),
        MultiplierKind::RieszPotential { sigma } => {
            if r == 0.0 {
                zero
            } else {
                Complex64::new(w.powf(-sigma), 0.0)
            }
        }
        MultiplierKind::BesselPotential { sigma } => Complex64::new(bracket(r).powf(-sigma), 0.0),
        MultiplierKind::FractionalLaplacian { sigma } => {
            if r == 0.0 {
                zero
            } else {
                Complex64::new(w.powf(sigma), 0.0)
            }
        }
        MultiplierKind::RieszTransform { j } => {
            if r == 0.0 {
                zero
            } else {
                Complex64::new(0.0, -xi[j] / r)
            }
        }
        MultiplierKind::Ts { s } => {
            if r == 0.0 {
                zero
            } else {
                Complex64::new((w / bracket(r)).powf(s), 0.0)
            }
        }
        MultiplierKind::Gs { s } => Complex64::new(bracket(r).powf(s) / (1.0 + w.powf(s)), 0.0),
    }
}

/// Symbol values on the whole frequency lattice of `grid`, FFT order,
/// including the Nyquist convention.
pub fn symbol_table(grid: &Grid, kind: &MultiplierKind) -> Result<Vec<Complex64>> {
    kind.validate(grid.dim())?;
    let dim = grid.dim();
    let odd = kind.odd_axis();
    Ok((0..grid.len())
        .map(|idx| match odd {
            Some(j) if grid.is_nyquist_along(idx, j) => Complex64::new(0.0, 0.0),
            _ => raw_symbol(kind, &grid.frequency(idx)[..dim]),
        })
        .collect())
}

/// Pointwise product of symbol tables; the product of several multipliers.
pub fn product_table(grid: &Grid, kinds: &[MultiplierKind]) -> Result<Vec<Complex64>> {
    let mut table = vec![Complex64::new(1.0, 0.0); grid.len()];
    for kind in kinds {
        for (t, m) in table.iter_mut().zip(symbol_table(grid, kind)?) {
            *t *= m;
        }
    }
    Ok(table)
}

/// `c_k ← m_k c_k`.
pub fn multiply(u: &SpectralField, table: &[Complex64]) -> Result<SpectralField> {
    if table.len() != u.coefficients().len() {
        return Err(Error::GridMismatch);
    }
    let coefficients = u
        .coefficients()
        .iter()
        .zip(table)
        .map(|(c, m)| c * m)
        .collect();
    SpectralField::new(u.grid().clone(), coefficients)
}

/// Apply a precomputed symbol table to a real field.
pub fn apply_table(u: &ScalarField, table: &[Complex64]) -> Result<ScalarField> {
    let grid = u.grid();
    grid.inverse(&multiply(&grid.forward(u)?, table)?)
}

/// `F^{-1}(m · F u)` for one multiplier.
pub fn apply_multiplier(u: &ScalarField, kind: &MultiplierKind) -> Result<ScalarField> {
    apply_table(u, &symbol_table(u.grid(), kind)?)
}

/// Composition of multipliers, applied as one symbol product.
pub fn apply_product(u: &ScalarField, kinds: &[MultiplierKind]) -> Result<ScalarField> {
    apply_table(u, &product_table(u.grid(), kinds)?)
}

/// Riesz fractional gradient `∇^s u`, `s ∈ (0,1)`.
pub fn riesz_gradient(u: &ScalarField, s: f64) -> Result<VectorField> {
    check_order(s)?;
    let grid = u.grid();
    let spec = grid.forward(u)?;
    let comps = (0..grid.dim())
        .map(|j| {
            let table = symbol_table(grid, &MultiplierKind::RieszGradient { j, s })?;
            grid.inverse(&multiply(&spec, &table)?)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

/// Spectral classical gradient, the `s = 1` endpoint.
pub fn spectral_gradient(u: &ScalarField) -> Result<VectorField> {
    let grid = u.grid();
    let spec = grid.forward(u)?;
    let comps = (0..grid.dim())
        .map(|j| {
            let table = symbol_table(grid, &MultiplierKind::Derivative { j })?;
            grid.inverse(&multiply(&spec, &table)?)
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

/// Fractional divergence `div^s v = Σ_j ∂^s_j v_j`, summed in frequency space.
pub fn fractional_divergence(v: &VectorField, s: f64) -> Result<ScalarField> {
    check_order(s)?;
    let grid = v.grid();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, comp) in v.components().iter().enumerate() {
        let table = symbol_table(grid, &MultiplierKind::RieszGradient { j, s })?;
        let spec = grid.forward(comp)?;
        for ((a, c), m) in acc.iter_mut().zip(spec.coefficients()).zip(&table) {
            *a += c * m;
        }
    }
    grid.inverse(&SpectralField::new(grid.clone(), acc)?)
}
