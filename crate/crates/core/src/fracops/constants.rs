//! Normalizing constants of the Riesz fractional gradient and Riesz potential.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracConstants {
    /// Gradient constant `c_{n,s}`.
    pub c: f64,
    /// Riesz potential constant `γ_{n,s}`.
    pub gamma: f64,
}

/// `c_{n,s} = Γ((n+s+1)/2) / (π^{n/2} 2^{-s} Γ((1-s)/2))`, `s ∈ (0,1)`.
pub fn gradient_constant(n: usize, s: f64) -> Result<f64> {
    if n == 0 || !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!(
            "c_{{n,s}} needs n >= 1 and s in (0,1), got n={n}, s={s}"
        )));
    }
    let nf = n as f64;
    let lg = ln_gamma(0.5 * (nf + s + 1.0)) - ln_gamma(0.5 * (1.0 - s));
    Ok((lg - 0.5 * nf * PI.ln() + s * 2f64.ln()).exp())
}

/// `γ_{n,σ} = π^{n/2} 2^σ Γ(σ/2) / Γ((n-σ)/2)`, `σ ∈ (0,n)`.
pub fn potential_constant(n: usize, sigma: f64) -> Result<f64> {
    let nf = n as f64;
    if n == 0 || !(sigma > 0.0 && sigma < nf) {
        return Err(Error::Parameter(format!(
            "γ_{{n,σ}} needs σ in (0,n), got n={n}, σ={sigma}"
        )));
    }
    let lg = ln_gamma(0.5 * sigma) - ln_gamma(0.5 * (nf - sigma));
    Ok((lg + 0.5 * nf * PI.ln() + sigma * 2f64.ln()).exp())
}

pub fn constants(n: usize, s: f64) -> Result<FracConstants> {
    Ok(FracConstants {
        c: gradient_constant(n, s)?,
        gamma: potential_constant(n, s)?,
    })
}

/// `γ_{n,1-s} c_{n,s}`. Since `Γ(x+1) = xΓ(x)`
/// this equals `n + s - 1` exactly.
pub fn gamma_c_product(n: usize, s: f64) -> Result<f64> {
    Ok(potential_constant(n, 1.0 - s)? * gradient_constant(n, s)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    // mpmath, 30 digits
    const C_TABLE: [(usize, f64, f64); 9] = [
        (1, 0.25, 0.266554830338112),
        (1, 0.5, 0.199471140200716),
        (1, 0.75, 0.111952770812211),
        (2, 0.25, 0.143174486570411),
        (2, 0.5, 0.114111419793702),
        (2, 0.75, 0.0677479862180824),
        (3, 0.25, 0.095452917419997),
        (3, 0.5, 0.0793670449178012),
        (3, 0.75, 0.0489990513858929),
    ];

    #[test]
    fn gradient_constant_matches_high_precision() {
        for (n, s, c) in C_TABLE {
            let got = gradient_constant(n, s).unwrap();
            assert!((got - c).abs() <= 1e-13 * c, "n={n} s={s}: {got} vs {c}");
        }
    }

    #[test]
    fn product_is_n_plus_s_minus_one() {
        for n in 1..=3 {
            for i in 1..100 {
                let s = i as f64 / 100.0;
                let want = n as f64 + s - 1.0;
                let got = gamma_c_product(n, s).unwrap();
                assert!((got - want).abs() <= 1e-12 * want, "n={n} s={s}: {got}");
            }
        }
        assert!((gamma_c_product(1, 0.5).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gradient_constant_bounded_in_s() {
        for n in 1..=3 {
            for i in 1..=99 {
                let c = gradient_constant(n, i as f64 / 100.0).unwrap();
                assert!(c > 0.0 && c < 1.0);
            }
        }
    }

    #[test]
    fn poles_rejected() {
        assert!(gradient_constant(1, 1.0).is_err());
        assert!(gradient_constant(1, 0.0).is_err());
        assert!(potential_constant(2, 2.0).is_err());
        assert!(potential_constant(1, 0.0).is_err());
    }
}
