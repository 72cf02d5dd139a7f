//! Uniform periodic grids on a box in R^n (n = 1, 2, 3), real fields sampled on
//! them, and their discrete Fourier coefficients.
//!
//! The box `[origin, origin + L)^n` is treated as a torus. Grid points are
//! `x_i = origin + i h` with `h = L / N`, stored row-major (last axis fastest).
//!
//! Fourier coefficients use the Fourier-series normalization
//!
//! ```text
//! c_k = N^{-n} Σ_j u_j exp(-2πi k·j / N),      u_j = Σ_k c_k exp(2πi k·j / N)
//! ```
//!
//! with integer wavenumbers `-N/2 <= k < N/2` and physical frequency `ξ = k / L`,
//! so `c_k ≈ L^{-n} û(k / L)` for the continuum transform `û(ξ) = ∫ u e^{-2πi x·ξ}`.
//! Parseval reads `h^n Σ_j |u_j|^2 = L^n Σ_k |c_k|^2`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Shape of a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
    pub origin: Vec<f64>,
}

impl GridSpec {
    /// Box centred at the origin: `[-L/2, L/2)^n`.
    pub fn centered(dim: usize, points: usize, length: f64) -> Self {
        GridSpec {
            dim,
            points,
            length,
            origin: vec![-0.5 * length; dim],
        }
    }

    pub fn with_origin(dim: usize, points: usize, length: f64, origin: Vec<f64>) -> Self {
        GridSpec {
            dim,
            points,
            length,
            origin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension {} not in 1..={MAX_DIM}",
                self.dim
            )));
        }
        if self.points < 8 || !self.points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {} is not a power of two >= 8",
                self.points
            )));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "box length {} must be positive",
                self.length
            )));
        }
        if self.origin.len() != self.dim || self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "origin {:?} does not match dimension {}",
                self.origin, self.dim
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }
}

struct GridData {
    spec: GridSpec,
    spacing: f64,
    /// Signed integer wavenumber per axis index, FFT order.
    wavenumbers: Vec<i64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// A validated grid with cached FFT plans. Cheap to clone.
#[derive(Clone)]
pub struct Grid {
    data: Arc<GridData>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("spec", &self.data.spec).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data) || self.data.spec == other.data.spec
    }
}

impl Grid {
    pub fn new(spec: GridSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.points;
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let wavenumbers = (0..n)
            .map(|i| {
                if i < n / 2 {
                    i as i64
                } else {
                    i as i64 - n as i64
                }
            })
            .collect();
        Ok(Grid {
            data: Arc::new(GridData {
                spacing: spec.spacing(),
                spec,
                wavenumbers,
                fwd,
                inv,
            }),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.data.spec
    }

    pub fn dim(&self) -> usize {
        self.data.spec.dim
    }

    pub fn points(&self) -> usize {
        self.data.spec.points
    }

    pub fn length(&self) -> f64 {
        self.data.spec.length
    }

    pub fn origin(&self) -> &[f64] {
        &self.data.spec.origin
    }

    pub fn spacing(&self) -> f64 {
        self.data.spacing
    }

    /// Quadrature weight `h^n` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.data.spacing.powi(self.dim() as i32)
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.data.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat index; unused trailing axes are zero.
    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let n = self.points();
        let mut out = [0; MAX_DIM];
        for axis in (0..self.dim()).rev() {
            out[axis] = idx % n;
            idx /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let n = self.points();
        multi[..self.dim()]
            .iter()
            .fold(0, |acc, &i| acc * n + (i % n))
    }

    /// Coordinates of a grid point; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut x = [0.0; MAX_DIM];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim()) {
            *xa = self.data.spec.origin[axis] + m[axis] as f64 * self.data.spacing;
        }
        x
    }

    /// Signed integer wavenumber per axis of a flat index.
    pub fn wavenumber(&self, idx: usize) -> [i64; MAX_DIM] {
        let m = self.multi_index(idx);
        let mut k = [0; MAX_DIM];
        for axis in 0..self.dim() {
            k[axis] = self.data.wavenumbers[m[axis]];
        }
        k
    }

    /// Physical frequency `ξ = k / L` of a flat index.
    pub fn frequency(&self, idx: usize) -> [f64; MAX_DIM] {
        let k = self.wavenumber(idx);
        let l = self.length();
        let mut xi = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            xi[axis] = k[axis] as f64 / l;
        }
        xi
    }

    /// Frequencies in FFT order along one axis: `{0, 1, .., N/2-1, -N/2, .., -1} / L`.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let l = self.length();
        self.data.wavenumbers.iter().map(|&k| k as f64 / l).collect()
    }

    /// True if the flat frequency index has wavenumber `-N/2` along `axis`.
    pub fn is_nyquist_along(&self, idx: usize, axis: usize) -> bool {
        self.wavenumber(idx)[axis] == -(self.points() as i64 / 2)
    }

    pub fn is_nyquist(&self, idx: usize) -> bool {
        (0..self.dim()).any(|axis| self.is_nyquist_along(idx, axis))
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// In-place n-D FFT, unnormalized in both directions.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.points();
        let dim = self.dim();
        let fft = if inverse { &self.data.inv } else { &self.data.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..dim {
            let stride = n.pow((dim - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            let outer = n.pow(axis as u32);
            for o in 0..outer {
                for inner in 0..stride {
                    let base = o * n * stride + inner;
                    for (k, v) in line.iter_mut().enumerate() {
                        *v = data[base + k * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (k, v) in line.iter().enumerate() {
                        data[base + k * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, u: &ScalarField) -> Result<SpectralField> {
        self.check_same(&u.grid)?;
        let mut data: Vec<Complex64> = u.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        let scale = 1.0 / self.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        Ok(SpectralField {
            grid: self.clone(),
            coefficients: data,
        })
    }

    /// Inverse transform of coefficients that may not be conjugate symmetric.
    pub fn inverse_complex(&self, u: &SpectralField) -> Result<Vec<Complex64>> {
        self.check_same(&u.grid)?;
        let mut data = u.coefficients.clone();
        self.transform(&mut data, true);
        Ok(data)
    }

    /// Inverse transform to a real field. The imaginary residue relative to the
    /// largest real value must stay below `1e-12`.
    pub fn inverse(&self, u: &SpectralField) -> Result<ScalarField> {
        let data = self.inverse_complex(u)?;
        let max_re = data.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
        let max_im = data.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        if max_im > IMAG_RESIDUE_TOL * max_re.max(f64::MIN_POSITIVE) && max_im > 1e-300 {
            return Err(Error::ImaginaryResidue {
                residue: max_im / max_re.max(f64::MIN_POSITIVE),
            });
        }
        ScalarField::new(self.clone(), data.into_iter().map(|c| c.re).collect())
    }
}

/// Relative imaginary residue allowed after an inverse transform.
pub const IMAG_RESIDUE_TOL: f64 = 1e-12;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in iter {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Real values on every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Rejects wrong lengths and non-finite values.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                coord: grid.point(i)[..grid.dim()].to_vec(),
                value: values[i],
            });
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            values: vec![0.0; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        ScalarField {
            values: vec![c; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise map. The closure must keep values finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ScalarField) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// `∫ u` by the trapezoidal (here: rectangle, periodic) rule.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * compensated_sum(self.values.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    /// Copy with the mean removed.
    pub fn mean_free(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// `∫ u v`.
    pub fn dot(&self, other: &ScalarField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self.grid.cell_volume()
            * compensated_sum(self.values.iter().zip(&other.values).map(|(a, b)| a * b)))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Projection onto the resolved subspace: the modes with a wavenumber `-N/2`
    /// along some axis are removed. Odd symbols vanish there on a real grid.
    pub fn without_nyquist(&self) -> Result<Self> {
        let mut spec = self.grid.forward(self)?;
        for (idx, c) in spec.coefficients.iter_mut().enumerate() {
            if self.grid.is_nyquist(idx) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.grid.inverse(&spec)
    }

    /// Mean-free and Nyquist-free representative, used wherever a homogeneous
    /// symbol must be inverted mode by mode.
    pub fn resolved_mean_free(&self) -> Result<Self> {
        Ok(self.without_nyquist()?.mean_free())
    }
}

/// `n` scalar components on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Parameter("vector field needs components".into()))?;
        if components.len() != first.grid.dim() {
            return Err(Error::Parameter(format!(
                "vector field has {} components on a {}-dimensional grid",
                components.len(),
                first.grid.dim()
            )));
        }
        for c in &components[1..] {
            first.grid.check_same(&c.grid)?;
        }
        Ok(VectorField { components })
    }

    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.components[0].grid
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, j: usize) -> &ScalarField {
        &self.components[j]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Euclidean magnitude at one grid point.
    pub fn magnitude_at(&self, i: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c.values[i] * c.values[i])
            .sum::<f64>()
            .sqrt()
    }

    pub fn magnitude(&self) -> ScalarField {
        ScalarField {
            grid: self.grid().clone(),
            values: (0..self.grid().len()).map(|i| self.magnitude_at(i)).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        VectorField {
            components: self.components.iter().map(|c| c.scaled(alpha)).collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        Ok(VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.sub(b))
                .collect::<Result<_>>()?,
        })
    }

    /// Multiply every component pointwise by a scalar field.
    pub fn pointwise_scaled(&self, a: &ScalarField) -> Result<Self> {
        Ok(VectorField {
            components: self
                .components
                .iter()
                .map(|c| c.zip_map(a, |x, y| x * y))
                .collect::<Result<_>>()?,
        })
    }

    /// `∫ u·v`.
    pub fn dot(&self, other: &VectorField) -> Result<f64> {
        self.grid().check_same(other.grid())?;
        let h = self.grid().cell_volume();
        let n = self.grid().len();
        Ok(h * compensated_sum((0..n).map(|i| {
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.values[i] * b.values[i])
                .sum::<f64>()
        })))
    }
}

/// Complex Fourier coefficients in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                found: coefficients.len(),
            });
        }
        Ok(SpectralField { grid, coefficients })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coefficients
    }

    /// Coefficient at a signed wavenumber.
    pub fn at(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.points() as i64;
        let m: Vec<usize> = k.iter().map(|&ki| ki.rem_euclid(n) as usize).collect();
        self.coefficients[self.grid.flat_index(&m)]
    }

    /// `L^n Σ |c_k|^2`, equal to `∫ |u|^2` by Parseval.
    pub fn energy(&self) -> f64 {
        self.grid.spec().volume()
            * compensated_sum(self.coefficients.iter().map(|c| c.norm_sqr()))
    }
}

/// Pointwise magnitude of a scalar or vector field, for norms.
pub trait PointwiseMagnitude {
    fn grid(&self) -> &Grid;
    fn magnitude_at(&self, i: usize) -> f64;
}

impl PointwiseMagnitude for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn magnitude_at(&self, i: usize) -> f64 {
        self.values[i].abs()
    }
}

impl PointwiseMagnitude for VectorField {
    fn grid(&self) -> &Grid {
        VectorField::grid(self)
    }
    fn magnitude_at(&self, i: usize) -> f64 {
        VectorField::magnitude_at(self, i)
    }
}

/// `(h^n Σ |u_i|^p w_i)^{1/p}`; `weight = None` means `w ≡ 1`.
pub fn lp_norm<F: PointwiseMagnitude + ?Sized>(u: &F, p: f64, weight: Option<&ScalarField>) -> f64 {
    debug_assert!(p >= 1.0);
    let grid = u.grid();
    let n = grid.len();
    let sum = match weight {
        None => compensated_sum((0..n).map(|i| u.magnitude_at(i).powf(p))),
        Some(w) => compensated_sum((0..n).map(|i| u.magnitude_at(i).powf(p) * w.values()[i])),
    };
    (grid.cell_volume() * sum).powf(1.0 / p)
}

/// Sample a pointwise function at the grid coordinates.
pub fn sample(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<ScalarField> {
    let dim = grid.dim();
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.point(i);
        let v = f(&x[..dim]);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                coord: x[..dim].to_vec(),
                value: v,
            });
        }
        values.push(v);
    }
    Ok(ScalarField {
        grid: grid.clone(),
        values,
    })
}

/// Mollifier bump `exp(-a / (1 - |x-c|^2 / r^2))` inside the ball, zero outside.
/// The doubled ball `B(c, 2r)` must fit inside the box.
pub fn bump(grid: &Grid, center: &[f64], radius: f64, sharpness: f64) -> Result<ScalarField> {
    let dim = grid.dim();
    if center.len() != dim {
        return Err(Error::Parameter(format!(
            "bump centre has {} coordinates, grid dimension is {dim}",
            center.len()
        )));
    }
    if !(radius > 0.0) || !(sharpness > 0.0) {
        return Err(Error::Parameter(format!(
            "bump radius {radius} and sharpness {sharpness} must be positive"
        )));
    }
    let tol = 1e-12 * grid.length();
    for (axis, &c) in center.iter().enumerate() {
        let lo = grid.origin()[axis];
        let hi = lo + grid.length();
        if c - 2.0 * radius < lo - tol || c + 2.0 * radius > hi + tol {
            return Err(Error::Geometry(format!(
                "ball of radius {radius} at {center:?} lacks a one-radius margin inside the box"
            )));
        }
    }
    let r2 = radius * radius;
    sample(grid, |x| {
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        let t = d2 / r2;
        if t < 1.0 {
            (-sharpness / (1.0 - t)).exp()
        } else {
            0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid1(n: usize, l: f64) -> Grid {
        Grid::new(GridSpec::with_origin(1, n, l, vec![0.0])).unwrap()
    }

    #[test]
    fn lattice_and_spacing() {
        let g = grid1(8, 1.0);
        let k: Vec<i64> = (0..8).map(|i| g.wavenumber(i)[0]).collect();
        let mut sorted = k.clone();
        sorted.sort();
        assert_eq!(sorted, vec![-4, -3, -2, -1, 0, 1, 2, 3]);

        let g2 = Grid::new(GridSpec::centered(2, 16, 2.0)).unwrap();
        assert_eq!(g2.len(), 256);
        assert_eq!(g2.spacing(), 0.125);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Grid::new(GridSpec::centered(1, 7, 1.0)).is_err());
        assert!(Grid::new(GridSpec::centered(1, 4, 1.0)).is_err());
        assert!(Grid::new(GridSpec::centered(1, 8, 0.0)).is_err());
        assert!(Grid::new(GridSpec::centered(1, 8, -1.0)).is_err());
        assert!(Grid::new(GridSpec::centered(4, 8, 1.0)).is_err());
    }

    #[test]
    fn sample_rejects_singularity() {
        let g = grid1(16, 1.0);
        let err = sample(&g, |x| 1.0 / x[0]).unwrap_err();
        match err {
            Error::NonFinite { coord, .. } => assert_eq!(coord, vec![0.0]),
            other => panic!("unexpected {other:?}"),
        }
        let z = sample(&g, |_| 0.0).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn sinusoid_has_two_modes() {
        let g = grid1(32, 1.0);
        let u = sample(&g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        let c = g.forward(&u).unwrap();
        assert!((c.at(&[1]) - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        assert!((c.at(&[-1]) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        for k in -16..16 {
            if k != 1 && k != -1 {
                assert!(c.at(&[k]).norm() < 1e-15, "mode {k}");
            }
        }
    }

    #[test]
    fn constant_is_zero_mode() {
        let g = Grid::new(GridSpec::centered(2, 8, 3.0)).unwrap();
        let u = ScalarField::constant(&g, 2.5);
        let c = g.forward(&u).unwrap();
        assert!((c.at(&[0, 0]).re - 2.5).abs() < 1e-15);
        let rest: f64 = c.coefficients()[1..].iter().map(|z| z.norm()).sum();
        assert!(rest < 1e-14);
    }

    #[test]
    fn round_trip_and_parseval_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=3 {
            let n = if dim == 3 { 8 } else { 32 };
            let g = Grid::new(GridSpec::centered(dim, n, 1.7)).unwrap();
            for _ in 0..100 / dim {
                let vals: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let u = ScalarField::new(g.clone(), vals).unwrap();
                let back = g.inverse(&g.forward(&u).unwrap()).unwrap();
                let err = back.sub(&u).unwrap().max_abs() / u.max_abs();
                assert!(err <= 1e-12, "round trip {err}");
                let l2 = lp_norm(&u, 2.0, None).powi(2);
                let spec = g.forward(&u).unwrap().energy();
                assert!((l2 - spec).abs() <= 1e-10 * l2);
            }
        }
    }

    #[test]
    fn bump_profile() {
        let g = Grid::new(GridSpec::centered(2, 64, 4.0)).unwrap();
        let b = bump(&g, &[0.0, 0.0], 1.0, 1.0).unwrap();
        let centre = g.flat_index(&[32, 32]);
        assert_eq!(b.values()[centre], (-1.0f64).exp());
        // point on the sphere |x| = 1
        let on_sphere = g.flat_index(&[32, 48]);
        assert_eq!(b.values()[on_sphere], 0.0);
        assert!(b.integral() > 0.0);
        for i in 0..g.len() {
            let x = g.point(i);
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r >= 1.0 {
                assert_eq!(b.values()[i], 0.0);
            } else {
                assert!(b.values()[i] > 0.0);
            }
        }
        assert!(bump(&g, &[1.5, 0.0], 0.5, 1.0).is_err());
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid1(64, 1.0);
        assert_eq!(lp_norm(&ScalarField::zeros(&g), 2.0, None), 0.0);
        let g3 = Grid::new(GridSpec::centered(2, 16, 3.0)).unwrap();
        let one = ScalarField::constant(&g3, 1.0);
        for p in [1.5, 2.0, 4.0] {
            let v = lp_norm(&one, p, None);
            assert!((v - 9f64.powf(1.0 / p)).abs() < 1e-13);
        }
        let s = sample(&g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert!((lp_norm(&s, 2.0, None) - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn nyquist_projection_removes_only_edge_modes() {
        let g = grid1(16, 1.0);
        let u = sample(&g, |x| (2.0 * PI * 8.0 * x[0]).cos() + (2.0 * PI * x[0]).sin()).unwrap();
        let v = u.without_nyquist().unwrap();
        let expect = sample(&g, |x| (2.0 * PI * x[0]).sin()).unwrap();
        assert!(v.sub(&expect).unwrap().max_abs() < 1e-14);
    }
}
