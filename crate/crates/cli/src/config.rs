//! JSON problem files.
//!
//! ```json
//! {
//!   "grid": {"n": 1, "N": 256, "L": 2.0},
//!   "omega": {"type": "box", "lower": [-0.5], "upper": [0.5]},
//!   "s": 0.5, "p": 3.0,
//!   "coefficient": {"kind": "scalar", "family": "power", "params": {"x0": [0.0], "alpha": 0.5}},
//!   "rhs": {"kind": "manufactured", "center": [0.05], "radius": 0.3},
//!   "g": {"kind": "zero"},
//!   "solver": {"method": "kacanov", "tol": 1e-8, "max_iter": 5000, "seed": 0}
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rieszgrad::grid::{bump, sample, Grid, GridSpec, ScalarField, VectorField};
use rieszgrad::io::{parse_fields, read_field_file};
use rieszgrad::solver::{
    Coefficient, Domain, MatrixField, Method, Omega, PDEProblem, Preconditioner, Rhs, SolveOptions,
};
use rieszgrad::weights::{distance_weight, power_weight, PointSet, Weight};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(rename = "N")]
    pub points: usize,
    #[serde(rename = "L")]
    pub length: f64,
    /// Lower corner; the box is centred on the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, CliError> {
        let spec = match &self.origin {
            Some(o) => GridSpec::with_origin(self.n, self.points, self.length, o.clone()),
            None => GridSpec::centered(self.n, self.points, self.length),
        };
        Ok(Grid::new(spec)?)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    #[default]
    Unit,
    Power { x0: Vec<f64>, alpha: f64 },
    Distance { set: PointSet, k: usize, alpha: f64 },
}

impl WeightConfig {
    pub fn build(&self, grid: &Grid, p: f64) -> Result<Weight, CliError> {
        Ok(match self {
            WeightConfig::Unit => Weight::unit(grid, p)?,
            WeightConfig::Power { x0, alpha } => power_weight(grid, x0, *alpha, p)?,
            WeightConfig::Distance { set, k, alpha } => distance_weight(grid, set, *k, *alpha, p)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Scalar {
        #[serde(flatten)]
        weight: WeightConfig,
    },
    /// `A = w (I + β b bᵀ)` with a constant direction `b`, `|b| <= 1`.
    Matrix {
        #[serde(flatten)]
        weight: WeightConfig,
        direction: Vec<f64>,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c2: Option<f64>,
    },
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig::Scalar {
            weight: WeightConfig::Unit,
        }
    }
}

impl CoefficientConfig {
    pub fn build(&self, grid: &Grid, p: f64) -> Result<Coefficient, CliError> {
        Ok(match self {
            CoefficientConfig::Scalar { weight } => Coefficient::Scalar(weight.build(grid, p)?),
            CoefficientConfig::Matrix {
                weight,
                direction,
                beta,
                c1,
                c2,
            } => {
                if direction.len() != grid.dim() {
                    return Err(CliError::Config(format!(
                        "coefficient.direction: expected {} entries",
                        grid.dim()
                    )));
                }
                let w = weight.build(grid, p)?;
                let b = VectorField::new(
                    direction
                        .iter()
                        .map(|&d| ScalarField::constant(grid, d))
                        .collect(),
                )?;
                let a = MatrixField::rank_one(w.clone(), &b, *beta)?;
                match (c1, c2) {
                    (None, None) => Coefficient::Matrix(a),
                    _ => {
                        let (d1, d2) = a.constants();
                        let entries = matrix_entries(grid, &w, direction, *beta)?;
                        Coefficient::Matrix(MatrixField::new(
                            w,
                            entries,
                            c1.unwrap_or(d1),
                            c2.unwrap_or(d2),
                        )?)
                    }
                }
            }
        })
    }
}

fn matrix_entries(
    grid: &Grid,
    w: &Weight,
    b: &[f64],
    beta: f64,
) -> Result<Vec<ScalarField>, CliError> {
    let n = grid.dim();
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            let c = if j == k { 1.0 } else { 0.0 } + beta * b[j] * b[k];
            out.push(w.values().scaled(c));
        }
    }
    Ok(out)
}

/// One Fourier mode `amplitude · {sin|cos}(2π k·x / L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Sin,
    Cos,
}

pub fn modes_field(grid: &Grid, modes: &[Mode]) -> Result<ScalarField, CliError> {
    for m in modes {
        if m.k.len() != grid.dim() {
            return Err(CliError::Config(format!(
                "mode {:?} does not match dimension {}",
                m.k,
                grid.dim()
            )));
        }
    }
    let l = grid.length();
    let origin = grid.origin().to_vec();
    Ok(sample(grid, |x| {
        modes
            .iter()
            .map(|m| {
                let arg: f64 = m
                    .k
                    .iter()
                    .zip(x)
                    .zip(&origin)
                    .map(|((k, x), o)| 2.0 * std::f64::consts::PI * *k as f64 * (x - o) / l)
                    .sum();
                m.amplitude
                    * match m.phase {
                        Phase::Sin => arg.sin(),
                        Phase::Cos => arg.cos(),
                    }
            })
            .sum()
    })?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsConfig {
    /// `f = T u*` for the bump `u*`; the report carries the error against `u*`.
    Manufactured {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "one")]
        sharpness: f64,
    },
    Field { path: PathBuf },
    /// Vector field acting by `∫ G·∇^s v`.
    Flux { path: PathBuf },
    Modes { modes: Vec<Mode> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExteriorConfig {
    #[default]
    Zero,
    Field {
        path: PathBuf,
    },
    Modes {
        modes: Vec<Mode>,
        #[serde(default)]
        constant: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodConfig {
    Auto,
    Cg,
    Kacanov,
    Descent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "auto")]
    pub method: MethodConfig,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "spectral")]
    pub preconditioner: Preconditioner,
    /// Start from a seeded random interior field instead of the default start.
    #[serde(default)]
    pub random_start: bool,
}

fn auto() -> MethodConfig {
    MethodConfig::Auto
}
fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    5000
}
fn spectral() -> Preconditioner {
    Preconditioner::Spectral
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: MethodConfig::Auto,
            tol: default_tol(),
            max_iter: default_max_iter(),
            seed: 0,
            preconditioner: Preconditioner::Spectral,
            random_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub grid: GridConfig,
    pub omega: Omega,
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub coefficient: CoefficientConfig,
    pub rhs: RhsConfig,
    #[serde(default)]
    pub g: ExteriorConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// A built problem plus what is needed to report on it.
pub struct BuiltProblem {
    pub problem: PDEProblem,
    pub exact: Option<ScalarField>,
    pub method: Method,
    pub options: SolveOptions,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ProblemConfig {
    /// `base` resolves relative field paths (the config file's directory).
    pub fn build(&self, base: &Path) -> Result<BuiltProblem, CliError> {
        let grid = self.grid.build()?;
        let domain = Domain::new(&grid, self.omega.clone())?;
        let coefficient = self.coefficient.build(&grid, self.p)?;
        let g = match &self.g {
            ExteriorConfig::Zero => None,
            ExteriorConfig::Field { path } => Some(read_on(&grid, &resolve(base, path))?),
            ExteriorConfig::Modes { modes, constant } => {
                let m = modes_field(&grid, modes)?;
                Some(m.add(&ScalarField::constant(&grid, *constant))?)
            }
        };
        let mut exact = None;
        let problem = match &self.rhs {
            RhsConfig::Manufactured {
                center,
                radius,
                sharpness,
            } => {
                if g.as_ref().is_some_and(|g| g.max_abs() != 0.0) {
                    return Err(CliError::Config(
                        "rhs: manufactured problems take g = zero".into(),
                    ));
                }
                let u = bump(&grid, center, *radius, *sharpness)?;
                let prob = rieszgrad::solver::manufacture(domain, self.s, self.p, coefficient, &u)?;
                exact = Some(u);
                prob
            }
            RhsConfig::Field { path } => {
                let f = read_on(&grid, &resolve(base, path))?;
                PDEProblem::new(domain, self.s, self.p, coefficient, Rhs::Field(f), g)?
            }
            RhsConfig::Flux { path } => {
                let bytes = std::fs::read(resolve(base, path))
                    .map_err(|e| CliError::Io(resolve(base, path), e))?;
                let v = rieszgrad::io::as_vector_field(parse_fields(&bytes)?)?;
                grid.spec().eq(v.grid().spec()).then_some(()).ok_or_else(|| {
                    CliError::Config("rhs.path: flux grid differs from the problem grid".into())
                })?;
                let v = VectorField::new(
                    v.components()
                        .iter()
                        .map(|c| ScalarField::new(grid.clone(), c.values().to_vec()))
                        .collect::<Result<Vec<_>, _>>()?,
                )?;
                PDEProblem::new(domain, self.s, self.p, coefficient, Rhs::Flux(v), g)?
            }
            RhsConfig::Modes { modes } => {
                let f = modes_field(&grid, modes)?;
                PDEProblem::new(domain, self.s, self.p, coefficient, Rhs::Field(f), g)?
            }
        };
        let method = match self.solver.method {
            MethodConfig::Auto if self.p == 2.0 => Method::Cg,
            MethodConfig::Auto => Method::Kacanov,
            MethodConfig::Cg => Method::Cg,
            MethodConfig::Kacanov => Method::Kacanov,
            MethodConfig::Descent => Method::Descent,
        };
        let initial = if self.solver.random_start {
            Some(random_interior(&problem, self.solver.seed)?)
        } else {
            None
        };
        let options = SolveOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            preconditioner: self.solver.preconditioner,
            initial,
            ..Default::default()
        };
        Ok(BuiltProblem {
            problem,
            exact,
            method,
            options,
        })
    }
}

fn random_interior(prob: &PDEProblem, seed: u64) -> Result<ScalarField, CliError> {
    let grid = prob.grid();
    let u = rieszgrad::inequalities::seeded_band_limited(grid, seed, (grid.points() / 8).max(2))?;
    let mut v = u.values().to_vec();
    prob.domain().project(&mut v);
    Ok(ScalarField::new(grid.clone(), v)?)
}

/// Read a single field and rebind it to `grid` (same spec required).
pub fn read_on(grid: &Grid, path: &Path) -> Result<ScalarField, CliError> {
    let f = read_field_file(path)?;
    if f.grid().spec() != grid.spec() {
        return Err(CliError::Config(format!(
            "{}: field grid {:?} differs from the problem grid {:?}",
            path.display(),
            f.grid().spec(),
            grid.spec()
        )));
    }
    Ok(ScalarField::new(grid.clone(), f.into_values())?)
}

/// Parse JSON, reporting the path of the first offending key.
pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{origin}: at `{path}`: {}", e.inner()))
    })
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    parse(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
      "grid": {"n": 1, "N": 64, "L": 2.0},
      "omega": {"type": "box", "lower": [-0.5], "upper": [0.5]},
      "s": 0.5, "p": 2.0,
      "coefficient": {"kind": "scalar", "family": "power", "params": {"x0": [0.0], "alpha": 0.5}},
      "rhs": {"kind": "manufactured", "center": [0.0], "radius": 0.25},
      "solver": {"method": "cg", "tol": 1e-10}
    }"#;

    #[test]
    fn example_parses_and_builds() {
        let cfg: ProblemConfig = parse(EXAMPLE, "inline").unwrap();
        let built = cfg.build(Path::new(".")).unwrap();
        assert_eq!(built.method, Method::Cg);
        assert!(built.exact.is_some());
    }

    #[test]
    fn bad_key_reports_its_path() {
        let bad = EXAMPLE.replace("\"alpha\": 0.5", "\"alpha\": \"half\"");
        let err = parse::<ProblemConfig>(&bad, "inline").unwrap_err().to_string();
        assert!(err.contains("coefficient"), "{err}");
        let bad = EXAMPLE.replace("\"tol\"", "\"tolerance\"");
        let err = parse::<ProblemConfig>(&bad, "inline").unwrap_err().to_string();
        assert!(err.contains("solver"), "{err}");
    }

    #[test]
    fn matrix_coefficient_builds() {
        let text = EXAMPLE
            .replace(r#""n": 1, "N": 64"#, r#""n": 2, "N": 32"#)
            .replace(r#""lower": [-0.5], "upper": [0.5]"#, r#""lower": [-0.5, -0.5], "upper": [0.5, 0.5]"#)
            .replace(
                r#"{"kind": "scalar", "family": "power", "params": {"x0": [0.0], "alpha": 0.5}}"#,
                r#"{"kind": "matrix", "family": "unit", "direction": [0.6, 0.8], "beta": 0.5}"#,
            )
            .replace(r#""center": [0.0]"#, r#""center": [0.0, 0.0]"#);
        let cfg: ProblemConfig = parse(&text, "inline").unwrap();
        let built = cfg.build(Path::new(".")).unwrap();
        assert!(matches!(built.problem.coefficient(), Coefficient::Matrix(_)));
    }
}
