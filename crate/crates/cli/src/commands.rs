use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rieszgrad::fracops::{apply_multiplier, fractional_divergence, riesz_gradient, MultiplierKind};
use rieszgrad::grid::{bump, Grid, GridSpec, ScalarField, VectorField};
use rieszgrad::inequalities::{
    equivalence_report, poincare_constant, poincare_report, InequalityReport, PoincareEstimate,
    PoincareOptions, SampleFamily,
};
use rieszgrad::io::{as_vector_field, field_bytes, parse_fields, write_csv};
use rieszgrad::solver::{manufacture, solve_linear, solve_plaplace, Coefficient, Domain, Method, Omega, SolveOptions};
use rieszgrad::suite::{self, Status, SuiteConfig};
use rieszgrad::weights::{
    ap_constant, apq_constant, distance_weight, power_weight, sawyer_wheeden_constant, CubeFamily,
    PointSet, Weight, WeightRecord,
};

use crate::config::{self, GridConfig, ProblemConfig, WeightConfig};
use crate::manifest::Recorder;
use crate::{CliError, FamilyArg, LayoutArg, OpArgs, OpName, PoincareArgs, SweepArgs, SweepWhat, WeightsArgs};

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Emit(e.to_string()))
}

fn print_json<T: Serialize>(v: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Emit(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn report_rows(reports: &[InequalityReport]) -> Vec<Vec<String>> {
    reports.iter().flat_map(|r| r.csv_rows()).collect()
}

pub fn verify(out: &Path, quick: bool, seed: u64) -> Result<(), CliError> {
    let cfg = SuiteConfig { quick, seed };
    let outcome = suite::run(&cfg)?;
    let mut rec = Recorder::new(out, "verify", to_value(&cfg)?, seed)?;
    rec.write_json("verify.json", &outcome)?;
    let checks: Vec<Vec<String>> = outcome
        .checks
        .iter()
        .map(|c| {
            vec![
                c.criterion.to_string(),
                c.id.clone(),
                to_value(&c.status).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
                c.detail.clone(),
            ]
        })
        .collect();
    rec.write_csv("checks.csv", &["criterion", "id", "status", "detail"], &checks)?;
    rec.write_csv("reports.csv", &InequalityReport::CSV_HEADER, &report_rows(&outcome.reports))?;
    rec.finish()?;

    for c in &outcome.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Conflict => "CONFLICT",
        };
        println!("[{tag}] criterion {} {}: {}", c.criterion, c.id, c.detail);
    }
    for r in &outcome.reports {
        println!("[{:?}] report {}: max {:.4e}", r.verdict, r.name, r.max);
    }
    if outcome.has_violation() {
        let failed = outcome.checks.iter().filter(|c| c.status == Status::Fail).count();
        return Err(CliError::Violation(format!("{failed} check(s) failed")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct WeightsOutput {
    #[serde(flatten)]
    record: WeightRecord,
    per_level: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    apq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    two_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    single_weight: Option<f64>,
    in_class: Option<bool>,
}

fn weight_from_args(grid: &Grid, a: &WeightsArgs, alpha: f64) -> Result<Weight, CliError> {
    let x0 = a.x0.clone().unwrap_or_else(|| vec![0.0; a.n]);
    Ok(match a.family {
        FamilyArg::Unit => Weight::unit(grid, a.p)?,
        FamilyArg::Power => power_weight(grid, &x0, alpha, a.p)?,
        FamilyArg::Distance => {
            let text = a
                .set
                .as_deref()
                .ok_or_else(|| CliError::Config("--set is required for --family distance".into()))?;
            let set: PointSet = config::parse(text, "--set")?;
            distance_weight(grid, &set, a.k, alpha, a.p)?
        }
    })
}

pub fn weights(out: &Path, a: &WeightsArgs, seed: u64) -> Result<(), CliError> {
    let grid = Grid::new(GridSpec::centered(a.n, a.points, a.length))?;
    let w = weight_from_args(&grid, a, a.alpha)?;
    let cubes = match a.layout {
        LayoutArg::Dyadic => CubeFamily::dyadic(&grid, a.min_level, a.levels),
        LayoutArg::Centered => {
            let c = match a.family {
                FamilyArg::Power => a.x0.clone().unwrap_or_else(|| vec![0.0; a.n]),
                _ => vec![0.0; a.n],
            };
            CubeFamily::centered(&c, a.length, a.min_level, a.levels)
        }
    };
    let est = ap_constant(&w, a.p, &cubes)?;
    let mut output = WeightsOutput {
        record: WeightRecord::new(&w, a.p, &cubes, &est),
        per_level: est.per_level.clone(),
        apq: None,
        two_weight: None,
        single_weight: None,
        in_class: w.in_class(),
    };
    if let Some(q) = a.q {
        output.apq = Some(apq_constant(&w, a.p, q, &cubes)?.constant);
        if let Some(s) = a.s {
            let v = match a.v_alpha {
                Some(va) => weight_from_args(&grid, a, va)?,
                None => w.clone(),
            };
            let tw = sawyer_wheeden_constant(&v, &w, s, a.p, q, &cubes)?;
            output.two_weight = Some(tw.estimate.constant);
            output.single_weight = tw.single_weight.map(|e| e.constant);
        }
    } else if a.s.is_some() {
        return Err(CliError::Config("--s needs --q".into()));
    }
    let mut rec = Recorder::new(out, "weights", to_value(a)?, seed)?;
    rec.write_json("weights.json", &output)?;
    rec.finish()?;
    print_json(&output)
}

/// Poincaré problem file: a subset of the solve configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareConfig {
    pub grid: GridConfig,
    pub omega: Omega,
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub weight: WeightConfig,
}

impl Default for PoincareConfig {
    fn default() -> Self {
        PoincareConfig {
            grid: GridConfig {
                n: 1,
                points: 256,
                length: 2.0,
                origin: None,
            },
            omega: Omega::Box {
                lower: vec![-0.25],
                upper: vec![0.25],
            },
            s: 0.5,
            p: 2.0,
            weight: WeightConfig::Unit,
        }
    }
}

#[derive(Debug, Serialize)]
struct PoincareOutput {
    config: PoincareConfig,
    estimate: PoincareEstimate,
    family_max: f64,
    verdict: rieszgrad::inequalities::Verdict,
}

pub fn poincare(out: &Path, a: &PoincareArgs, seed: u64) -> Result<(), CliError> {
    let mut cfg: PoincareConfig = match &a.config {
        Some(path) => config::load(path)?,
        None => PoincareConfig::default(),
    };
    if let Some(s) = a.s {
        cfg.s = s;
    }
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(n) = a.points {
        cfg.grid.points = n;
    }
    let grid = cfg.grid.build()?;
    let domain = Domain::new(&grid, cfg.omega.clone())?;
    let w = cfg.weight.build(&grid, cfg.p)?;
    let family = SampleFamily::supported_in(&grid, &domain, seed, a.family)?;
    let opts = PoincareOptions {
        seed,
        family: Some(family.clone()),
        ..Default::default()
    };
    let estimate = poincare_constant(&domain, cfg.s, cfg.p, &w, &opts)?;
    let report = poincare_report(&family, &domain, cfg.s, cfg.p, &w, &estimate)?;
    let output = PoincareOutput {
        config: cfg,
        estimate,
        family_max: report.max,
        verdict: report.verdict,
    };
    let mut rec = Recorder::new(out, "poincare", to_value(&output.config)?, seed)?;
    rec.write_json("poincare.json", &output)?;
    rec.write_csv("poincare.csv", &InequalityReport::CSV_HEADER, &report.csv_rows())?;
    rec.finish()?;
    print_json(&output)
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    method: Method,
    iterations: usize,
    inner_iterations: usize,
    converged: bool,
    final_residual: f64,
    energy: f64,
    energy_monotone: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_error: Option<f64>,
}

pub fn solve(out: &Path, path: &Path, seed: u64) -> Result<(), CliError> {
    let cfg: ProblemConfig = config::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let built = cfg.build(base)?;
    let report = match built.method {
        Method::Cg => solve_linear(&built.problem, &built.options)?,
        m => solve_plaplace(&built.problem, m, &built.options)?,
    };
    let u = report.solution();
    let relative_error = match &built.exact {
        Some(e) => {
            let d = rieszgrad::grid::lp_norm(&u.sub(e)?, 2.0, None);
            Some(d / rieszgrad::grid::lp_norm(e, 2.0, None).max(1e-300))
        }
        None => None,
    };
    let output = SolveOutput {
        method: report.method,
        iterations: report.iterations,
        inner_iterations: report.inner_iterations,
        converged: report.converged,
        final_residual: report.final_residual,
        energy: built.problem.energy(u)?,
        energy_monotone: report.energy_monotone(),
        relative_error,
    };
    let mut rec = Recorder::new(out, "solve", to_value(&cfg)?, seed)?;
    rec.write_json("report.json", &output)?;
    rec.write("solution.bin", &field_bytes(u))?;
    let history: Vec<Vec<String>> = report
        .residual_history
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let e = report.energy_history.get(k).map(|e| e.to_string()).unwrap_or_default();
            vec![k.to_string(), r.to_string(), e]
        })
        .collect();
    rec.write_csv("history.csv", &["iteration", "residual", "energy"], &history)?;
    rec.finish()?;
    print_json(&output)?;
    if !report.converged {
        return Err(CliError::Core(rieszgrad::Error::NotConverged {
            iterations: report.iterations,
            residual: report.final_residual,
        }));
    }
    Ok(())
}

fn need(v: Option<f64>, flag: &str, op: OpName) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{op:?} needs --{flag}")))
}

pub fn op(out: &Path, a: &OpArgs, seed: u64) -> Result<(), CliError> {
    let bytes = std::fs::read(&a.input).map_err(|e| CliError::Io(a.input.clone(), e))?;
    let fields = parse_fields(&bytes)?;
    let scalar = |fields: Vec<ScalarField>| -> Result<ScalarField, CliError> {
        match <[ScalarField; 1]>::try_from(fields) {
            Ok([u]) => Ok(u),
            Err(v) => Err(CliError::Config(format!(
                "{}: expected one field record, found {}",
                a.input.display(),
                v.len()
            ))),
        }
    };
    let result: Vec<ScalarField> = match a.name {
        OpName::Grad => riesz_gradient(&scalar(fields)?, need(a.s, "s", a.name)?)?.into_components(),
        OpName::Div => {
            let v: VectorField = as_vector_field(fields)?;
            vec![fractional_divergence(&v, need(a.s, "s", a.name)?)?]
        }
        name => {
            let u = scalar(fields)?;
            let kind = match name {
                OpName::Riesz => MultiplierKind::RieszPotential {
                    sigma: need(a.sigma, "sigma", name)?,
                },
                OpName::Bessel => MultiplierKind::BesselPotential {
                    sigma: need(a.sigma, "sigma", name)?,
                },
                OpName::Flap => MultiplierKind::FractionalLaplacian {
                    sigma: need(a.sigma, "sigma", name)?,
                },
                OpName::Rt => MultiplierKind::RieszTransform { j: a.j },
                OpName::Ts => MultiplierKind::Ts {
                    s: need(a.s, "s", name)?,
                },
                OpName::Gs => MultiplierKind::Gs {
                    s: need(a.s, "s", name)?,
                },
                OpName::Grad | OpName::Div => unreachable!(),
            };
            kind.validate(u.grid().dim())?;
            vec![apply_multiplier(&u, &kind)?]
        }
    };
    let mut rec = Recorder::new(out, "op", to_value(a)?, seed)?;
    let mut buf = Vec::new();
    for c in &result {
        buf.extend(field_bytes(c));
    }
    rec.write(&a.output, &buf)?;
    if a.csv {
        for (j, c) in result.iter().enumerate() {
            let mut text = Vec::new();
            write_csv(&mut text, c)?;
            let name = if result.len() == 1 {
                format!("{}.csv", a.output)
            } else {
                format!("{}.{j}.csv", a.output)
            };
            rec.write(&name, &text)?;
        }
    }
    rec.finish_as(&format!("{}.manifest.json", a.output))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    id: String,
    s: Option<f64>,
    p: f64,
    alpha: f64,
    value: Option<f64>,
    secondary: Option<f64>,
    ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepOutput<'a> {
    what: SweepWhat,
    /// What `value` and `secondary` hold.
    columns: (&'a str, &'a str),
    rows: Vec<SweepRow>,
}

/// `(value, secondary, ok)` for one case.
fn sweep_case(what: SweepWhat, points: usize, s: f64, p: f64, alpha: f64, seed: u64) -> Result<(f64, f64, bool), CliError> {
    let levels = (points.trailing_zeros() as usize).saturating_sub(3).min(8);
    match what {
        SweepWhat::Ap => {
            let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
            let w = power_weight(&grid, &[0.0], alpha, p)?;
            let est = ap_constant(&w, p, &CubeFamily::dyadic(&grid, 0, levels))?;
            Ok((est.constant, est.per_level.last().copied().unwrap_or(f64::NAN), w.in_class().unwrap_or(true)))
        }
        SweepWhat::Poincare => {
            let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
            let domain = Domain::new(
                &grid,
                Omega::Box {
                    lower: vec![-0.25],
                    upper: vec![0.25],
                },
            )?;
            let w = power_weight(&grid, &[0.0], alpha, p)?;
            let opts = PoincareOptions {
                seed,
                ..Default::default()
            };
            let est = poincare_constant(&domain, s, p, &w, &opts)?;
            Ok((est.constant, est.scaled, est.converged))
        }
        SweepWhat::Equivalence => {
            let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
            let w = power_weight(&grid, &[0.0], alpha, p)?;
            let family = SampleFamily::standard(&grid, seed, 4)?;
            let r = equivalence_report(&family, s, p, Some(&w))?;
            Ok((r.max, r.median, r.verdict != rieszgrad::inequalities::Verdict::Violated))
        }
        SweepWhat::Solve => {
            let grid = Grid::new(GridSpec::centered(1, points, 2.0))?;
            let domain = Domain::new(
                &grid,
                Omega::Box {
                    lower: vec![-0.5],
                    upper: vec![0.5],
                },
            )?;
            let w = power_weight(&grid, &[0.0], alpha, p)?;
            let u = bump(&grid, &[0.05], 0.3, 1.0)?;
            let prob = manufacture(domain, s, p, Coefficient::Scalar(w), &u)?;
            let opts = SolveOptions {
                tol: 1e-9,
                ..Default::default()
            };
            let rep = if p == 2.0 {
                solve_linear(&prob, &opts)?
            } else {
                solve_plaplace(&prob, Method::Kacanov, &opts)?
            };
            let d = rieszgrad::grid::lp_norm(&rep.solution().sub(&u)?, 2.0, None);
            let err = d / rieszgrad::grid::lp_norm(&u, 2.0, None);
            Ok((err, rep.iterations as f64, rep.converged))
        }
    }
}

pub fn sweep(out: &Path, a: &SweepArgs, seed: u64) -> Result<(), CliError> {
    let s_list: Vec<Option<f64>> = match a.what {
        SweepWhat::Ap => vec![None],
        _ => a.s.iter().copied().map(Some).collect(),
    };
    let mut cases = Vec::new();
    for &s in &s_list {
        for &p in &a.p {
            for &alpha in &a.alpha {
                let id = match s {
                    Some(s) => format!("s={s},p={p},alpha={alpha}"),
                    None => format!("p={p},alpha={alpha}"),
                };
                cases.push((id, s, p, alpha));
            }
        }
    }
    let mut rows: Vec<SweepRow> = cases
        .into_par_iter()
        .map(|(id, s, p, alpha)| {
            match sweep_case(a.what, a.points, s.unwrap_or(0.5), p, alpha, seed) {
                Ok((value, secondary, ok)) => SweepRow {
                    id,
                    s,
                    p,
                    alpha,
                    value: Some(value),
                    secondary: Some(secondary),
                    ok,
                    error: None,
                },
                Err(e) => SweepRow {
                    id,
                    s,
                    p,
                    alpha,
                    value: None,
                    secondary: None,
                    ok: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(|x, y| x.id.cmp(&y.id));
    let columns = match a.what {
        SweepWhat::Ap => ("ap_constant", "finest_level_max"),
        SweepWhat::Poincare => ("constant", "scaled"),
        SweepWhat::Equivalence => ("max_ratio", "median_ratio"),
        SweepWhat::Solve => ("relative_error", "iterations"),
    };
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            vec![
                r.id.clone(),
                f(r.s),
                r.p.to_string(),
                r.alpha.to_string(),
                f(r.value),
                f(r.secondary),
                r.ok.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let output = SweepOutput {
        what: a.what,
        columns,
        rows,
    };
    let mut rec = Recorder::new(out, "sweep", to_value(a)?, seed)?;
    rec.write_json("sweep.json", &output)?;
    rec.write_csv(
        "sweep.csv",
        &["id", "s", "p", "alpha", columns.0, columns.1, "ok", "error"],
        &csv_rows,
    )?;
    rec.finish()?;
    for r in &output.rows {
        match (&r.value, &r.error) {
            (Some(v), _) => println!("{} {}={v:.6e} ok={}", r.id, columns.0, r.ok),
            (None, Some(e)) => println!("{} error: {e}", r.id),
            _ => {}
        }
    }
    Ok(())
}
