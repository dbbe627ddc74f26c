use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use num_complex::Complex;
use pharm_core::exponents::{
    criticality, exponent_table, gamma_ratio, holder_c2_range, solve_threshold,
};
use pharm_core::hodograph::{presets, SeriesDocument};
use pharm_core::meanvalue::{
    amv_weights_in_dimension, decay_ladder, AronssonField, LadderConfig, ScalarField, Verdict,
};
use pharm_core::oracle::{
    compare_fields, solve_dirichlet_amv, solve_dirichlet_variational, Comparison, SolveReport,
};
use pharm_core::{Error, GridField, HodographSeries, Mode, PLaplaceParams};
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BuildArgs, ExponentsArgs, GridFormat, OracleArgs, Preset, SeriesSource, SolveMode,
    ThresholdArgs, VerifyArgs,
};

/// A command failure together with its exit status.
#[derive(Debug)]
pub enum Failure {
    BadInput(String),
    Bracket(String),
    Solver(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::BadInput(_) => 2,
            Failure::Bracket(_) => 3,
            Failure::Solver(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::BadInput(m) | Failure::Bracket(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BracketFailure { .. } => Failure::Bracket(e.to_string()),
            Error::InversionFailed { .. } => Failure::Solver(e.to_string()),
            other => Failure::BadInput(other.to_string()),
        }
    }
}

fn bad(msg: impl Into<String>) -> Failure {
    Failure::BadInput(msg.into())
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    bad(format!("{}: {e}", path.display()))
}

/// Successful run: text for standard output and the exit status.
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, code: 0 }
    }
}

fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub fn exponents(a: &ExponentsArgs) -> Result<Outcome, Failure> {
    let params = PLaplaceParams::new(a.p, a.n)?;
    if a.kmax <= a.n {
        return Err(bad(format!(
            "kmax = {} must exceed n = {} (modes start at k = n + 1)",
            a.kmax, a.n
        )));
    }
    let table = exponent_table(&params, a.kmax)?;
    let crit = criticality(&params)?;
    let gamma = gamma_ratio(&params);
    let (lo, hi) = holder_c2_range::<f64>(a.n)?;
    let holder = gamma > 1.0;
    let weights: Vec<(u32, f64, f64)> = [2, 3]
        .into_iter()
        .map(|dim| {
            let (m, v) = amv_weights_in_dimension(a.p, dim);
            (dim, m, v)
        })
        .collect();
    if a.json {
        let rows: Vec<_> = table
            .rows
            .iter()
            .map(|r| json!({"k": r.k, "lambda": r.lambda, "epsilon": r.epsilon}))
            .collect();
        let out = json!({
            "p": a.p,
            "n": a.n,
            "rows": rows,
            "criticality_ratio": finite(crit.ratio),
            "main_exponent_positive": crit.main_exponent_positive(),
            "gamma_ratio": gamma,
            "holder_c2": holder,
            "holder_range": [lo, finite(hi)],
            "amv_weights": weights.iter().map(|(dim, m, v)| json!({"dim": dim, "midrange": m, "mean": v})).collect::<Vec<_>>(),
        });
        return Ok(Outcome::ok(to_json(&out)));
    }
    let mut s = String::new();
    writeln!(s, "p = {}, n = {}", a.p, a.n).unwrap();
    writeln!(s, "{:>4}  {:>22}  {:>22}", "k", "lambda", "epsilon").unwrap();
    for r in &table.rows {
        writeln!(s, "{:>4}  {:>22.15}  {:>22.15}", r.k, r.lambda, r.epsilon).unwrap();
    }
    writeln!(s, "criticality ratio  {:.10}", crit.ratio).unwrap();
    if !crit.main_exponent_positive() {
        writeln!(
            s,
            "  (lambda_{} <= 0: the main mode does not vanish at the critical point)",
            a.n + 1
        )
        .unwrap();
    }
    writeln!(s, "gamma ratio  {:.10}", gamma).unwrap();
    let range = if hi.is_finite() {
        format!("({lo}, {hi:.10})")
    } else {
        format!("({lo}, inf)")
    };
    writeln!(
        s,
        "second derivatives Hölder continuous: {} (p in {range})",
        if holder { "yes" } else { "no" }
    )
    .unwrap();
    for (dim, m, v) in weights {
        writeln!(
            s,
            "mean value weights (N = {dim}): midrange {m:.10}, mean {v:.10}"
        )
        .unwrap();
    }
    Ok(Outcome::ok(s))
}

pub fn threshold(a: &ThresholdArgs) -> Result<Outcome, Failure> {
    if !(a.tol > 0.0) {
        return Err(bad("tol must be positive"));
    }
    let t = solve_threshold::<f64>(a.n, a.tol)?;
    let out = json!({
        "n": a.n,
        "value": t.value,
        "bracket": [t.bracket.0, t.bracket.1],
        "residual": t.residual,
        "iterations": t.iterations,
        "main_exponent_positive": t.main_exponent_positive,
    });
    Ok(Outcome::ok(to_json(&out)))
}

fn preset_series(preset: Preset, p: Option<f64>) -> Result<HodographSeries, Failure> {
    let p_or = |default: f64| p.unwrap_or(default);
    Ok(match preset {
        Preset::Harmonic => {
            if p.is_some_and(|p| p != 2.0) {
                return Err(bad("the harmonic preset is fixed at p = 2"));
            }
            presets::harmonic()
        }
        Preset::WorstCase => presets::worst_case(p_or(4.0))?,
        Preset::N2 => presets::n2(p_or(4.0))?,
        Preset::MainTerm => presets::main_term(p_or(4.0))?,
    })
}

fn load_series(src: &SeriesSource) -> Result<(HodographSeries, String), Failure> {
    match (&src.series, src.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let doc = SeriesDocument::parse(&text)?;
            if src.p.is_some_and(|p| p != doc.p) {
                return Err(bad(format!(
                    "--p does not match p = {} of {}",
                    doc.p,
                    path.display()
                )));
            }
            Ok((doc.build()?, path.display().to_string()))
        }
        (None, Some(preset)) => {
            let s = preset_series(preset, src.p)?;
            let name = preset
                .to_possible_value()
                .map(|v| v.get_name().to_string())
                .unwrap_or_default();
            Ok((s, format!("preset:{name}")))
        }
        (None, None) => Err(bad("give a series with --series FILE or --preset NAME")),
    }
}

fn parse_mode(text: &str) -> Result<Mode, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let err = || bad(format!("mode `{text}` must look like k:re or k:re:im"));
    if parts.len() < 2 || parts.len() > 3 {
        return Err(err());
    }
    let k = parts[0].trim().parse::<u32>().map_err(|_| err())?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(err)
    };
    let re = num(parts[1])?;
    let im = if parts.len() == 3 {
        num(parts[2])?
    } else {
        0.0
    };
    Ok(Mode::new(k, Complex::new(re, im)))
}

pub fn build(a: &BuildArgs) -> Result<Outcome, Failure> {
    let series = match a.preset {
        Some(preset) => {
            if !a.modes.is_empty() {
                return Err(bad("--mode cannot be combined with --preset"));
            }
            let s = preset_series(preset, a.p)?;
            match a.trust {
                Some(t) => s.with_trust_radius(t)?,
                None => s,
            }
        }
        None => {
            let n = a.n.ok_or_else(|| bad("give --n and --mode, or --preset"))?;
            let p = a.p.ok_or_else(|| bad("--p is required without --preset"))?;
            if a.modes.is_empty() {
                return Err(bad("at least one --mode is required"));
            }
            let modes = a
                .modes
                .iter()
                .map(|m| parse_mode(m))
                .collect::<Result<Vec<_>, _>>()?;
            HodographSeries::new(PLaplaceParams::new(p, n)?, modes, a.trust)?
        }
    };
    let text = SeriesDocument::from_series(&series).to_json() + "\n";
    match &a.out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(Outcome::ok(String::new()))
        }
        None => Ok(Outcome::ok(text)),
    }
}

#[derive(Serialize)]
struct VerifySummary {
    source: String,
    /// `null` for the p = inf midrange formula.
    p: Option<f64>,
    center: [f64; 2],
    radii: [f64; 2],
    rungs: usize,
    resolution: usize,
    exponent: Option<f64>,
    coefficient: Option<f64>,
    residual: Option<f64>,
    floor_hit: bool,
    rungs_in_fit: usize,
    verdict: Verdict,
    /// `1 + lambda_{n+2} / lambda_{n+1}^2` for series with a tail.
    predicted_bound: Option<f64>,
}

pub fn verify(a: &VerifyArgs) -> Result<Outcome, Failure> {
    let center = Complex::new(a.center.0, a.center.1);
    let (field, p, source, eps_max, predicted): (
        Box<dyn ScalarField<f64>>,
        Option<f64>,
        String,
        f64,
        Option<f64>,
    ) = if a.aronsson {
        if a.source.p.is_some() {
            return Err(bad("--aronsson uses the p = inf formula; drop --p"));
        }
        (
            Box::new(AronssonField),
            None,
            "aronsson".into(),
            a.eps_max.unwrap_or(0.1),
            None,
        )
    } else {
        let (series, source) = load_series(&a.source)?;
        let reach = series.image_inradius(1024);
        let eps_max = a.eps_max.unwrap_or(0.5 * reach);
        if center.norm() + eps_max >= reach {
            return Err(bad(format!(
                "|center| + eps_max = {} leaves the region {reach:.6} where the series is trusted",
                center.norm() + eps_max
            )));
        }
        let predicted = if series.is_single_mode() {
            None
        } else {
            criticality(series.params()).ok().map(|c| 1.0 + c.ratio)
        };
        let p = series.params().p();
        (Box::new(series), Some(p), source, eps_max, predicted)
    };
    let cfg = LadderConfig::new(eps_max, a.rungs, a.ratio, a.resolution)?;
    let report = decay_ladder(field.as_ref(), p, center, &cfg)?;
    let summary = report.summary();
    let verdict = report.verdict();
    let radii = cfg.radii();
    let out = VerifySummary {
        source,
        p,
        center: [a.center.0, a.center.1],
        radii: [radii[0], radii[radii.len() - 1]],
        rungs: a.rungs,
        resolution: a.resolution,
        exponent: summary.exponent,
        coefficient: summary.coefficient,
        residual: summary.residual,
        floor_hit: summary.floor_hit,
        rungs_in_fit: report.used_in_fit.iter().filter(|u| **u).count(),
        verdict,
        predicted_bound: predicted,
    };
    let json_text = to_json(&out);
    if let Some(stem) = &a.out {
        write_file(&with_suffix(stem, ".csv"), &report.to_csv())?;
        write_file(&with_suffix(stem, ".json"), &json_text)?;
    }
    let code = if verdict == Verdict::NotVerified {
        4
    } else {
        0
    };
    Ok(Outcome {
        stdout: json_text,
        code,
    })
}

#[derive(Serialize)]
struct SolveSummary {
    #[serde(flatten)]
    report: SolveReport<f64>,
    vs_reference: Comparison<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vs_variational: Option<Comparison<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps_nodes: Option<usize>,
}

#[derive(Serialize)]
struct OracleSummary {
    source: String,
    p: f64,
    grid: usize,
    spacing: f64,
    half_width: f64,
    tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    variational: Option<SolveSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amv: Option<SolveSummary>,
}

fn save_grid(grid: &GridField, stem: &Path, name: &str, format: GridFormat) -> Result<(), Failure> {
    let ext = match format {
        GridFormat::Csv => "csv",
        GridFormat::Bin => "bin",
    };
    let path = with_suffix(stem, &format!("_{name}.{ext}"));
    grid.save(&path).map_err(|e| io_failure(&path, e))
}

pub fn oracle(a: &OracleArgs) -> Result<Outcome, Failure> {
    if a.grid < 17 || a.grid % 2 == 0 {
        return Err(bad(format!(
            "grid = {} must be odd and at least 17 so the critical point sits on a node",
            a.grid
        )));
    }
    if !(a.tol > 0.0) {
        return Err(bad("tol must be positive"));
    }
    let runs_amv = a.mode != SolveMode::Variational;
    if runs_amv && a.eps_nodes < 2 {
        return Err(bad(format!(
            "eps_nodes = {} must be at least 2",
            a.eps_nodes
        )));
    }
    if runs_amv && 2 * a.eps_nodes + 1 >= a.grid {
        return Err(bad(format!(
            "eps_nodes = {} leaves no interior on a {}-node grid",
            a.eps_nodes, a.grid
        )));
    }
    let (series, source) = load_series(&a.source)?;
    let p = series.params().p();
    if runs_amv && p < 2.0 {
        return Err(bad(format!(
            "the mean value iteration needs p >= 2, got p = {p}"
        )));
    }
    let half_width = 0.9 * series.image_inradius(1024) / std::f64::consts::SQRT_2;
    let reference = GridField::centered_square(Complex::new(0.0, 0.0), half_width, a.grid, 1)?
        .sampled(&series)?;

    let mut failures = Vec::new();
    let variational = if a.mode != SolveMode::Amv {
        let (sol, report) = solve_dirichlet_variational(&reference, p, a.tol, a.max_iter)?;
        if !report.converged {
            failures.push(format!(
                "variational solver stopped after {} sweeps with residual {:e}",
                report.iterations, report.final_residual
            ));
        }
        Some((sol, report))
    } else {
        None
    };
    let amv = if runs_amv {
        let boundary = reference.with_boundary_strip(a.eps_nodes)?;
        let (sol, report) = solve_dirichlet_amv(&boundary, p, a.eps_nodes, a.tol, a.max_iter)?;
        if !report.converged {
            failures.push(format!(
                "mean value iteration stopped after {} sweeps with change {:e}",
                report.iterations, report.final_residual
            ));
        }
        Some((sol, report))
    } else {
        None
    };

    let summary = OracleSummary {
        source,
        p,
        grid: a.grid,
        spacing: reference.spacing,
        half_width,
        tol: a.tol,
        variational: match &variational {
            Some((sol, rep)) => Some(SolveSummary {
                report: rep.clone(),
                vs_reference: compare_fields(sol, &reference)?,
                vs_variational: None,
                eps_nodes: None,
            }),
            None => None,
        },
        amv: match &amv {
            Some((sol, rep)) => Some(SolveSummary {
                report: rep.clone(),
                vs_reference: compare_fields(sol, &reference)?,
                vs_variational: match &variational {
                    Some((v, _)) => Some(compare_fields(sol, v)?),
                    None => None,
                },
                eps_nodes: Some(a.eps_nodes),
            }),
            None => None,
        },
    };
    let json_text = to_json(&summary);
    if let Some(stem) = &a.out {
        write_file(&with_suffix(stem, ".json"), &json_text)?;
        save_grid(&reference, stem, "reference", a.format)?;
        if let Some((sol, _)) = &variational {
            save_grid(sol, stem, "variational", a.format)?;
        }
        if let Some((sol, _)) = &amv {
            save_grid(sol, stem, "amv", a.format)?;
        }
    }
    if failures.is_empty() {
        Ok(Outcome::ok(json_text))
    } else {
        print!("{json_text}");
        Err(Failure::Solver(failures.join("; ")))
    }
}
