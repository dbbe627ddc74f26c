use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pharm",
    version,
    args_conflicts_with_subcommands = true,
    about = "Planar p-harmonic functions near critical points and their mean value expansion",
    after_help = "Exit status: 0 success, 2 bad input, 3 bracket failure, 4 verification negative, 5 solver failure.\n\
                  PHARM_THREADS caps the worker threads (0 runs sequentially)."
)]
pub struct Cli {
    /// Read the command from a JSON file: {"command": "...", "args": {"flag": value, ...}}
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponent table, criticality ratio, Hölder verdict and mean value weights.
    Exponents(ExponentsArgs),
    /// Root of lambda_{n+2} = lambda_{n+1}^2 (n = 1 or 2), as JSON.
    Threshold(ThresholdArgs),
    /// Write a series document.
    Build(BuildArgs),
    /// Fit the decay of the mean value remainder across a radius ladder.
    Verify(VerifyArgs),
    /// Solve the Dirichlet problem on a grid and compare with the series.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct ExponentsArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub n: u32,
    /// Largest mode index in the table.
    #[arg(long, default_value_t = 6)]
    pub kmax: u32,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub n: u32,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// p = 2, A_2 = 1
    Harmonic,
    /// n = 1, A_2 = 1, A_3 = 0.3
    WorstCase,
    /// n = 2, A_3 = 1, A_4 = 0.2
    N2,
    /// n = 1, A_2 = 1 only
    MainTerm,
}

/// Where a series comes from.
#[derive(Debug, Args)]
pub struct SeriesSource {
    /// Series document (JSON).
    #[arg(long, value_name = "FILE", conflicts_with = "preset")]
    pub series: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Exponent for a preset (default 4); must match the series when given with --series.
    #[arg(long)]
    pub p: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, conflicts_with = "preset")]
    pub n: Option<u32>,
    /// Mode as k:re or k:re:im; repeat for several modes.
    #[arg(long = "mode", value_name = "K:RE[:IM]")]
    pub modes: Vec<String>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub trust: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SeriesSource,
    /// Use x^{4/3} - y^{4/3} with the p = inf midrange formula.
    #[arg(long, conflicts_with_all = ["series", "preset"])]
    pub aronsson: bool,
    /// Disk center as x,y.
    #[arg(long, default_value = "0,0", value_parser = parse_point)]
    pub center: (f64, f64),
    /// Largest radius (default: half the image inradius, 0.1 for --aronsson).
    #[arg(long)]
    pub eps_max: Option<f64>,
    #[arg(long, default_value_t = 8)]
    pub rungs: usize,
    #[arg(long, default_value_t = 0.7)]
    pub ratio: f64,
    /// Radial shells of the disk quadrature.
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    /// Output stem: writes STEM.csv and STEM.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveMode {
    Variational,
    Amv,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridFormat {
    Csv,
    Bin,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: SeriesSource,
    /// Nodes per side; odd and at least 17.
    #[arg(long, default_value_t = 65)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = SolveMode::Both)]
    pub mode: SolveMode,
    /// Disk radius of the mean value iteration, in nodes.
    #[arg(long, default_value_t = 3)]
    pub eps_nodes: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iter: usize,
    /// Output stem: writes STEM.json and one grid file per field.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GridFormat::Csv)]
    pub format: GridFormat,
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected x,y, got `{s}`"))?;
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{t}` is not a finite number"))
    };
    Ok((num(x)?, num(y)?))
}

/// Turns `{"command": name, "args": {...}}` into an argument vector.
pub fn config_to_argv(text: &str) -> Result<Vec<String>, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let command = value
        .get("command")
        .and_then(|c| c.as_str())
        .ok_or("config needs a string field `command`")?;
    let mut argv = vec!["pharm".to_string(), command.to_string()];
    let args = match value.get("args") {
        None | Some(serde_json::Value::Null) => return Ok(argv),
        Some(serde_json::Value::Object(m)) => m,
        Some(_) => return Err("config field `args` must be an object".into()),
    };
    let scalar = |key: &str, v: &serde_json::Value| -> Result<String, String> {
        match v {
            serde_json::Value::String(s) => Ok(s.clone()),
            serde_json::Value::Number(n) => Ok(n.to_string()),
            _ => Err(format!(
                "config argument `{key}` must be a string, number, boolean or array"
            )),
        }
    };
    for (key, v) in args {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => argv.push(flag),
            serde_json::Value::Bool(false) => {}
            serde_json::Value::Array(items) => {
                for item in items {
                    argv.push(flag.clone());
                    argv.push(scalar(key, item)?);
                }
            }
            other => {
                argv.push(flag);
                argv.push(scalar(key, other)?);
            }
        }
    }
    Ok(argv)
}
