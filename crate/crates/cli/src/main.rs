mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{config_to_argv, Cli, Command};
use commands::{Failure, Outcome};

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("PHARM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Failure::BadInput(format!(
            "PHARM_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| Failure::BadInput(format!("cannot configure threads: {e}")))
}

fn parse_cli() -> Result<Cli, clap::Error> {
    let cli = Cli::try_parse()?;
    let Some(path) = &cli.config else {
        return Ok(cli);
    };
    let fail = |msg: String| clap::Error::raw(clap::error::ErrorKind::ValueValidation, msg + "\n");
    let text =
        std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    let argv = config_to_argv(&text).map_err(fail)?;
    Cli::try_parse_from(argv)
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    configure_threads()?;
    match cli.command {
        Some(Command::Exponents(a)) => commands::exponents(&a),
        Some(Command::Threshold(a)) => commands::threshold(&a),
        Some(Command::Build(a)) => commands::build(&a),
        Some(Command::Verify(a)) => commands::verify(&a),
        Some(Command::Oracle(a)) => commands::oracle(&a),
        None => Err(Failure::BadInput("no command given; see --help".into())),
    }
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.stdout.as_bytes());
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
