//! `orbitmax` — maximum-entropy densities on adjoint orbits.
//!
//! Reads a JSON problem file, runs one command, prints one JSON envelope.
//! See the crate documentation and `--help` for the file format.

use std::io::{Read, Write};
use std::process::ExitCode;

use clap::Parser;
use orbitmax::cli_io::{self, CliFailure, ProblemFile};

#[derive(Parser)]
#[command(
    name = "orbitmax",
    version,
    about = "Maximum-entropy densities on adjoint orbits: solve the dual program, \
             evaluate orbital integrals, and cross-check against Monte Carlo"
)]
struct Args {
    /// Problem JSON file ('-' or omitted reads stdin)
    #[arg(long)]
    input: Option<String>,
    /// One of: solve, integrate, gradient, membership, validate, sample-orbit
    #[arg(long)]
    command: String,
    /// Override the file's target accuracy
    #[arg(long)]
    epsilon: Option<f64>,
    /// Override the file's interior-margin hint
    #[arg(long)]
    eta: Option<f64>,
    /// Override the file's RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the file's Monte-Carlo sample count
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Output file ('-' or omitted writes stdout)
    #[arg(long)]
    output: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(fail) => {
            eprintln!("{fail}");
            ExitCode::from(fail.exit_code.clamp(1, 255) as u8)
        }
    }
}

fn run(args: &Args) -> Result<(), CliFailure> {
    let raw = read_input(args.input.as_deref())?;
    let mut problem: ProblemFile = cli_io::parse_problem(&raw)?;
    if let Some(e) = args.epsilon {
        problem.epsilon = e;
    }
    if let Some(e) = args.eta {
        problem.eta = Some(e);
    }
    if let Some(s) = args.seed {
        problem.seed = s;
    }
    if let Some(n) = args.mc_samples {
        problem.mc_samples = n;
    }
    let rendered = cli_io::run_command(&args.command, &problem, &raw)?;
    write_output(args.output.as_deref(), &rendered)
}

fn read_input(path: Option<&str>) -> Result<String, CliFailure> {
    match path {
        None | Some("-") => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| io_failure("reading stdin", &e))?;
            Ok(buf)
        }
        Some(p) => std::fs::read_to_string(p).map_err(|e| io_failure(p, &e)),
    }
}

fn write_output(path: Option<&str>, rendered: &str) -> Result<(), CliFailure> {
    match path {
        None | Some("-") => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            writeln!(lock, "{rendered}").map_err(|e| io_failure("writing stdout", &e))
        }
        Some(p) => {
            std::fs::write(p, format!("{rendered}\n")).map_err(|e| io_failure(p, &e))
        }
    }
}

fn io_failure(context: &str, err: &std::io::Error) -> CliFailure {
    CliFailure {
        code: "IO_ERROR".to_string(),
        message: format!("{context}: {err}"),
        exit_code: 5,
    }
}
