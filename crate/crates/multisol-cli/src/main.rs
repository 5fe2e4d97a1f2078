//! Command-line front end: configure a run, search for solutions, compare
//! iteration methods, verify Jacobians, and export plot grids.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
//! failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use multisol::config::parse_config;
use multisol::report::{self, Method};
use multisol::Error;

#[derive(Parser)]
#[command(
    name = "multisol",
    about = "Multiple steady states of coupled semilinear elliptic systems:\n\
             spectral Galerkin discretization + trust-region Levenberg-Marquardt + deflation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the deflated multi-solution search described by a config file.
    Solve {
        /// Path to the `key = value` config file.
        config: PathBuf,
    },
    /// Tabulate residual norms of the solvers from the named presets.
    Compare {
        /// Path to the `key = value` config file.
        config: PathBuf,
        /// Comma-separated subset of `lm,newton`.
        #[arg(long, default_value = "lm,newton", value_delimiter = ',')]
        methods: Vec<String>,
        /// Comma-separated iteration checkpoints.
        #[arg(long, default_value = "5,10,15,20,25", value_delimiter = ',')]
        iters: Vec<usize>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the analytic Jacobian with finite differences.
    CheckJacobian {
        /// Path to the `key = value` config file.
        config: PathBuf,
    },
    /// Evaluate a stored solution file on a uniform grid.
    ExportGrid {
        /// A `*.coeffs.csv` solution file.
        solution: PathBuf,
        /// Grid points per direction.
        #[arg(long, default_value_t = 201)]
        resolution: usize,
        /// Output CSV path (default: alongside the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// 2 for configuration problems, 3 for numerical ones.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ParseError { .. }
        | Error::UnknownKey { .. }
        | Error::MissingRequired(_)
        | Error::Io(_)
        | Error::InvalidDegree(_)
        | Error::UnsupportedDim(_)
        | Error::UnsupportedExponent(_) => 2,
        Error::DimensionMismatch { .. }
        | Error::ConvergenceFailure(_)
        | Error::LinearSolveFailure
        | Error::AtDeflatedRoot
        | Error::UnsupportedTransform(_)
        | Error::PolishFailed(_) => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve { config } => {
            let cfg = parse_config(&config)?;
            let summary = report::run(&cfg)?;
            println!(
                "{}: {} solution(s) in {} attempt(s); outputs in {}",
                summary.model,
                summary.solutions.len(),
                summary.attempts,
                cfg.outdir.display()
            );
            for sol in &summary.solutions {
                println!(
                    "  {:>5}  |F| = {:9.3e}  iters = {:>4}  via {}",
                    sol.label, sol.residual_norm, sol.iterations, sol.discovered_by
                );
            }
        }
        Command::Compare {
            config,
            methods,
            iters,
            out,
        } => {
            let cfg = parse_config(&config)?;
            let mut parsed = Vec::new();
            for m in &methods {
                let method = Method::parse(m).ok_or_else(|| Error::ParseError {
                    line: 0,
                    reason: format!("unknown method `{m}`; expected lm or newton"),
                })?;
                parsed.push(method);
            }
            let table = report::comparison_table(&cfg, &parsed, &iters)?;
            match out {
                Some(path) => report::write_atomic(&path, &table)?,
                None => print!("{table}"),
            }
        }
        Command::CheckJacobian { config } => {
            let cfg = parse_config(&config)?;
            let deviation = report::check_jacobian(&cfg)?;
            let pass = deviation <= 1e-6;
            println!(
                "max relative deviation {deviation:.3e}: {}",
                if pass { "pass" } else { "FAIL" }
            );
            if !pass {
                return Err(Error::ConvergenceFailure(
                    "finite-difference Jacobian check failed".into(),
                ));
            }
        }
        Command::ExportGrid {
            solution,
            resolution,
            out,
        } => {
            let target = out.unwrap_or_else(|| solution.with_extension("grid.csv"));
            report::export_grid(&solution, resolution, &target)?;
            println!("wrote {}", target.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
