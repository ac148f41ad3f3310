use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mhd::config::RunConfig;
use mhd::runner::{generate_reference, run_case, write_csv, write_csv_file};
use mhd::verify::{verify_case, VerifyOptions};

/// Stationary resistive MHD benchmarks with adjoint error estimates.
#[derive(Debug, Parser)]
#[command(name = "mhd", version)]
struct Cli {
    /// Table rows solved concurrently.
    #[arg(long, short, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed of the random vectors used by `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output (repeat for debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve every mesh of a case and write the result CSV.
    Run {
        config: PathBuf,
        /// Overrides `output.csv`; `-` writes to standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compute and store the reference solution of a cavity case.
    Reference { config: PathBuf },
    /// Check adjoint consistency, Jacobian accuracy, Galerkin orthogonality
    /// and divergence cleaning for a case.
    Verify {
        config: PathBuf,
        /// Grid of the algebraic checks.
        #[arg(long, default_value_t = 4)]
        n: usize,
    },
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    let fail = |e: &dyn std::fmt::Display| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    };
    match cli.command {
        Command::Run { config, output } => {
            let cfg = load(&config)?;
            let rows = run_case(&cfg, cli.jobs).map_err(|e| fail(&e))?;
            match output.or_else(|| cfg.output.csv.clone()) {
                Some(p) if p.as_os_str() == "-" => write_csv(std::io::stdout().lock(), &rows).map_err(|e| fail(&e))?,
                Some(p) => {
                    write_csv_file(&p, &rows).map_err(|e| fail(&e))?;
                    println!("wrote {}", p.display());
                }
                None => write_csv(std::io::stdout().lock(), &rows).map_err(|e| fail(&e))?,
            }
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} rows failed", rows.len());
                return Err(ExitCode::FAILURE);
            }
        }
        Command::Reference { config } => {
            let cfg = load(&config)?;
            let r = generate_reference(&cfg).map_err(|e| fail(&e))?;
            println!("J_ref = {:e} (n={}, {}, {} dofs)", r.qoi_ref, r.n, r.degrees, r.dofs);
            if let Some((n, q)) = r.guard {
                println!("guard n={n}: J = {q:e}, difference {:.3e}", (r.qoi_ref - q).abs());
            }
        }
        Command::Verify { config, n } => {
            let cfg = load(&config)?;
            let options = VerifyOptions { n, seed: cli.seed, ..VerifyOptions::default() };
            let checks = verify_case(&cfg, &options).map_err(|e| fail(&e))?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Err(ExitCode::FAILURE);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
