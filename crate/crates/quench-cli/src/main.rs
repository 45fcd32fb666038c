//! `quench` — a command-line laboratory for minimizers of the degenerate
//! energy `∫ |Dv|^p / p + kappa * mu * max(v, 0)^gamma`.
//!
//! Four subcommands: `solve` computes a minimizer, `verify` measures a
//! stored field against the quantitative theory, `sweep` runs a parameter
//! grid, and `oracle` emits the exact-profile fixture. Full runs are
//! described by a JSON config; `--grid` and `--out` exist as convenience
//! overrides. Exit codes: 0 success, 2 invalid input, 3 solver
//! non-convergence (artifacts are still written). Failures also emit one
//! JSON object on stderr.

mod commands;
mod config;
mod error;

use clap::{Args, Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "quench", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOverrides {
    /// Override the node counts: "1025" (1D) or "261x131" (2D).
    #[arg(long)]
    grid: Option<String>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy described by a JSON config; writes the field and
    /// a solve summary.
    Solve {
        /// Path to the run config (JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: CommonOverrides,
    },
    /// Measure a stored field against every quantitative estimate and write
    /// the report.
    Verify {
        /// Path to the run config (JSON); the problem block must match the
        /// field's grid.
        #[arg(long)]
        config: PathBuf,
        /// Path to the field (binary format written by solve/oracle).
        #[arg(long)]
        field: PathBuf,
        /// Optional coarser-grid report; adds a cross-resolution stability
        /// check to the output report.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve and verify every (p, gamma) cell of a parameter grid; writes
    /// per-cell artifacts and an aggregate CSV.
    Sweep {
        /// Path to the sweep config (JSON) with `p` and `gamma` lists.
        #[arg(long)]
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the exact one-sided power profile and write it as a fixture
    /// (binary field + JSON header recording alpha and the amplitude).
    Oracle {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
        /// Contact point of the profile on the first axis.
        #[arg(long)]
        x0: f64,
        /// Node counts: "1025" (1D) or "261x131" (2D).
        #[arg(long)]
        grid: String,
        /// First-axis extent as "lo,hi".
        #[arg(long, default_value = "0,1", value_parser = parse_extent)]
        extent_x: (f64, f64),
        /// Second-axis extent as "lo,hi"; makes the fixture 2D.
        #[arg(long, value_parser = parse_extent)]
        extent_y: Option<(f64, f64)>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write a CSV export of the sampled profile.
        #[arg(long)]
        csv: bool,
    },
}

fn parse_extent(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"lo,hi\", got \"{s}\""))?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("bad lower extent \"{a}\": {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("bad upper extent \"{b}\": {e}"))?;
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { config, overrides } => {
            commands::cmd_solve(&config, overrides.grid.as_deref(), overrides.out.as_deref())
        }
        Command::Verify { config, field, baseline, out } => {
            commands::cmd_verify(&config, &field, baseline.as_deref(), out.as_deref())
        }
        Command::Sweep { config, out } => commands::cmd_sweep(&config, out.as_deref()),
        Command::Oracle { p, gamma, kappa, mu, x0, grid, extent_x, extent_y, out, csv } => {
            commands::cmd_oracle(&commands::OracleArgs {
                p,
                gamma,
                kappa,
                mu,
                x0,
                grid: &grid,
                extent_x,
                extent_y,
                out: &out,
                csv,
            })
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // validation failure reported like every other one.
            if e.use_stderr() {
                let err = CliError::validation(e.to_string().trim_end().to_string());
                eprintln!("{}", err.to_json());
                std::process::exit(err.exit_code());
            }
            print!("{e}");
            std::process::exit(error::EXIT_OK);
        }
    };
    match run(cli) {
        Ok(()) => std::process::exit(error::EXIT_OK),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
