use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use periflow_cli::commands;

/// Steady subsonic Euler flow through periodic 2-D nozzles.
#[derive(Parser)]
#[command(name = "periflow", version, about)]
struct Cli {
    /// Bound the number of concurrent solves in sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Potential (irrotational) baseline solve.
    SolvePotential {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full rotational Euler solve via the inflow-trace fixed point.
    SolveEuler {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Potential solves over a list of mass fluxes; emits a CSV table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated mass fluxes.
        #[arg(long, value_delimiter = ',', required = true)]
        m_values: Vec<f64>,
    },
    /// Bracket the critical mass flux by bisection.
    Critical {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Relative bracket width at termination.
        #[arg(long)]
        bracket_tol: Option<f64>,
        /// Mach target 1 - delta for the stored sequence.
        #[arg(long)]
        mach_delta: Option<f64>,
        /// Starting flux for the lower bracket end.
        #[arg(long)]
        m_start: Option<f64>,
    },
    /// Solve and emit the verification report as key=value lines.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore failure: the pool can only be initialized once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let result = match &cli.command {
        Command::SolvePotential { config, out } => {
            commands::cmd_solve_potential(config, out.as_deref())
        }
        Command::SolveEuler { config, out } => commands::cmd_solve_euler(config, out.as_deref()),
        Command::Sweep {
            config,
            out,
            m_values,
        } => commands::cmd_sweep(config, out.as_deref(), m_values),
        Command::Critical {
            config,
            out,
            bracket_tol,
            mach_delta,
            m_start,
        } => commands::cmd_critical(config, out.as_deref(), *bracket_tol, *mach_delta, *m_start),
        Command::Verify { config, out } => commands::cmd_verify(config, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
