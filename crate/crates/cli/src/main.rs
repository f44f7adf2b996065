//! Command-line front end: identity checks, analytic tables, protocol
//! simulation, lattice analysis and rate budgets.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "mbs", version, about = "Squeezing collective spins toward many-body singlets")]
struct Cli {
    /// Worker threads for sector-parallel work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Directory for CSV/JSON outputs and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in input: four-half, fig2, fig3 or silicon.
    #[arg(long)]
    preset: Option<String>,
    /// JSON input document.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Kinetic,
    SteadyShortcut,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Axis {
    X,
    Y,
}

#[derive(Subcommand)]
enum Command {
    /// Check the transfer-ratio identity, selection rules and transfer asymmetry.
    Verify {
        #[command(flatten)]
        source: Source,
        /// Tolerance on the ratio identity.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Random superpositions of the two partition operators to check.
        #[arg(long, default_value_t = 10)]
        superpositions: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the steady-state recursion, g series, singlet floor and variance bound.
    Steady {
        #[arg(long, default_value_t = 12)]
        jmax: usize,
    },
    /// Run the alternating squeezing protocol.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Cross-check against full master-equation integration (product dimension <= 64).
        #[arg(long)]
        audit: bool,
        /// Largest accepted P(J) deviation in the audit.
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
    },
    /// Couplings, coordination shells and ac decompositions of a lattice model.
    Lattice {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "x")]
        direction: Axis,
        /// Relative tolerance for equal couplings.
        #[arg(long, default_value_t = mbs::lattice::SHELL_TOLERANCE)]
        tol: f64,
    },
    /// Polarization rates and the low-loss budget.
    Rates {
        #[command(flatten)]
        source: Source,
        /// Required ratio of the ac rate to the nuclear dephasing rate.
        #[arg(long)]
        factor: Option<f64>,
    },
}

/// Failures grouped by exit code.
#[derive(Debug)]
pub enum CliError {
    Tolerance(String),
    Input(String),
    Resource(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Tolerance(_) => 1,
            CliError::Input(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl From<mbs::Error> for CliError {
    fn from(e: mbs::Error) -> Self {
        match e {
            mbs::Error::DimensionCap { .. } => CliError::Resource(e.to_string()),
            mbs::Error::Domain(_) | mbs::Error::Parse(_) => CliError::Input(e.to_string()),
            mbs::Error::Numerical(_) | mbs::Error::StepUnderflow { .. } | mbs::Error::Decomposition { .. } => {
                CliError::Tolerance(e.to_string())
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot configure {n} threads: {e}")))?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Verify { source, tol, superpositions, seed } => commands::verify(&source, out, tol, superpositions, seed),
        Command::Steady { jmax } => commands::steady(out, jmax),
        Command::Simulate { source, mode, audit, tol } => commands::simulate(&source, out, mode, audit, tol),
        Command::Lattice { source, direction, tol } => commands::lattice(&source, out, direction, tol),
        Command::Rates { source, factor } => commands::rates(&source, out, factor),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Tolerance(m) => format!("tolerance violation: {m}"),
                CliError::Input(m) => format!("input error: {m}"),
                CliError::Resource(m) => format!("resource limit: {m}"),
            };
            eprintln!("mbs: {msg}");
            ExitCode::from(e.code())
        }
    }
}
