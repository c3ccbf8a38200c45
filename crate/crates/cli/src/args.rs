use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "magmf", version, about = "Mean-field limit experiments for magnetic bosons on a lattice")]
pub struct Cli {
    /// Worker cap for the convergence-cell pool and the inner kernels.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Skip SVG plots.
    #[arg(long, global = true)]
    pub no_plots: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve the Hartree equation and write the trajectory observables.
    Hartree(RunArgs),
    /// Propagate one N-body cell and record marginal distances per sample.
    Nbody(RunArgs),
    /// Run a convergence study and emit its report.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        which: Which,
        /// Print the resolved cell table and memory estimates, then stop.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the invariant suites.
    Check {
        #[command(flatten)]
        run: RunArgs,
        /// Restrict to these suites (comma separated or repeated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Trace,
    Energy,
    Regularization,
}

impl Which {
    pub fn name(self) -> &'static str {
        match self {
            Which::Trace => "trace",
            Which::Energy => "energy",
            Which::Regularization => "regularization",
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Config file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Command-line replacements for single config keys.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub sample_stride: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub n_particles: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}
