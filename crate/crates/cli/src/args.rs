use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "eis-bayes", version, about = "Bayesian equivalent-circuit fitting of impedance spectra")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON configuration for the command; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Use ADAM epsilon 1e-8 instead of the configured value.
    #[arg(long, global = true)]
    pub paper_epsilon: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate current/voltage records of a circuit.
    Simulate,
    /// Estimate an impedance spectrum from simulated or measured records.
    Estimate {
        /// records.json written by `simulate`.
        manifest: PathBuf,
    },
    /// Fit the variational posterior to a spectrum.
    FitVb { spectrum: PathBuf },
    /// Sample the posterior of a spectrum with adaptive Metropolis.
    FitMcmc { spectrum: PathBuf },
    /// Average spectra measured on a common grid.
    Average {
        #[arg(required = true)]
        spectra: Vec<PathBuf>,
    },
    /// Compare a variational posterior with a reference posterior, a
    /// measured spectrum and/or the true spectrum.
    Compare {
        /// posterior.json written by `fit-vb`.
        #[arg(long)]
        posterior: PathBuf,
        /// posterior.json or diagnostics.json to compare moments against.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}
