//! Command-line front end for `eis-bayes`: simulate records, estimate
//! spectra, fit posteriors and compare the results.

/// Status line on stdout. A closed pipe is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use args::{Cli, Command};
pub use error::CliError;

/// Threads used by the parallel parts of every command. Unset means rayon's
/// default.
pub const THREADS_ENV: &str = "EIS_BAYES_THREADS";

/// Configure the global thread pool from [`THREADS_ENV`].
pub fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate => commands::simulate::run(g),
        Command::Estimate { manifest } => commands::estimate::run(g, manifest),
        Command::FitVb { spectrum } => commands::fit_vb::run(g, spectrum),
        Command::FitMcmc { spectrum } => commands::fit_mcmc::run(g, spectrum),
        Command::Average { spectra } => commands::average::run(g, spectra),
        Command::Compare { posterior, reference, spectrum, truth } => {
            commands::compare::run(g, posterior, reference.as_deref(), spectrum.as_deref(), truth.as_deref())
        }
    }
}
