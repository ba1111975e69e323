use std::path::PathBuf;

use eis_bayes::signal::average_spectra;
use serde::Serialize;

use super::display;
use crate::args::GlobalArgs;
use crate::error::CliError;
use crate::io::{create_dir, read_spectrum, write_json, write_spectrum, SCHEMA_VERSION};

pub const AVERAGE: &str = "average.csv";

#[derive(Serialize)]
struct AverageOutput {
    schema_version: u32,
    command: &'static str,
    inputs: Vec<String>,
    n_spectra: usize,
    n_points: usize,
}

/// Pointwise mean; the dispersion column holds the spread across inputs.
pub fn run(args: &GlobalArgs, paths: &[PathBuf]) -> Result<(), CliError> {
    let spectra = paths.iter().map(|p| read_spectrum(p)).collect::<Result<Vec<_>, _>>()?;
    let mean = average_spectra(&spectra)?;
    create_dir(&args.out)?;
    write_spectrum(&args.out.join(AVERAGE), &mean)?;
    let out = AverageOutput {
        schema_version: SCHEMA_VERSION,
        command: "average",
        inputs: paths.iter().map(|p| display(p)).collect(),
        n_spectra: spectra.len(),
        n_points: mean.len(),
    };
    write_json(&args.out.join("average.json"), &out)?;
    say!("averaged {} spectra over {} points", spectra.len(), mean.len());
    Ok(())
}
