use std::path::Path;

use eis_bayes::ecm::FrequencyGrid;
use eis_bayes::signal::{concatenate_spectra, default_grid, estimate_impedance_cwt, Channel};
use serde::Serialize;

use super::display;
use super::simulate::Manifest;
use crate::args::GlobalArgs;
use crate::config::{load, EstimateConfig, GridChoice};
use crate::error::CliError;
use crate::io::{create_dir, read_json, read_series, write_json, write_spectrum, SCHEMA_VERSION};

pub const SPECTRUM: &str = "spectrum.csv";

#[derive(Serialize)]
struct EstimateOutput<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a EstimateConfig,
    manifest: String,
    n_records: usize,
    n_points: usize,
}

pub fn run(args: &GlobalArgs, manifest_path: &Path) -> Result<(), CliError> {
    let config: EstimateConfig = load(args.config.as_deref())?;
    let manifest: Manifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut parts = Vec::with_capacity(manifest.records.len());
    for pair in &manifest.records {
        let (current, cur_meta) = read_series(&base.join(&pair.current))?;
        let (voltage, _) = read_series(&base.join(&pair.voltage))?;
        if current.channel() != Channel::Current || voltage.channel() != Channel::Voltage {
            return Err(CliError::Validation(format!(
                "{} / {}: expected a current and a voltage record",
                pair.current, pair.voltage
            )));
        }
        let grid = match config.grid {
            GridChoice::Excited if !cur_meta.excited_freqs_hz.is_empty() => {
                FrequencyGrid::new(cur_meta.excited_freqs_hz.clone())?
            }
            _ => default_grid(&current, &config.cwt)?,
        };
        parts.push(estimate_impedance_cwt(&current, &voltage, &grid, config.cwt.omega0)?);
    }
    let spectrum = concatenate_spectra(&parts)?;

    create_dir(&args.out)?;
    write_spectrum(&args.out.join(SPECTRUM), &spectrum)?;
    let out = EstimateOutput {
        schema_version: SCHEMA_VERSION,
        command: "estimate",
        config: &config,
        manifest: display(manifest_path),
        n_records: parts.len(),
        n_points: spectrum.len(),
    };
    write_json(&args.out.join("estimate.json"), &out)?;
    say!("estimated {} points from {} record pair(s)", spectrum.len(), parts.len());
    Ok(())
}
