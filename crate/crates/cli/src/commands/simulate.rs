use std::path::Path;

use eis_bayes::ecm::{impedance, EcmParams, FrequencyGrid};
use eis_bayes::signal::{default_grid, simulate, CwtConfig, ImpedanceSpectrum, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::args::GlobalArgs;
use crate::config::{load, SimulateConfig};
use crate::error::CliError;
use crate::io::{create_dir, write_json, write_series, write_spectrum, SCHEMA_VERSION};

pub const MANIFEST: &str = "records.json";
pub const REFERENCE_SPECTRUM: &str = "reference_spectrum.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordPair {
    /// Paths relative to the manifest.
    pub current: String,
    pub voltage: String,
}

/// Index of the records written by one `simulate` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub config: SimulateConfig,
    pub records: Vec<RecordPair>,
    /// Noise-free impedance of the simulated circuit at the analysed
    /// frequencies.
    pub reference_spectrum: String,
}

pub fn run(args: &GlobalArgs) -> Result<(), CliError> {
    let config = load::<SimulateConfig>(args.config.as_deref())?.resolved(args.seed)?;
    let (params, records): (EcmParams, Vec<SimulationConfig>) = match &config {
        SimulateConfig::Sweep(c) => (c.params.clone(), c.bands()?),
        SimulateConfig::Record(c) => (c.params.clone(), vec![c.clone()]),
        SimulateConfig::Reference { .. } => unreachable!("presets are expanded when resolving"),
    };
    create_dir(&args.out)?;

    let mut pairs = Vec::with_capacity(records.len());
    let mut freqs = Vec::new();
    for (k, record) in records.iter().enumerate() {
        let sim = simulate(record)?;
        let pair = RecordPair { current: format!("record{k}_current.csv"), voltage: format!("record{k}_voltage.csv") };
        write_series(&args.out.join(&pair.current), &sim.current, &sim.excited_freqs_hz)?;
        write_series(&args.out.join(&pair.voltage), &sim.voltage, &sim.excited_freqs_hz)?;
        if sim.excited_freqs_hz.is_empty() {
            freqs.extend_from_slice(default_grid(&sim.current, &CwtConfig::default())?.freqs_hz());
        } else {
            freqs.extend_from_slice(&sim.excited_freqs_hz);
        }
        pairs.push(pair);
    }
    write_reference(&args.out.join(REFERENCE_SPECTRUM), &params, freqs)?;

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        config,
        records: pairs,
        reference_spectrum: REFERENCE_SPECTRUM.into(),
    };
    let path = args.out.join(MANIFEST);
    write_json(&path, &manifest)?;
    say!("wrote {} record pair(s) to {}", manifest.records.len(), args.out.display());
    Ok(())
}

fn write_reference(path: &Path, params: &EcmParams, mut freqs: Vec<f64>) -> Result<(), CliError> {
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    let grid = FrequencyGrid::new(freqs)?;
    let spectrum = ImpedanceSpectrum::from_grid(&grid, impedance(params, &grid))?;
    write_spectrum(path, &spectrum)
}
