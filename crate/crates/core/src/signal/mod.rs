//! Measurement pipeline: simulated current/voltage records, wavelet-based
//! impedance estimation and spectrum averaging.

mod cwt;
mod simulate;
mod spectrum;
mod timeseries;

pub use cwt::{concatenate_spectra, default_grid, estimate_impedance_cwt, valid_band, CwtConfig};
pub use simulate::{
    simulate, simulate_sweep, Excitation, Simulation, SimulationConfig, SweepConfig, REFERENCE_NOISE_LEVELS,
};
pub use spectrum::{average_spectra, rms_distance, ImpedanceSpectrum};
pub use timeseries::{Channel, TimeSeriesRecord};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid spectrum: {0}")]
    Spectrum(String),
    #[error("spectra are on different frequency grids")]
    GridMismatch,
    #[error("invalid record: {0}")]
    Record(String),
    #[error("invalid simulation or estimation settings: {0}")]
    Config(String),
    #[error("records do not match: {0}")]
    Mismatch(String),
    #[error("current channel is all zeros")]
    ZeroCurrent,
    #[error("{freq_hz} Hz lies outside the usable band ({lo_hz}, {hi_hz}) Hz")]
    OutOfBand { freq_hz: f64, lo_hz: f64, hi_hz: f64 },
    #[error("current has no content near {freq_hz} Hz")]
    NoExcitation { freq_hz: f64 },
}
