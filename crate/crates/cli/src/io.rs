//! File formats: spectrum and time-series CSVs, JSON sidecars and reports.

use std::fs;
use std::path::{Path, PathBuf};

use eis_bayes::signal::{Channel, ImpedanceSpectrum, TimeSeriesRecord};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

const SPECTRUM_HEADER: [&str; 3] = ["freq_hz", "re_ohm", "im_ohm"];
const DISPERSION_COLUMN: &str = "dispersion_ohm";
const SERIES_HEADER: [&str; 2] = ["t_s", "value"];

/// Shortest representation that parses back to the same `f64`
/// (never more than 17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::parse(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    if !path.is_file() {
        return Err(CliError::Validation(format!("{}: file not found", path.display())));
    }
    csv::Reader::from_path(path).map_err(|e| CliError::parse(path, e))
}

/// Write rows of already formatted fields under `header`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| CliError::parse(path, e);
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>()).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    let v: f64 =
        field.trim().parse().map_err(|_| CliError::parse(path, format!("line {line}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::parse(path, format!("line {line}: value is not finite")));
    }
    Ok(v)
}

pub fn write_spectrum(path: &Path, spectrum: &ImpedanceSpectrum) -> Result<(), CliError> {
    let mut header = SPECTRUM_HEADER.to_vec();
    if spectrum.dispersion().is_some() {
        header.push(DISPERSION_COLUMN);
    }
    let rows = (0..spectrum.len()).map(|k| {
        let z = spectrum.z()[k];
        let mut row = vec![fmt_f64(spectrum.freqs_hz()[k]), fmt_f64(z.re), fmt_f64(z.im)];
        if let Some(d) = spectrum.dispersion() {
            row.push(fmt_f64(d[k]));
        }
        row
    });
    write_csv(path, &header, rows)
}

pub fn read_spectrum(path: &Path) -> Result<ImpedanceSpectrum, CliError> {
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| CliError::parse(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let with_dispersion = match names.as_slice() {
        [a, b, c] if [*a, *b, *c] == SPECTRUM_HEADER => false,
        [a, b, c, d] if [*a, *b, *c] == SPECTRUM_HEADER && *d == DISPERSION_COLUMN => true,
        _ => {
            return Err(CliError::parse(
                path,
                format!("expected header freq_hz,re_ohm,im_ohm[,dispersion_ohm], got {}", names.join(",")),
            ))
        }
    };
    let mut freqs = Vec::new();
    let mut z = Vec::new();
    let mut dispersion = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        let line = i + 2;
        let field = |j: usize| parse_field(path, line, &rec[j]);
        freqs.push(field(0)?);
        z.push(Complex64::new(field(1)?, field(2)?));
        if with_dispersion {
            dispersion.push(field(3)?);
        }
    }
    ImpedanceSpectrum::new(freqs, z, with_dispersion.then_some(dispersion)).map_err(|e| CliError::parse(path, e))
}

/// Sidecar stored next to each time-series CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSidecar {
    pub schema_version: u32,
    pub channel: Channel,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    /// Multisine tone frequencies, if the record was simulated with one.
    #[serde(default)]
    pub excited_freqs_hz: Vec<f64>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_series(path: &Path, record: &TimeSeriesRecord, excited_freqs_hz: &[f64]) -> Result<(), CliError> {
    let rows = record.samples().iter().enumerate().map(|(i, v)| [fmt_f64(record.time_s(i)), fmt_f64(*v)]);
    write_csv(path, &SERIES_HEADER, rows)?;
    let sidecar = SeriesSidecar {
        schema_version: SCHEMA_VERSION,
        channel: record.channel(),
        sample_rate_hz: record.sample_rate_hz(),
        n_samples: record.len(),
        excited_freqs_hz: excited_freqs_hz.to_vec(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn read_series(path: &Path) -> Result<(TimeSeriesRecord, SeriesSidecar), CliError> {
    let sidecar: SeriesSidecar = read_json(&sidecar_path(path))?;
    let mut r = csv_reader(path)?;
    let header = r.headers().map_err(|e| CliError::parse(path, e))?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != SERIES_HEADER {
        return Err(CliError::parse(path, "expected header t_s,value"));
    }
    let mut samples = Vec::with_capacity(sidecar.n_samples);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(path, e))?;
        samples.push(parse_field(path, i + 2, &rec[1])?);
    }
    if samples.len() != sidecar.n_samples {
        return Err(CliError::parse(
            path,
            format!("sidecar announces {} samples, file has {}", sidecar.n_samples, samples.len()),
        ));
    }
    let record = TimeSeriesRecord::new(samples, sidecar.sample_rate_hz, sidecar.channel)
        .map_err(|e| CliError::parse(path, e))?;
    Ok((record, sidecar))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Validation(format!("{}: file not found", path.display()))
        } else {
            CliError::io(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))
}
