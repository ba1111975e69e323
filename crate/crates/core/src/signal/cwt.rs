use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::spectrum::ImpedanceSpectrum;
use super::timeseries::{Channel, TimeSeriesRecord};
use super::SignalError;
use crate::ecm::FrequencyGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwtConfig {
    /// Centre frequency of the Morlet wavelet, in radians per unit scale.
    pub omega0: f64,
    /// Density of the default analysis grid when no frequencies are given.
    pub scales_per_decade: usize,
}

impl Default for CwtConfig {
    fn default() -> Self {
        Self { omega0: 6.0, scales_per_decade: 12 }
    }
}

/// Frequencies (Hz) the estimator accepts for a record of `len` samples:
/// above 1/duration with a non-empty region outside the cone of influence,
/// and below Nyquist.
pub fn valid_band(len: usize, sample_rate_hz: f64, omega0: f64) -> (f64, f64) {
    let duration = len as f64 / sample_rate_hz;
    // Two e-folding widths sqrt(2)·s must fit inside the record.
    let coi = 2.0 * SQRT_2 * omega0 / (2.0 * PI * duration);
    ((1.0 / duration).max(coi), sample_rate_hz / 2.0)
}

/// Log-spaced analysis grid covering the valid band.
pub fn default_grid(record: &TimeSeriesRecord, config: &CwtConfig) -> Result<FrequencyGrid, SignalError> {
    let (lo, hi) = valid_band(record.len(), record.sample_rate_hz(), config.omega0);
    let per_decade = config.scales_per_decade as f64;
    let first = (lo.log10() * per_decade).floor() as i64 + 1;
    let last = (hi.log10() * per_decade).ceil() as i64 - 1;
    let freqs: Vec<f64> = (first..=last).map(|j| 10f64.powf(j as f64 / per_decade)).collect();
    FrequencyGrid::new(freqs).map_err(|e| SignalError::Config(e.to_string()))
}

/// Impedance from a current/voltage record pair by the Morlet wavelet
/// transfer-function ratio.
///
/// At each frequency the wavelet scale is `s = ω0·fs / (2πf)` samples. The
/// estimate is `Σ W_u·conj(W_i) / Σ |W_i|²` over the instants further than
/// `sqrt(2)·s` from either end of the record; the reported dispersion is the
/// standard deviation of the instantaneous ratio `W_u / W_i` over the same
/// instants.
pub fn estimate_impedance_cwt(
    current: &TimeSeriesRecord,
    voltage: &TimeSeriesRecord,
    grid: &FrequencyGrid,
    omega0: f64,
) -> Result<ImpedanceSpectrum, SignalError> {
    if current.channel() != Channel::Current || voltage.channel() != Channel::Voltage {
        return Err(SignalError::Mismatch("expected one current and one voltage record".into()));
    }
    if current.len() != voltage.len() || current.sample_rate_hz() != voltage.sample_rate_hz() {
        return Err(SignalError::Mismatch("records differ in length or sample rate".into()));
    }
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(SignalError::Config("omega0 must be positive".into()));
    }
    if current.samples().iter().all(|v| *v == 0.0) {
        return Err(SignalError::ZeroCurrent);
    }
    let n = current.len();
    let fs = current.sample_rate_hz();
    let (lo, hi) = valid_band(n, fs, omega0);
    if let Some(&f) = grid.freqs_hz().iter().find(|&&f| !(f > lo && f < hi)) {
        return Err(SignalError::OutOfBand { freq_hz: f, lo_hz: lo, hi_hz: hi });
    }

    // Zero padding keeps the circular convolution from wrapping around.
    let padded = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(padded);
    let inverse = planner.plan_fft_inverse(padded);
    let transform = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
        buf.resize(padded, Complex64::new(0.0, 0.0));
        forward.process(&mut buf);
        buf
    };
    let spec_i = transform(current.samples());
    let spec_u = transform(voltage.samples());

    let rows: Vec<(Complex64, f64)> = grid
        .freqs_hz()
        .par_iter()
        .map(|&f| {
            let scale = omega0 * fs / (2.0 * PI * f);
            let wavelet: Vec<f64> = (0..padded)
                .map(|k| {
                    if k == 0 || 2 * k > padded {
                        return 0.0;
                    }
                    let x = scale * 2.0 * PI * k as f64 / padded as f64 - omega0;
                    (-0.5 * x * x).exp()
                })
                .collect();
            let filtered = |spec: &[Complex64]| {
                let mut buf: Vec<Complex64> = spec.iter().zip(&wavelet).map(|(s, w)| s * w).collect();
                inverse.process(&mut buf);
                buf.truncate(n);
                buf
            };
            let w_i = filtered(&spec_i);
            let w_u = filtered(&spec_u);
            let edge = (SQRT_2 * scale).ceil() as usize;
            let range = edge..n - edge;

            let mut cross = Complex64::new(0.0, 0.0);
            let mut power = 0.0;
            for t in range.clone() {
                cross += w_u[t] * w_i[t].conj();
                power += w_i[t].norm_sqr();
            }
            if power == 0.0 {
                return Err(SignalError::NoExcitation { freq_hz: f });
            }
            let ratios: Vec<Complex64> =
                range.map(|t| w_u[t] / w_i[t]).filter(|r| r.re.is_finite() && r.im.is_finite()).collect();
            let m = ratios.len() as f64;
            let mean = ratios.iter().sum::<Complex64>() / m;
            let spread = if m > 1.0 {
                (ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok((cross / power, spread))
        })
        .collect::<Result<_, _>>()?;

    let (z, dispersion): (Vec<Complex64>, Vec<f64>) = rows.into_iter().unzip();
    ImpedanceSpectrum::new(grid.freqs_hz().to_vec(), z, Some(dispersion))
}

/// Join spectra estimated on disjoint, increasing frequency ranges.
pub fn concatenate_spectra(parts: &[ImpedanceSpectrum]) -> Result<ImpedanceSpectrum, SignalError> {
    let mut freqs = Vec::new();
    let mut z = Vec::new();
    let mut dispersion = Some(Vec::new());
    for p in parts {
        freqs.extend_from_slice(p.freqs_hz());
        z.extend_from_slice(p.z());
        match (dispersion.as_mut(), p.dispersion()) {
            (Some(d), Some(pd)) => d.extend_from_slice(pd),
            _ => dispersion = None,
        }
    }
    ImpedanceSpectrum::new(freqs, z, dispersion)
}
