use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::timeseries::{Channel, TimeSeriesRecord};
use super::SignalError;
use crate::ecm::{EcmParams, ImpedanceModel};

const PHASE_STREAM: u64 = 0;
const CURRENT_NOISE_STREAM: u64 = 1;
const VOLTAGE_NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Excitation {
    /// Equal-amplitude tones on a logarithmic grid starting at `f_min_hz`,
    /// each snapped to the nearest record bin, with random phases.
    Multisine { f_min_hz: f64, f_max_hz: f64, tones_per_decade: f64 },
    /// Random two-level sequence that may switch every `1 / clock_hz` s.
    Drbs { clock_hz: f64 },
}

/// One galvanostatic record: the excitation drives the current and the
/// circuit response gives the voltage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub params: EcmParams,
    pub excitation: Excitation,
    /// Peak deviation of the excitation current from `dc_offset_a`.
    pub amplitude_a: f64,
    #[serde(default)]
    pub dc_offset_a: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    #[serde(default)]
    pub current_noise_sd: f64,
    #[serde(default)]
    pub voltage_noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    /// Seed for the noise streams only. Repeated measurements of one
    /// excitation share `seed` and differ here. Defaults to `seed`.
    #[serde(default)]
    pub noise_seed: Option<u64>,
}

/// Output of [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub current: TimeSeriesRecord,
    pub voltage: TimeSeriesRecord,
    /// Tone frequencies for a multisine; empty for broadband excitation.
    pub excited_freqs_hz: Vec<f64>,
}

impl SimulationConfig {
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |msg: String| Err(SignalError::Config(msg));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be positive".into());
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) || self.n_samples() < 2 {
            return bad("record must hold at least two samples".into());
        }
        if !(self.amplitude_a > 0.0 && self.amplitude_a.is_finite()) || !self.dc_offset_a.is_finite() {
            return bad("amplitude_a must be positive and dc_offset_a finite".into());
        }
        if !(self.current_noise_sd >= 0.0 && self.voltage_noise_sd >= 0.0)
            || !(self.current_noise_sd.is_finite() && self.voltage_noise_sd.is_finite())
        {
            return bad("noise standard deviations must be non-negative".into());
        }
        let nyquist = self.sample_rate_hz / 2.0;
        let lowest = 1.0 / self.duration_s;
        match self.excitation {
            Excitation::Multisine { f_min_hz, f_max_hz, tones_per_decade } => {
                if !(tones_per_decade > 0.0 && tones_per_decade.is_finite()) {
                    return bad("tones_per_decade must be positive".into());
                }
                if !(f_min_hz >= lowest * (1.0 - 1e-9) && f_max_hz < nyquist && f_min_hz <= f_max_hz) {
                    return bad(format!(
                        "multisine band [{f_min_hz}, {f_max_hz}] Hz must lie within [{lowest}, {nyquist}) Hz"
                    ));
                }
            }
            Excitation::Drbs { clock_hz } => {
                if !(clock_hz > lowest && clock_hz <= self.sample_rate_hz) {
                    return bad(format!("DRBS clock must lie in ({lowest}, {}] Hz", self.sample_rate_hz));
                }
            }
        }
        Ok(())
    }

    /// Bin indices of the multisine tones in a record of `n` samples.
    fn tone_bins(&self, n: usize) -> Vec<usize> {
        let Excitation::Multisine { f_min_hz, f_max_hz, tones_per_decade } = self.excitation else {
            return Vec::new();
        };
        let bin_hz = self.sample_rate_hz / n as f64;
        let count = ((f_max_hz / f_min_hz).log10() * tones_per_decade + 1e-9).floor() as usize + 1;
        let mut bins: Vec<usize> = (0..count)
            .map(|j| (f_min_hz * 10f64.powf(j as f64 / tones_per_decade) / bin_hz).round() as usize)
            .filter(|&k| k >= 1 && 2 * k < n)
            .collect();
        bins.dedup();
        bins
    }
}

/// Simulate one record. The voltage is obtained by multiplying the
/// discrete spectrum of the (periodic) excitation current with Z at each
/// bin; independent Gaussian noise is then added to each channel.
pub fn simulate(config: &SimulationConfig) -> Result<Simulation, SignalError> {
    config.validate()?;
    let n = config.n_samples();
    let fs = config.sample_rate_hz;
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut phase_rng = ChaCha8Rng::seed_from_u64(config.seed);
    phase_rng.set_stream(PHASE_STREAM);
    let bins = config.tone_bins(n);
    let mut excitation: Vec<f64> = match config.excitation {
        Excitation::Multisine { .. } => {
            let mut spec = vec![Complex64::new(0.0, 0.0); n];
            for &k in &bins {
                let phase = 2.0 * PI * phase_rng.random::<f64>();
                spec[k] = Complex64::from_polar(1.0, phase);
                spec[n - k] = spec[k].conj();
            }
            inverse.process(&mut spec);
            spec.into_iter().map(|c| c.re).collect()
        }
        Excitation::Drbs { clock_hz } => {
            let hold = ((fs / clock_hz).round() as usize).max(1);
            let mut level = 1.0;
            (0..n)
                .map(|i| {
                    if i % hold == 0 {
                        level = if phase_rng.random::<bool>() { 1.0 } else { -1.0 };
                    }
                    level
                })
                .collect()
        }
    };
    let peak = excitation.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(SignalError::Config("excitation has no tones inside the record".into()));
    }
    for v in excitation.iter_mut() {
        *v = config.dc_offset_a + config.amplitude_a * *v / peak;
    }

    let half = n / 2;
    let omega: Vec<f64> = (0..=half).map(|k| 2.0 * PI * k as f64 * fs / n as f64).collect();
    let model = ImpedanceModel::from_angular(config.params.order(), config.params.inductance(), omega);
    let mut z = vec![Complex64::new(0.0, 0.0); half + 1];
    model.eval(&config.params.to_vec(), &mut z);

    let mut spec: Vec<Complex64> = excitation.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward.process(&mut spec);
    for k in 0..=half {
        spec[k] *= z[k];
        if k > 0 && k < n - k {
            spec[n - k] = spec[k].conj();
        }
    }
    inverse.process(&mut spec);
    let scale = 1.0 / n as f64;
    let mut voltage: Vec<f64> = spec.iter().map(|c| c.re * scale).collect();

    let noise_seed = config.noise_seed.unwrap_or(config.seed);
    add_noise(&mut excitation, config.current_noise_sd, noise_seed, CURRENT_NOISE_STREAM);
    add_noise(&mut voltage, config.voltage_noise_sd, noise_seed, VOLTAGE_NOISE_STREAM);
    Ok(Simulation {
        current: TimeSeriesRecord::new(excitation, fs, Channel::Current)?,
        voltage: TimeSeriesRecord::new(voltage, fs, Channel::Voltage)?,
        excited_freqs_hz: bins.iter().map(|&k| k as f64 * fs / n as f64).collect(),
    })
}

fn add_noise(samples: &mut [f64], sd: f64, seed: u64, stream: u64) {
    if sd == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    for v in samples.iter_mut() {
        *v += sd * rng.sample::<f64, _>(StandardNormal);
    }
}

/// A wide-band measurement split into several multisine records, one per
/// band of `decades_per_band` decades. Each record lasts `periods` periods of
/// its lowest tone and is sampled at `oversampling` times its highest tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub params: EcmParams,
    #[serde(default = "defaults::f_min")]
    pub f_min_hz: f64,
    #[serde(default = "defaults::f_max")]
    pub f_max_hz: f64,
    #[serde(default = "defaults::decades_per_band")]
    pub decades_per_band: f64,
    #[serde(default = "defaults::tones_per_decade")]
    pub tones_per_decade: f64,
    #[serde(default = "defaults::periods")]
    pub periods: f64,
    #[serde(default = "defaults::oversampling")]
    pub oversampling: f64,
    #[serde(default = "defaults::amplitude")]
    pub amplitude_a: f64,
    #[serde(default)]
    pub dc_offset_a: f64,
    #[serde(default)]
    pub current_noise_sd: f64,
    #[serde(default)]
    pub voltage_noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise_seed: Option<u64>,
}

mod defaults {
    pub fn f_min() -> f64 {
        1e-4
    }
    pub fn f_max() -> f64 {
        1e4
    }
    pub fn decades_per_band() -> f64 {
        2.0
    }
    pub fn tones_per_decade() -> f64 {
        4.0
    }
    pub fn periods() -> f64 {
        40.0
    }
    pub fn oversampling() -> f64 {
        10.0
    }
    pub fn amplitude() -> f64 {
        1.0
    }
}

/// Noise levels (current sd in A, voltage sd in V) of the three reference
/// measurements: noise-free, moderate and heavy.
pub const REFERENCE_NOISE_LEVELS: [(f64, f64); 3] = [(0.0, 0.0), (5e-5, 1e-3), (0.05, 0.05)];

impl SweepConfig {
    pub fn new(params: EcmParams, current_noise_sd: f64, voltage_noise_sd: f64, seed: u64) -> Self {
        Self {
            params,
            f_min_hz: defaults::f_min(),
            f_max_hz: defaults::f_max(),
            decades_per_band: defaults::decades_per_band(),
            tones_per_decade: defaults::tones_per_decade(),
            periods: defaults::periods(),
            oversampling: defaults::oversampling(),
            amplitude_a: defaults::amplitude(),
            dc_offset_a: 0.0,
            current_noise_sd,
            voltage_noise_sd,
            seed,
            noise_seed: None,
        }
    }

    /// Reference circuit at one of the [`REFERENCE_NOISE_LEVELS`]
    /// (`measurement` is 1, 2 or 3).
    pub fn reference(measurement: usize, seed: u64) -> Result<Self, SignalError> {
        let (current, voltage) = *REFERENCE_NOISE_LEVELS.get(measurement.wrapping_sub(1)).ok_or_else(|| {
            SignalError::Config(format!("reference measurement must be 1, 2 or 3, got {measurement}"))
        })?;
        Ok(Self::new(EcmParams::reference_three_rq(0.01), current, voltage, seed))
    }

    fn validate(&self) -> Result<(), SignalError> {
        let positive = [self.f_min_hz, self.f_max_hz, self.decades_per_band, self.tones_per_decade, self.periods];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.f_max_hz < self.f_min_hz {
            return Err(SignalError::Config("sweep band, spacing and periods must be positive".into()));
        }
        if !(self.periods >= 1.0 && self.oversampling > 2.0) {
            return Err(SignalError::Config("need periods >= 1 and oversampling > 2".into()));
        }
        Ok(())
    }

    /// One record configuration per band.
    pub fn bands(&self) -> Result<Vec<SimulationConfig>, SignalError> {
        self.validate()?;
        let tpd = self.tones_per_decade;
        let last = ((self.f_max_hz / self.f_min_hz).log10() * tpd + 1e-9).floor() as usize;
        let per_band = ((self.decades_per_band * tpd).round() as usize).max(1);
        let tone = |j: usize| self.f_min_hz * 10f64.powf(j as f64 / tpd);
        let mut out = Vec::new();
        let mut first = 0;
        let mut band = 0u64;
        while first <= last {
            // A lone tone left over at the top joins the previous band.
            let mut top = (first + per_band - 1).min(last);
            if last - top == 1 {
                top = last;
            }
            let (lo, hi) = (tone(first), tone(top));
            let duration_s = self.periods / lo;
            // Whole number of samples, so that bins fall on multiples of 1/duration.
            let n = (self.oversampling * hi * duration_s).round();
            out.push(SimulationConfig {
                params: self.params.clone(),
                excitation: Excitation::Multisine { f_min_hz: lo, f_max_hz: hi, tones_per_decade: tpd },
                amplitude_a: self.amplitude_a,
                dc_offset_a: self.dc_offset_a,
                duration_s,
                sample_rate_hz: n / duration_s,
                current_noise_sd: self.current_noise_sd,
                voltage_noise_sd: self.voltage_noise_sd,
                seed: mix(self.seed, band),
                noise_seed: self.noise_seed.map(|s| mix(s, band)),
            });
            first = top + 1;
            band += 1;
        }
        Ok(out)
    }
}

fn mix(seed: u64, band: u64) -> u64 {
    seed.wrapping_add(band.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Simulate every band of a sweep.
pub fn simulate_sweep(config: &SweepConfig) -> Result<Vec<Simulation>, SignalError> {
    config.bands()?.iter().map(simulate).collect()
}
