use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Current,
    Voltage,
}

/// Uniformly sampled signal, in amperes or volts depending on the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesRecord {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    channel: Channel,
}

impl TimeSeriesRecord {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, channel: Channel) -> Result<Self, SignalError> {
        if samples.len() < 2 {
            return Err(SignalError::Record("a record needs at least two samples".into()));
        }
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(SignalError::Record(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::Record(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate_hz, channel })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn time_s(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate_hz
    }

    /// Same record with every sample multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Result<Self, SignalError> {
        Self::new(self.samples.iter().map(|v| v * gain).collect(), self.sample_rate_hz, self.channel)
    }
}
