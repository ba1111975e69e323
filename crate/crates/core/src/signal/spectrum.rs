use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SignalError;
use crate::ecm::FrequencyGrid;

/// Measured or simulated impedance at a set of frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSpectrum {
    freqs_hz: Vec<f64>,
    z: Vec<Complex64>,
    /// Per-point spread of the estimate, in ohm.
    dispersion: Option<Vec<f64>>,
}

impl ImpedanceSpectrum {
    pub fn new(freqs_hz: Vec<f64>, z: Vec<Complex64>, dispersion: Option<Vec<f64>>) -> Result<Self, SignalError> {
        if freqs_hz.len() != z.len() || dispersion.as_ref().is_some_and(|d| d.len() != z.len()) {
            return Err(SignalError::Spectrum("frequency, impedance and dispersion lengths differ".into()));
        }
        if freqs_hz.is_empty() {
            return Err(SignalError::Spectrum("spectrum is empty".into()));
        }
        if freqs_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) || freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SignalError::Spectrum("frequencies must be positive and strictly increasing".into()));
        }
        if z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(SignalError::Spectrum("impedance values must be finite".into()));
        }
        Ok(Self { freqs_hz, z, dispersion })
    }

    pub fn from_grid(grid: &FrequencyGrid, z: Vec<Complex64>) -> Result<Self, SignalError> {
        Self::new(grid.freqs_hz().to_vec(), z, None)
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn z(&self) -> &[Complex64] {
        &self.z
    }

    pub fn dispersion(&self) -> Option<&[f64]> {
        self.dispersion.as_deref()
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid::new(self.freqs_hz.clone()).expect("validated on construction")
    }

    /// Root-mean-square of |Z_a - Z_b| over the shared grid.
    pub fn rms_distance(&self, other: &ImpedanceSpectrum) -> Result<f64, SignalError> {
        if self.freqs_hz != other.freqs_hz {
            return Err(SignalError::GridMismatch);
        }
        Ok(rms_distance(&self.z, &other.z))
    }
}

pub fn rms_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (ss / a.len() as f64).sqrt()
}

/// Pointwise complex mean of spectra on a common grid; dispersion is the
/// pointwise standard deviation of |Z - mean|.
pub fn average_spectra(spectra: &[ImpedanceSpectrum]) -> Result<ImpedanceSpectrum, SignalError> {
    let first = spectra.first().ok_or(SignalError::Spectrum("nothing to average".into()))?;
    if spectra.iter().any(|s| s.freqs_hz != first.freqs_hz) {
        return Err(SignalError::GridMismatch);
    }
    let n = spectra.len() as f64;
    let k = first.len();
    let mean: Vec<Complex64> =
        (0..k).map(|i| first.z[i] + spectra.iter().map(|s| s.z[i] - first.z[i]).sum::<Complex64>() / n).collect();
    let dispersion = (0..k)
        .map(|i| {
            if spectra.len() < 2 {
                0.0
            } else {
                let ss: f64 = spectra.iter().map(|s| (s.z[i] - mean[i]).norm_sqr()).sum();
                (ss / (n - 1.0)).sqrt()
            }
        })
        .collect();
    ImpedanceSpectrum::new(first.freqs_hz.clone(), mean, Some(dispersion))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(z: &[(f64, f64)]) -> ImpedanceSpectrum {
        ImpedanceSpectrum::new(
            (1..=z.len()).map(|i| i as f64).collect(),
            z.iter().map(|&(r, i)| Complex64::new(r, i)).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn identical_spectra_average_to_themselves() {
        let s = spec(&[(1.0, -0.5), (2.0, -0.1), (3.0, 0.0)]);
        let avg = average_spectra(&vec![s.clone(); 10]).unwrap();
        assert_eq!(avg.z(), s.z());
        assert!(avg.dispersion().unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn two_spectra_average_pointwise() {
        let a = spec(&[(1.0, -1.0), (2.0, 0.0)]);
        let b = spec(&[(3.0, 1.0), (0.0, -2.0)]);
        let avg = average_spectra(&[a, b]).unwrap();
        assert_eq!(avg.z(), &[Complex64::new(2.0, 0.0), Complex64::new(1.0, -1.0)]);
    }

    #[test]
    fn averaging_is_permutation_invariant() {
        let a = spec(&[(1.0, -1.0), (2.0, 0.5)]);
        let b = spec(&[(3.0, 1.0), (0.0, -2.0)]);
        let c = spec(&[(0.3, 0.7), (1.1, -0.2)]);
        let x = average_spectra(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let y = average_spectra(&[c, a, b]).unwrap();
        for (p, q) in x.z().iter().zip(y.z()) {
            assert!((p - q).norm() < 1e-15);
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = spec(&[(1.0, 0.0), (2.0, 0.0)]);
        let b = ImpedanceSpectrum::new(vec![1.0, 3.0], a.z().to_vec(), None).unwrap();
        assert!(matches!(average_spectra(&[a, b]), Err(SignalError::GridMismatch)));
        assert!(average_spectra(&[]).is_err());
    }

    #[test]
    fn construction_validates() {
        assert!(ImpedanceSpectrum::new(vec![2.0, 1.0], vec![Complex64::new(0.0, 0.0); 2], None).is_err());
        assert!(ImpedanceSpectrum::new(vec![1.0], vec![Complex64::new(f64::NAN, 0.0)], None).is_err());
        assert!(ImpedanceSpectrum::new(vec![1.0], vec![Complex64::new(0.0, 0.0)], Some(vec![])).is_err());
    }
}
