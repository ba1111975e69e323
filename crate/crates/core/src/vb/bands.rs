use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::VbError;
use crate::ecm::{FrequencyGrid, ImpedanceModel};
use crate::probdist::VariationalFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub n_samples: usize,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub seed: u64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self { n_samples: 1000, lower_quantile: 0.025, upper_quantile: 0.975, seed: 0 }
    }
}

/// Posterior predictive bands. Real and imaginary parts are bounded
/// separately, so `lower[k].re` and `lower[k].im` can come from different
/// draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBands {
    pub freqs_hz: Vec<f64>,
    /// Impedance at the posterior means.
    pub mean_curve: Vec<Complex64>,
    pub lower: Vec<Complex64>,
    pub upper: Vec<Complex64>,
}

impl CredibleBands {
    /// Share of points at which `curve` lies inside the band on both axes.
    pub fn coverage(&self, curve: &[Complex64]) -> f64 {
        let inside = curve
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(z, (lo, hi))| z.re >= lo.re && z.re <= hi.re && z.im >= lo.im && z.im <= hi.im)
            .count();
        inside as f64 / curve.len() as f64
    }
}

/// Draw parameter vectors from `family`, evaluate the model on `grid` and
/// take per-frequency quantiles.
pub fn extract_bands(
    family: &VariationalFamily,
    inductance: f64,
    grid: &FrequencyGrid,
    config: &BandConfig,
) -> Result<CredibleBands, VbError> {
    let (lo_q, hi_q) = (config.lower_quantile, config.upper_quantile);
    if config.n_samples == 0 || !(0.0..=1.0).contains(&lo_q) || !(0.0..=1.0).contains(&hi_q) || lo_q > hi_q {
        return Err(VbError::Invalid("band config needs samples and 0 ≤ lower ≤ upper ≤ 1".into()));
    }
    let model = ImpedanceModel::new(family.order(), inductance, grid);
    let k = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut re = vec![Vec::with_capacity(config.n_samples); k];
    let mut im = vec![Vec::with_capacity(config.n_samples); k];
    let mut z = vec![Complex64::new(0.0, 0.0); k];
    for _ in 0..config.n_samples {
        let theta = family.sample(&mut rng)?;
        model.eval(&theta, &mut z);
        for (i, v) in z.iter().enumerate() {
            re[i].push(v.re);
            im[i].push(v.im);
        }
    }
    let mut mean_curve = vec![Complex64::new(0.0, 0.0); k];
    model.eval(&family.means(), &mut mean_curve);
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    for i in 0..k {
        re[i].sort_by(f64::total_cmp);
        im[i].sort_by(f64::total_cmp);
        lower.push(Complex64::new(quantile_sorted(&re[i], lo_q), quantile_sorted(&im[i], lo_q)));
        upper.push(Complex64::new(quantile_sorted(&re[i], hi_q), quantile_sorted(&im[i], hi_q)));
    }
    Ok(CredibleBands { freqs_hz: grid.freqs_hz().to_vec(), mean_curve, lower, upper })
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}
