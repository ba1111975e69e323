use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{ChainResult, McmcError};

/// Per-parameter convergence summary over several chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Split R-hat. NaN when every chain half is constant.
    pub r_hat: Vec<f64>,
    pub ess: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Parameters whose draws have zero within-chain variance.
    pub degenerate: Vec<bool>,
}

impl Diagnostics {
    pub fn max_r_hat(&self) -> f64 {
        self.r_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Split R-hat, effective sample size and pooled moments per parameter.
pub fn diagnostics(chains: &[ChainResult]) -> Result<Diagnostics, McmcError> {
    if chains.len() < 2 {
        return Err(McmcError::Invalid("diagnostics need at least two chains".into()));
    }
    let n = chains[0].len();
    let dim = chains[0].dim();
    if chains.iter().any(|c| c.len() != n || c.dim() != dim) {
        return Err(McmcError::Invalid("chains differ in length or dimension".into()));
    }
    if n < 4 {
        return Err(McmcError::Invalid("chains need at least four draws".into()));
    }
    let mut out = Diagnostics {
        r_hat: Vec::with_capacity(dim),
        ess: Vec::with_capacity(dim),
        mean: Vec::with_capacity(dim),
        variance: Vec::with_capacity(dim),
        degenerate: Vec::with_capacity(dim),
    };
    let half = n / 2;
    let fft_len = (2 * half).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(fft_len);
    let ifft = planner.plan_fft_inverse(fft_len);
    for j in 0..dim {
        let columns: Vec<Vec<f64>> = chains.iter().map(|c| c.column(j)).collect();
        let pooled: Vec<f64> = columns.iter().flatten().copied().collect();
        let (mean, variance) = mean_var(&pooled);
        out.mean.push(mean);
        out.variance.push(variance);

        let halves: Vec<&[f64]> = columns.iter().flat_map(|c| [&c[..half], &c[n - half..]]).collect();
        let (r_hat, ess) = split_rhat_ess(&halves, &fft, &ifft, fft_len);
        out.degenerate.push(r_hat.is_nan());
        out.r_hat.push(r_hat);
        out.ess.push(ess);
    }
    Ok(out)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Autocovariance at all lags (biased, divided by n) via zero-padded FFT.
fn autocovariance(x: &[f64], fft: &Arc<dyn Fft<f64>>, ifft: &Arc<dyn Fft<f64>>, len: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = x.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    fft.process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    ifft.process(&mut buf);
    buf[..n].iter().map(|v| v.re / (len as f64 * n as f64)).collect()
}

/// Split-chain R-hat and multi-chain ESS with Geyer's initial monotone
/// sequence truncation.
fn split_rhat_ess(chains: &[&[f64]], fft: &Arc<dyn Fft<f64>>, ifft: &Arc<dyn Fft<f64>>, len: usize) -> (f64, f64) {
    let m = chains.len() as f64;
    let n = chains[0].len();
    let nf = n as f64;
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(c)).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = nf * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m - 1.0);
    if !(w > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    let r_hat = (var_plus / w).sqrt();

    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c, fft, ifft, len)).collect();
    let mean_acov = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m;
    // Chain variances use n - 1; the autocovariances use n.
    let rho = |t: usize| 1.0 - (w - mean_acov(t) * nf / (nf - 1.0)) / var_plus;

    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let total = m * nf;
    let ess = total / tau.max(1.0 / total.log10());
    (r_hat, ess)
}
