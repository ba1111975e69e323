use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{Pathwise, ProbError};

/// Lognormal distribution: `ln x ~ Normal(mu_ln, sigma_ln²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLognormal", into = "RawLognormal")]
pub struct LognormalFactor {
    mu_ln: f64,
    sigma_ln: f64,
}

#[derive(Serialize, Deserialize)]
struct RawLognormal {
    mu_ln: f64,
    sigma_ln: f64,
}

impl TryFrom<RawLognormal> for LognormalFactor {
    type Error = ProbError;

    fn try_from(raw: RawLognormal) -> Result<Self, ProbError> {
        Self::new(raw.mu_ln, raw.sigma_ln)
    }
}

impl From<LognormalFactor> for RawLognormal {
    fn from(f: LognormalFactor) -> Self {
        RawLognormal { mu_ln: f.mu_ln, sigma_ln: f.sigma_ln }
    }
}

impl LognormalFactor {
    pub fn new(mu_ln: f64, sigma_ln: f64) -> Result<Self, ProbError> {
        if !mu_ln.is_finite() || !(sigma_ln > 0.0 && sigma_ln.is_finite()) {
            return Err(ProbError::InvalidParameters(format!(
                "lognormal needs finite mu_ln and sigma_ln > 0, got ({mu_ln}, {sigma_ln})"
            )));
        }
        Ok(Self { mu_ln, sigma_ln })
    }

    /// Moment matching: `σ² = ln(1 + v/m²)`, `μ = ln(m² / √(v + m²))`.
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self, ProbError> {
        if !(mean > 0.0 && variance > 0.0 && mean.is_finite() && variance.is_finite()) {
            return Err(ProbError::InvalidMoments { mean, variance });
        }
        let s2 = (variance / (mean * mean)).ln_1p();
        Self::new(mean.ln() - 0.5 * s2, s2.sqrt())
    }

    pub fn mu_ln(&self) -> f64 {
        self.mu_ln
    }

    pub fn sigma_ln(&self) -> f64 {
        self.sigma_ln
    }

    pub fn mean(&self) -> f64 {
        (self.mu_ln + 0.5 * self.sigma_ln * self.sigma_ln).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sigma_ln * self.sigma_ln;
        s2.exp_m1() * (2.0 * self.mu_ln + s2).exp()
    }

    pub fn median(&self) -> f64 {
        self.mu_ln.exp()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = (x.ln() - self.mu_ln) / self.sigma_ln;
        -x.ln() - self.sigma_ln.ln() - 0.5 * (2.0 * PI).ln() - 0.5 * z * z
    }

    /// `∂ log p / ∂x`.
    pub fn d_log_pdf_dx(&self, x: f64) -> f64 {
        let s2 = self.sigma_ln * self.sigma_ln;
        -(1.0 + (x.ln() - self.mu_ln) / s2) / x
    }

    /// `∂ log p / ∂(mu_ln, sigma_ln)` at fixed x.
    pub fn d_log_pdf_dhyper(&self, x: f64) -> [f64; 2] {
        let d = x.ln() - self.mu_ln;
        let s = self.sigma_ln;
        [d / (s * s), -1.0 / s + d * d / (s * s * s)]
    }

    /// `x = exp(μ + σ ε)` with `∂x/∂μ = x`, `∂x/∂σ = x ε`.
    pub fn sample_pathwise(&self, eps: f64) -> Pathwise {
        let x = (self.mu_ln + self.sigma_ln * eps).exp();
        Pathwise { value: x, d_hyper: [x, x * eps] }
    }

    /// Inverse CDF for quantile reporting.
    pub fn quantile(&self, p: f64) -> f64 {
        let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
        (self.mu_ln + self.sigma_ln * z).exp()
    }
}
