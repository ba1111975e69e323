use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use super::special::{beta_reg_inv, beta_reg_with_ln_beta, ln_beta};
use super::{Pathwise, ProbError};

/// Beta distribution on (0, 1). Caches `ln B(a, b)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(try_from = "RawBeta", into = "RawBeta")]
pub struct BetaFactor {
    a: f64,
    b: f64,
    ln_b: f64,
}

impl PartialEq for BetaFactor {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b
    }
}

#[derive(Serialize, Deserialize)]
struct RawBeta {
    a: f64,
    b: f64,
}

impl TryFrom<RawBeta> for BetaFactor {
    type Error = ProbError;

    fn try_from(raw: RawBeta) -> Result<Self, ProbError> {
        Self::new(raw.a, raw.b)
    }
}

impl From<BetaFactor> for RawBeta {
    fn from(f: BetaFactor) -> Self {
        RawBeta { a: f.a, b: f.b }
    }
}

/// Relative step for the finite-difference CDF sensitivities.
const CDF_FD_STEP: f64 = 1e-5;

impl BetaFactor {
    pub fn new(a: f64, b: f64) -> Result<Self, ProbError> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(ProbError::InvalidParameters(format!("beta needs a, b > 0, got ({a}, {b})")));
        }
        Ok(Self { a, b, ln_b: ln_beta(a, b) })
    }

    /// Moment matching: with `c = m(1 - m)/v - 1`, `a = m c` and `b = (1 - m) c`.
    pub fn from_moments(mean: f64, variance: f64) -> Result<Self, ProbError> {
        if !(mean > 0.0 && mean < 1.0 && variance > 0.0 && variance < mean * (1.0 - mean)) {
            return Err(ProbError::InvalidMoments { mean, variance });
        }
        let c = mean * (1.0 - mean) / variance - 1.0;
        Self::new(mean * c, (1.0 - mean) * c)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return f64::NEG_INFINITY;
        }
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - self.ln_b
    }

    pub fn d_log_pdf_dx(&self, x: f64) -> f64 {
        (self.a - 1.0) / x - (self.b - 1.0) / (1.0 - x)
    }

    /// `∂ log p / ∂(a, b)` at fixed x.
    pub fn d_log_pdf_dhyper(&self, x: f64) -> [f64; 2] {
        let common = digamma(self.a + self.b);
        [x.ln() - digamma(self.a) + common, (-x).ln_1p() - digamma(self.b) + common]
    }

    pub fn cdf(&self, x: f64) -> f64 {
        beta_reg_with_ln_beta(self.a, self.b, x, self.ln_b).unwrap_or(f64::NAN)
    }

    pub fn quantile(&self, u: f64) -> Result<f64, ProbError> {
        beta_reg_inv(self.a, self.b, u, self.ln_b).ok_or(ProbError::InversionFailed { a: self.a, b: self.b, u })
    }

    /// Reusable state for repeated pathwise draws at fixed (a, b).
    pub fn pathwise_sampler(&self) -> BetaPathwise {
        let ha = CDF_FD_STEP * self.a;
        let hb = CDF_FD_STEP * self.b;
        BetaPathwise {
            factor: *self,
            ha,
            hb,
            ln_b_shift: [
                ln_beta(self.a + ha, self.b),
                ln_beta(self.a - ha, self.b),
                ln_beta(self.a, self.b + hb),
                ln_beta(self.a, self.b - hb),
            ],
        }
    }

    /// `x = F⁻¹(u; a, b)` with hyperparameter sensitivities by implicit
    /// differentiation of `F(x; a, b) = u`.
    pub fn sample_pathwise(&self, u: f64) -> Result<Pathwise, ProbError> {
        self.pathwise_sampler().sample(u)
    }
}

#[derive(Debug, Clone)]
pub struct BetaPathwise {
    factor: BetaFactor,
    ha: f64,
    hb: f64,
    ln_b_shift: [f64; 4],
}

impl BetaPathwise {
    pub fn sample(&self, u: f64) -> Result<Pathwise, ProbError> {
        let BetaFactor { a, b, .. } = self.factor;
        let x = self.factor.quantile(u)?;
        let fail = || ProbError::InversionFailed { a, b, u };
        let cdf = |a: f64, b: f64, ln_b: f64| beta_reg_with_ln_beta(a, b, x, ln_b).ok_or_else(fail);
        let dfa =
            (cdf(a + self.ha, b, self.ln_b_shift[0])? - cdf(a - self.ha, b, self.ln_b_shift[1])?) / (2.0 * self.ha);
        let dfb =
            (cdf(a, b + self.hb, self.ln_b_shift[2])? - cdf(a, b - self.hb, self.ln_b_shift[3])?) / (2.0 * self.hb);
        let pdf = self.factor.log_pdf(x).exp();
        if !(pdf > 0.0 && pdf.is_finite()) {
            // Clamped to the support edge: the value no longer moves with (a, b).
            return Ok(Pathwise { value: x, d_hyper: [0.0, 0.0] });
        }
        Ok(Pathwise { value: x, d_hyper: [-dfa / pdf, -dfb / pdf] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn twelve_three_from_moments() {
        let f = BetaFactor::from_moments(0.8, 0.01).unwrap();
        assert!((f.a() - 12.0).abs() < 1e-12);
        assert!((f.b() - 3.0).abs() < 1e-12);
        assert!((f.mean() - 0.8).abs() < 1e-15);
        assert!((f.variance() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn validity_bound_is_rejected() {
        assert!(BetaFactor::from_moments(0.5, 0.25).is_err());
        assert!(BetaFactor::from_moments(0.5, 0.3).is_err());
        assert!(BetaFactor::from_moments(1.0, 0.01).is_err());
        assert!(BetaFactor::from_moments(0.0, 0.01).is_err());
        let tight = BetaFactor::from_moments(0.5, 1e-8).unwrap();
        assert_eq!(tight.a(), tight.b());
        assert!(tight.a() > 1e6);
    }

    #[test]
    fn uniform_density_and_path() {
        let f = BetaFactor::new(1.0, 1.0).unwrap();
        for &x in &[0.01, 0.3, 0.99] {
            assert!(f.log_pdf(x).abs() < 1e-15);
        }
        assert_eq!(f.log_pdf(1.0), f64::NEG_INFINITY);
        let p = f.sample_pathwise(0.25).unwrap();
        assert!((p.value - 0.25).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let f = BetaFactor::new(13.91, 5.68).unwrap();
        let n = 100_000;
        // Midpoint rule; the density vanishes at both ends.
        let h = 1.0 / n as f64;
        let total: f64 = (0..n).map(|i| f.log_pdf((i as f64 + 0.5) * h).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        assert!(f.log_pdf(0.71).is_finite());
    }

    #[test]
    fn sensitivities_match_inverse_cdf_differences() {
        let f = BetaFactor::new(12.0, 3.0).unwrap();
        let p = f.sample_pathwise(0.5).unwrap();
        let h = 1e-4;
        let qa = |a: f64| BetaFactor::new(a, 3.0).unwrap().quantile(0.5).unwrap();
        let qb = |b: f64| BetaFactor::new(12.0, b).unwrap().quantile(0.5).unwrap();
        let fd_a = (qa(12.0 + h) - qa(12.0 - h)) / (2.0 * h);
        let fd_b = (qb(3.0 + h) - qb(3.0 - h)) / (2.0 * h);
        assert!(((p.d_hyper[0] - fd_a) / fd_a).abs() < 1e-3, "{} vs {fd_a}", p.d_hyper[0]);
        assert!(((p.d_hyper[1] - fd_b) / fd_b).abs() < 1e-3, "{} vs {fd_b}", p.d_hyper[1]);
        assert!(p.d_hyper[0] > 0.0 && p.d_hyper[1] < 0.0);
    }

    #[test]
    fn hyper_gradient_matches_finite_differences() {
        let f = BetaFactor::new(4.0, 2.5).unwrap();
        let x = 0.6;
        let h = 1e-6;
        let g = f.d_log_pdf_dhyper(x);
        let fd_a = (BetaFactor::new(4.0 + h, 2.5).unwrap().log_pdf(x)
            - BetaFactor::new(4.0 - h, 2.5).unwrap().log_pdf(x))
            / (2.0 * h);
        let fd_b = (BetaFactor::new(4.0, 2.5 + h).unwrap().log_pdf(x)
            - BetaFactor::new(4.0, 2.5 - h).unwrap().log_pdf(x))
            / (2.0 * h);
        assert!((g[0] - fd_a).abs() < 1e-7);
        assert!((g[1] - fd_b).abs() < 1e-7);
        let fd_x = (f.log_pdf(x + h) - f.log_pdf(x - h)) / (2.0 * h);
        assert!((f.d_log_pdf_dx(x) - fd_x).abs() < 1e-7);
    }

    #[test]
    fn inverse_cdf_draws_reproduce_moments() {
        let f = BetaFactor::from_moments(0.71, 0.0105).unwrap();
        let sampler = f.pathwise_sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = sampler.sample(rng.random::<f64>()).unwrap().value;
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean / 0.71 - 1.0).abs() < 0.01, "mean {mean}");
        assert!((var / 0.0105 - 1.0).abs() < 0.01, "var {var}");
    }

    proptest! {
        #[test]
        fn moment_round_trip(a in 0.2f64..500.0, b in 0.2f64..500.0) {
            let f = BetaFactor::new(a, b).unwrap();
            let back = BetaFactor::from_moments(f.mean(), f.variance()).unwrap();
            prop_assert!((back.a() / a - 1.0).abs() < 1e-10);
            prop_assert!((back.b() / b - 1.0).abs() < 1e-10);
        }
    }
}
