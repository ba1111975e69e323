//! Lognormal and Beta primitives for priors, variational factors and
//! posterior reporting, plus the mean-field family built from them.

mod beta;
mod lognormal;
pub mod special;

pub use beta::{BetaFactor, BetaPathwise};
pub use lognormal::LognormalFactor;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecm::{ParamLayout, Support};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbError {
    #[error("no distribution matches mean {mean} and variance {variance}")]
    InvalidMoments { mean: f64, variance: f64 },
    #[error("{0}")]
    InvalidParameters(String),
    #[error("inverse CDF of Beta({a}, {b}) did not converge at u = {u}")]
    InversionFailed { a: f64, b: f64, u: f64 },
    #[error("family has {got} factors, model needs {expected}")]
    FactorCount { got: usize, expected: usize },
    #[error("parameter {name} needs a {expected} factor")]
    WrongKind { name: String, expected: &'static str },
}

/// A reparameterized draw and its derivatives with respect to the factor's
/// two natural hyperparameters: (mu_ln, sigma_ln) or (a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pathwise {
    pub value: f64,
    pub d_hyper: [f64; 2],
}

/// One mean-field factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    Lognormal(LognormalFactor),
    Beta(BetaFactor),
}

impl Factor {
    pub fn lognormal(mu_ln: f64, sigma_ln: f64) -> Result<Self, ProbError> {
        LognormalFactor::new(mu_ln, sigma_ln).map(Factor::Lognormal)
    }

    pub fn beta(a: f64, b: f64) -> Result<Self, ProbError> {
        BetaFactor::new(a, b).map(Factor::Beta)
    }

    /// Moment-matched factor of the kind suited to `support`.
    pub fn from_moments(support: Support, mean: f64, variance: f64) -> Result<Self, ProbError> {
        match support {
            Support::Positive => LognormalFactor::from_moments(mean, variance).map(Factor::Lognormal),
            Support::UnitInterval => BetaFactor::from_moments(mean, variance).map(Factor::Beta),
        }
    }

    pub fn support(&self) -> Support {
        match self {
            Factor::Lognormal(_) => Support::Positive,
            Factor::Beta(_) => Support::UnitInterval,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Factor::Lognormal(_) => "lognormal",
            Factor::Beta(_) => "beta",
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Factor::Lognormal(f) => f.mean(),
            Factor::Beta(f) => f.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Factor::Lognormal(f) => f.variance(),
            Factor::Beta(f) => f.variance(),
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match self {
            Factor::Lognormal(f) => f.log_pdf(x),
            Factor::Beta(f) => f.log_pdf(x),
        }
    }

    pub fn d_log_pdf_dx(&self, x: f64) -> f64 {
        match self {
            Factor::Lognormal(f) => f.d_log_pdf_dx(x),
            Factor::Beta(f) => f.d_log_pdf_dx(x),
        }
    }

    pub fn d_log_pdf_dhyper(&self, x: f64) -> [f64; 2] {
        match self {
            Factor::Lognormal(f) => f.d_log_pdf_dhyper(x),
            Factor::Beta(f) => f.d_log_pdf_dhyper(x),
        }
    }

    /// Natural hyperparameters: (mu_ln, sigma_ln) or (a, b).
    pub fn hyper(&self) -> [f64; 2] {
        match self {
            Factor::Lognormal(f) => [f.mu_ln(), f.sigma_ln()],
            Factor::Beta(f) => [f.a(), f.b()],
        }
    }

    /// Unconstrained coordinates used by the optimizer: (mu_ln, ln sigma_ln)
    /// or (ln a, ln b).
    pub fn to_unconstrained(&self) -> [f64; 2] {
        match self {
            Factor::Lognormal(f) => [f.mu_ln(), f.sigma_ln().ln()],
            Factor::Beta(f) => [f.a().ln(), f.b().ln()],
        }
    }

    pub fn with_unconstrained(&self, u: [f64; 2]) -> Result<Self, ProbError> {
        match self {
            Factor::Lognormal(_) => Factor::lognormal(u[0], u[1].exp()),
            Factor::Beta(_) => Factor::beta(u[0].exp(), u[1].exp()),
        }
    }

    /// `∂(natural hyperparameter) / ∂(unconstrained coordinate)`, elementwise.
    pub fn hyper_jacobian(&self) -> [f64; 2] {
        match self {
            Factor::Lognormal(f) => [1.0, f.sigma_ln()],
            Factor::Beta(f) => [f.a(), f.b()],
        }
    }

    /// Base noise for [`Factor::sample_pathwise`]: standard normal for lognormal,
    /// uniform(0, 1) for beta.
    pub fn draw_base<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Factor::Lognormal(_) => rng.sample(StandardNormal),
            Factor::Beta(_) => rng.random::<f64>(),
        }
    }

    pub fn sample_pathwise(&self, base: f64) -> Result<Pathwise, ProbError> {
        match self {
            Factor::Lognormal(f) => Ok(f.sample_pathwise(base)),
            Factor::Beta(f) => f.sample_pathwise(base),
        }
    }

    /// Plain draw. Beta factors use a direct sampler, which stays valid for
    /// near-degenerate shapes where inverse-CDF iteration is slow.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, ProbError> {
        match self {
            Factor::Lognormal(f) => Ok(f.sample_pathwise(rng.sample(StandardNormal)).value),
            Factor::Beta(f) => {
                let dist =
                    rand_distr::Beta::new(f.a(), f.b()).map_err(|e| ProbError::InvalidParameters(e.to_string()))?;
                Ok(rng.sample(dist).clamp(special::UNIT_CLAMP, 1.0 - special::UNIT_CLAMP))
            }
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, ProbError> {
        match self {
            Factor::Lognormal(f) => Ok(f.quantile(p)),
            Factor::Beta(f) => f.quantile(p),
        }
    }
}

/// Mean-field family over the free parameters of an order-N circuit, one
/// factor per parameter in [`ParamLayout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct VariationalFamily {
    order: usize,
    factors: Vec<Factor>,
}

#[derive(Serialize, Deserialize)]
struct NamedFactor {
    name: String,
    #[serde(flatten)]
    factor: Factor,
}

#[derive(Serialize, Deserialize)]
struct RawFamily {
    order: usize,
    factors: Vec<NamedFactor>,
}

impl TryFrom<RawFamily> for VariationalFamily {
    type Error = ProbError;

    fn try_from(raw: RawFamily) -> Result<Self, ProbError> {
        let layout = ParamLayout::new(raw.order);
        for (i, nf) in raw.factors.iter().enumerate() {
            if i < layout.len() && nf.name != layout.name(i) {
                return Err(ProbError::InvalidParameters(format!(
                    "factor {i} is named {}, expected {}",
                    nf.name,
                    layout.name(i)
                )));
            }
        }
        Self::new(raw.order, raw.factors.into_iter().map(|nf| nf.factor).collect())
    }
}

impl From<VariationalFamily> for RawFamily {
    fn from(f: VariationalFamily) -> Self {
        let layout = f.layout();
        RawFamily {
            order: f.order,
            factors: f
                .factors
                .into_iter()
                .enumerate()
                .map(|(i, factor)| NamedFactor { name: layout.name(i), factor })
                .collect(),
        }
    }
}

/// Prior moments for the noise scale used when none are configured.
pub const DEFAULT_NOISE_PRIOR_MOMENTS: (f64, f64) = (0.05, 0.01);

impl VariationalFamily {
    pub fn new(order: usize, factors: Vec<Factor>) -> Result<Self, ProbError> {
        let layout = ParamLayout::new(order);
        if order == 0 || factors.len() != layout.len() {
            return Err(ProbError::FactorCount { got: factors.len(), expected: layout.len() });
        }
        for (i, f) in factors.iter().enumerate() {
            if f.support() != layout.support(i) {
                return Err(ProbError::WrongKind {
                    name: layout.name(i),
                    expected: match layout.support(i) {
                        Support::Positive => "lognormal",
                        Support::UnitInterval => "beta",
                    },
                });
            }
        }
        Ok(Self { order, factors })
    }

    /// Build from (mean, variance) pairs in layout order.
    pub fn from_moments(order: usize, moments: &[(f64, f64)]) -> Result<Self, ProbError> {
        let layout = ParamLayout::new(order);
        if moments.len() != layout.len() {
            return Err(ProbError::FactorCount { got: moments.len(), expected: layout.len() });
        }
        let factors = moments
            .iter()
            .enumerate()
            .map(|(i, &(m, v))| Factor::from_moments(layout.support(i), m, v))
            .collect::<Result<_, _>>()?;
        Self::new(order, factors)
    }

    /// Priors for the three-element reference circuit. The moments reproduce
    /// Lognormal(0.84, 0.39) for R_s, Lognormal(1.59, 0.20) for R_i,
    /// Lognormal(-0.35, 0.83), (1.96, 0.83), (4.99, 0.55) for Q_1..3 and
    /// Beta(13.91, 5.68) for every α_i.
    pub fn reference_three_rq_prior() -> Self {
        let alpha = (0.71, 0.01);
        let r = (5.0, 1.0);
        Self::from_moments(
            3,
            &[
                (2.5, 1.0),
                r,
                (1.0, 1.0),
                alpha,
                r,
                (10.0, 100.0),
                alpha,
                r,
                (170.0, 10_000.0),
                alpha,
                DEFAULT_NOISE_PRIOR_MOMENTS,
            ],
        )
        .expect("reference moments are valid")
    }

    /// Same means, standard deviations shrunk to `rel_sd` times each mean.
    /// A common starting point for optimization.
    pub fn narrowed(&self, rel_sd: f64) -> Result<Self, ProbError> {
        let moments: Vec<(f64, f64)> = self.means().iter().map(|&m| (m, (rel_sd * m).powi(2))).collect();
        Self::from_moments(self.order, &moments)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.order)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// Number of optimizer coordinates (two per factor).
    pub fn n_hyper(&self) -> usize {
        2 * self.factors.len()
    }

    pub fn means(&self) -> Vec<f64> {
        self.factors.iter().map(Factor::mean).collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.factors.iter().map(Factor::variance).collect()
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        self.factors.iter().zip(theta).map(|(f, &x)| f.log_pdf(x)).sum()
    }

    pub fn to_unconstrained(&self) -> Vec<f64> {
        self.factors.iter().flat_map(|f| f.to_unconstrained()).collect()
    }

    pub fn with_unconstrained(&self, u: &[f64]) -> Result<Self, ProbError> {
        if u.len() != self.n_hyper() {
            return Err(ProbError::FactorCount { got: u.len() / 2, expected: self.factors.len() });
        }
        let factors = self
            .factors
            .iter()
            .zip(u.chunks_exact(2))
            .map(|(f, c)| f.with_unconstrained([c[0], c[1]]))
            .collect::<Result<_, _>>()?;
        Ok(Self { order: self.order, factors })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>, ProbError> {
        self.factors.iter().map(|f| f.sample(rng)).collect()
    }
}
