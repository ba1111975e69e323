use rand::Rng;
use statrs::function::gamma::digamma;

use super::likelihood::Likelihood;
use super::VbError;
use crate::probdist::{BetaPathwise, Factor, Pathwise, VariationalFamily};
use crate::target::LogTarget;

/// Base draws for S pathwise samples: standard normal for lognormal factors,
/// uniform(0, 1) for beta factors. Row-major, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseNoise {
    dim: usize,
    values: Vec<f64>,
}

impl BaseNoise {
    pub fn draw<R: Rng + ?Sized>(factors: &[Factor], samples: usize, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(samples * factors.len());
        for _ in 0..samples {
            values.extend(factors.iter().map(|f| f.draw_base(rng)));
        }
        Self { dim: factors.len(), values }
    }

    pub fn samples(&self) -> usize {
        self.values.len() / self.dim.max(1)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.dim..(s + 1) * self.dim]
    }
}

/// Monte Carlo ELBO and its gradient with respect to the unconstrained
/// hyperparameters (two per factor, see [`Factor::to_unconstrained`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ElboEstimate {
    pub elbo: f64,
    pub grad: Vec<f64>,
}

/// Estimate `E_q[log p(x, θ) - log q(θ)]` from `samples` pathwise draws.
pub fn elbo_estimate<R: Rng + ?Sized>(
    family: &VariationalFamily,
    likelihood: &Likelihood,
    prior: &VariationalFamily,
    samples: usize,
    rng: &mut R,
) -> Result<ElboEstimate, VbError> {
    if samples == 0 {
        return Err(VbError::Invalid("need at least one Monte Carlo sample".into()));
    }
    let noise = BaseNoise::draw(family.factors(), samples, rng);
    elbo_estimate_with_noise(family, likelihood, prior, &noise)
}

/// Same as [`elbo_estimate`] with the base draws supplied by the caller, so
/// that two evaluations can share random numbers.
pub fn elbo_estimate_with_noise(
    family: &VariationalFamily,
    likelihood: &Likelihood,
    prior: &VariationalFamily,
    noise: &BaseNoise,
) -> Result<ElboEstimate, VbError> {
    likelihood.check_prior(prior)?;
    if family.order() != likelihood.order() {
        return Err(VbError::Invalid("variational family does not match model order".into()));
    }
    elbo_estimate_for_target(likelihood.evaluator(prior), family.factors(), noise)
}

/// ELBO of an arbitrary target under a mean-field product of `factors`.
pub fn elbo_estimate_for_target<T: LogTarget>(
    target: T,
    factors: &[Factor],
    noise: &BaseNoise,
) -> Result<ElboEstimate, VbError> {
    if target.dim() != factors.len() || noise.dim != factors.len() {
        return Err(VbError::Invalid("target, factors and base noise differ in dimension".into()));
    }
    if noise.samples() == 0 {
        return Err(VbError::Invalid("need at least one Monte Carlo sample".into()));
    }
    let mut engine = ElboEngine::new(target);
    let mut grad = vec![0.0; 2 * factors.len()];
    let elbo = engine.estimate(factors, noise, &mut grad)?;
    Ok(ElboEstimate { elbo, grad })
}

enum FactorPath {
    Lognormal,
    Beta {
        sampler: BetaPathwise,
        /// `ψ(a + b) - ψ(a)` and `ψ(a + b) - ψ(b)`.
        digamma_terms: [f64; 2],
    },
}

/// Reusable buffers for repeated ELBO evaluations on one target.
pub(crate) struct ElboEngine<T> {
    target: T,
    theta: Vec<f64>,
    paths: Vec<Pathwise>,
    joint_grad: Vec<f64>,
}

impl<T: LogTarget> ElboEngine<T> {
    pub(crate) fn new(target: T) -> Self {
        let dim = target.dim();
        Self {
            target,
            theta: vec![0.0; dim],
            paths: vec![Pathwise { value: 0.0, d_hyper: [0.0; 2] }; dim],
            joint_grad: vec![0.0; dim],
        }
    }

    /// Writes the averaged gradient into `grad` and returns the ELBO
    /// estimate. A non-finite log joint makes the estimate -∞.
    pub(crate) fn estimate(&mut self, factors: &[Factor], noise: &BaseNoise, grad: &mut [f64]) -> Result<f64, VbError> {
        let paths: Vec<FactorPath> = factors
            .iter()
            .map(|f| match f {
                Factor::Lognormal(_) => FactorPath::Lognormal,
                Factor::Beta(b) => {
                    let common = digamma(b.a() + b.b());
                    FactorPath::Beta {
                        sampler: b.pathwise_sampler(),
                        digamma_terms: [common - digamma(b.a()), common - digamma(b.b())],
                    }
                }
            })
            .collect();
        let jacobians: Vec<[f64; 2]> = factors.iter().map(Factor::hyper_jacobian).collect();

        grad.fill(0.0);
        let samples = noise.samples();
        let mut total = 0.0;
        for s in 0..samples {
            let base = noise.row(s);
            for (i, (f, path)) in factors.iter().zip(&paths).enumerate() {
                self.paths[i] = match (f, path) {
                    (Factor::Lognormal(ln), _) => ln.sample_pathwise(base[i]),
                    (_, FactorPath::Beta { sampler, .. }) => sampler.sample(base[i])?,
                    _ => unreachable!("paths are built from the same factors"),
                };
                self.theta[i] = self.paths[i].value;
            }
            let lj = self.target.log_density_and_grad(&self.theta, &mut self.joint_grad);
            if !lj.is_finite() {
                grad.fill(0.0);
                return Ok(f64::NEG_INFINITY);
            }
            let mut log_q = 0.0;
            for (i, (f, path)) in factors.iter().zip(&paths).enumerate() {
                let x = self.theta[i];
                log_q += f.log_pdf(x);
                let d_explicit = match path {
                    FactorPath::Beta { digamma_terms, .. } => {
                        [x.ln() + digamma_terms[0], (-x).ln_1p() + digamma_terms[1]]
                    }
                    FactorPath::Lognormal => f.d_log_pdf_dhyper(x),
                };
                let along_path = self.joint_grad[i] - f.d_log_pdf_dx(x);
                let p = &self.paths[i];
                for k in 0..2 {
                    grad[2 * i + k] += (along_path * p.d_hyper[k] - d_explicit[k]) * jacobians[i][k];
                }
            }
            total += lj - log_q;
        }
        let inv = 1.0 / samples as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok(total * inv)
    }
}
