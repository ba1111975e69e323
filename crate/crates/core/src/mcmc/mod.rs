//! Adaptive random-walk Metropolis sampler used as a reference posterior.

mod diagnostics;

pub use diagnostics::{diagnostics, Diagnostics};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ecm::Support;
use crate::probdist::VariationalFamily;
use crate::target::LogTarget;
use crate::vb::Likelihood;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("{0}")]
    Invalid(String),
    #[error("log density is not finite at the initial point")]
    InitNotFinite,
    /// The run finished but failed a health check; the draws are kept for
    /// inspection.
    #[error("sampler diagnostics failed: {reason}")]
    Diagnostic { reason: String, run: Box<McmcRun> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_iters: usize,
    /// Fraction of each chain used for adaptation and then discarded.
    pub burn_in: f64,
    pub target_acceptance: f64,
    /// Iterations between refreshes of the per-coordinate proposal scales.
    pub adaptation_window: usize,
    pub n_chains: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self { n_iters: 200_000, burn_in: 0.5, target_acceptance: 0.234, adaptation_window: 500, n_chains: 4, seed: 0 }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: &str| Err(McmcError::Invalid(m.into()));
        if !(self.burn_in > 0.0 && self.burn_in < 1.0) {
            return bad("burn_in must lie in (0, 1)");
        }
        if self.n_chains < 2 {
            return bad("n_chains must be at least 2");
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad("target_acceptance must lie in (0, 1)");
        }
        if self.adaptation_window == 0 {
            return bad("adaptation_window must be at least 1");
        }
        if self.retained() < 4 || self.burn_iters() == 0 {
            return bad("n_iters too small for the burn-in split");
        }
        Ok(())
    }

    pub fn burn_iters(&self) -> usize {
        (self.n_iters as f64 * self.burn_in).round() as usize
    }

    pub fn retained(&self) -> usize {
        self.n_iters - self.burn_iters().min(self.n_iters)
    }
}

/// Map from the sampler's unconstrained coordinate to a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `x = exp(y)`.
    Log,
    /// `x = 1 / (1 + exp(-y))`.
    Logit,
}

impl Transform {
    pub fn for_support(support: Support) -> Self {
        match support {
            Support::Positive => Transform::Log,
            Support::UnitInterval => Transform::Logit,
        }
    }

    pub fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Logit => x.ln() - (-x).ln_1p(),
        }
    }

    pub fn to_constrained(self, y: f64) -> f64 {
        match self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Logit => 1.0 / (1.0 + (-y).exp()),
        }
    }

    /// `ln |dx/dy|`.
    pub fn log_jacobian(self, y: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Log => y,
            Transform::Logit => -softplus(-y) - softplus(y),
        }
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Retained draws of one chain in physical coordinates, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    dim: usize,
    draws: Vec<f64>,
    /// Acceptance rate over the retained segment.
    pub acceptance_rate: f64,
}

impl ChainResult {
    pub fn new(dim: usize, draws: Vec<f64>, acceptance_rate: f64) -> Self {
        assert!(dim > 0 && draws.len().is_multiple_of(dim), "draws must fill whole rows");
        Self { dim, draws, acceptance_rate }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcRun {
    pub chains: Vec<ChainResult>,
    pub diagnostics: Diagnostics,
}

impl McmcRun {
    pub fn mean(&self) -> &[f64] {
        &self.diagnostics.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.diagnostics.variance
    }
}

/// Sample the posterior of `likelihood` under `prior`, starting every
/// chain at the prior means.
pub fn sample(likelihood: &Likelihood, prior: &VariationalFamily, config: &McmcConfig) -> Result<McmcRun, McmcError> {
    if prior.order() != likelihood.order() {
        return Err(McmcError::Invalid("prior does not match model order".into()));
    }
    let layout = prior.layout();
    let transforms: Vec<Transform> = (0..layout.len()).map(|i| Transform::for_support(layout.support(i))).collect();
    sample_target(|| likelihood.evaluator(prior), &transforms, &prior.means(), config)
}

/// Run `config.n_chains` independent chains on the target built by
/// `make_target`, then check acceptance rates and R-hat.
pub fn sample_target<F, T>(
    make_target: F,
    transforms: &[Transform],
    init: &[f64],
    config: &McmcConfig,
) -> Result<McmcRun, McmcError>
where
    F: Fn() -> T + Sync,
    T: LogTarget,
{
    config.validate()?;
    if transforms.len() != init.len() || make_target().dim() != init.len() {
        return Err(McmcError::Invalid("transforms, initial point and target differ in dimension".into()));
    }
    let chains = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(make_target(), transforms, init, config, c as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let diagnostics = diagnostics(&chains)?;
    let run = McmcRun { chains, diagnostics };

    let bad_acceptance = run.chains.iter().map(|c| c.acceptance_rate).find(|&a| !(0.05..=0.7).contains(&a));
    if let Some(a) = bad_acceptance {
        return Err(McmcError::Diagnostic {
            reason: format!("acceptance rate {a:.3} outside [0.05, 0.7]"),
            run: Box::new(run),
        });
    }
    let worst = run.diagnostics.max_r_hat();
    if run.diagnostics.r_hat.iter().any(|r| !(*r <= 1.1)) {
        return Err(McmcError::Diagnostic { reason: format!("R-hat {worst:.4} exceeds 1.1"), run: Box::new(run) });
    }
    Ok(run)
}

fn run_chain<T: LogTarget>(
    mut target: T,
    transforms: &[Transform],
    init: &[f64],
    config: &McmcConfig,
    chain: u64,
) -> Result<ChainResult, McmcError> {
    let dim = init.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain);

    let mut log_post = |y: &[f64], x: &mut [f64]| {
        let mut jac = 0.0;
        for ((xi, &yi), t) in x.iter_mut().zip(y).zip(transforms) {
            *xi = t.to_constrained(yi);
            jac += t.log_jacobian(yi);
        }
        let lp = target.log_density(x) + jac;
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    };

    let mut y: Vec<f64> = init.iter().zip(transforms).map(|(&x, t)| t.to_unconstrained(x)).collect();
    let mut x = vec![0.0; dim];
    let mut lp = log_post(&y, &mut x);
    if !lp.is_finite() {
        return Err(McmcError::InitNotFinite);
    }
    let mut current_x = x.clone();

    let burn = config.burn_iters();
    let window = config.adaptation_window;
    let welford_start = burn / 5;
    let mut log_scale = (2.38 / (dim as f64).sqrt()).ln();
    let mut base = vec![0.1; dim];
    let (mut count, mut mean, mut m2) = (0usize, vec![0.0; dim], vec![0.0; dim]);

    let mut proposal = vec![0.0; dim];
    let mut draws = Vec::with_capacity(config.retained() * dim);
    let mut accepted_after = 0usize;

    for it in 0..config.n_iters {
        let scale = log_scale.exp();
        for ((p, &yi), &b) in proposal.iter_mut().zip(&y).zip(&base) {
            let z: f64 = rng.sample(StandardNormal);
            *p = yi + scale * b * z;
        }
        let lp_new = log_post(&proposal, &mut x);
        let log_alpha = lp_new - lp;
        let u: f64 = rng.random();
        let accept = u.ln() < log_alpha;
        if accept {
            y.copy_from_slice(&proposal);
            current_x.copy_from_slice(&x);
            lp = lp_new;
        }

        if it < burn {
            let gamma = (1.0 + it as f64 / window as f64).powf(-0.6);
            let alpha = if log_alpha >= 0.0 { 1.0 } else { log_alpha.exp() };
            log_scale += gamma * (alpha - config.target_acceptance);
            if it >= welford_start {
                count += 1;
                for j in 0..dim {
                    let d = y[j] - mean[j];
                    mean[j] += d / count as f64;
                    m2[j] += d * (y[j] - mean[j]);
                }
                if count >= 2 * window && (it + 1) % window == 0 {
                    for j in 0..dim {
                        let sd = (m2[j] / (count - 1) as f64).sqrt();
                        if sd > 0.0 && sd.is_finite() {
                            base[j] = sd;
                        }
                    }
                }
            }
        } else {
            accepted_after += accept as usize;
            draws.extend_from_slice(&current_x);
        }
    }
    let retained = config.retained();
    Ok(ChainResult::new(dim, draws, accepted_after as f64 / retained as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecm::{impedance, EcmParams, FrequencyGrid, RqElement};
    use crate::probdist::special::beta_reg;
    use crate::signal::ImpedanceSpectrum;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    struct StdNormal;

    impl LogTarget for StdNormal {
        fn dim(&self) -> usize {
            1
        }

        fn log_density(&mut self, theta: &[f64]) -> f64 {
            -0.5 * theta[0] * theta[0]
        }

        fn log_density_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> f64 {
            grad[0] = -theta[0];
            self.log_density(theta)
        }
    }

    struct PriorOnly<'a>(&'a VariationalFamily);

    impl LogTarget for PriorOnly<'_> {
        fn dim(&self) -> usize {
            self.0.len()
        }

        fn log_density(&mut self, theta: &[f64]) -> f64 {
            self.0.log_density(theta)
        }

        fn log_density_and_grad(&mut self, _: &[f64], _: &mut [f64]) -> f64 {
            unimplemented!("sampling only")
        }
    }

    #[test]
    fn transforms_round_trip_with_correct_jacobian() {
        for (t, x) in [(Transform::Log, 2.7), (Transform::Logit, 0.83), (Transform::Identity, -1.2)] {
            let y = t.to_unconstrained(x);
            assert!((t.to_constrained(y) - x).abs() < 1e-14);
            let h = 1e-6;
            let fd = (t.to_constrained(y + h) - t.to_constrained(y - h)) / (2.0 * h);
            assert!((t.log_jacobian(y) - fd.ln()).abs() < 1e-8);
        }
        assert!(Transform::Logit.log_jacobian(800.0).is_finite());
    }

    #[test]
    fn standard_normal_target() {
        let config = McmcConfig { n_iters: 100_000, seed: 4, ..McmcConfig::default() };
        let run = sample_target(|| StdNormal, &[Transform::Identity], &[0.0], &config).unwrap();
        assert!(run.mean()[0].abs() < 0.02, "{}", run.mean()[0]);
        assert!((0.95..=1.05).contains(&run.variance()[0]), "{}", run.variance()[0]);
        assert!(run.diagnostics.r_hat[0] < 1.01);
    }

    #[test]
    fn prior_only_target_reproduces_prior_moments() {
        let prior = VariationalFamily::from_moments(
            1,
            &[(0.6, 0.0144), (1.2, 0.0576), (0.3, 0.0036), (0.8, 0.01), (0.05, 0.0001)],
        )
        .unwrap();
        let layout = prior.layout();
        let transforms: Vec<Transform> = (0..layout.len()).map(|i| Transform::for_support(layout.support(i))).collect();
        let config = McmcConfig { n_iters: 200_000, seed: 1, ..McmcConfig::default() };
        let run = sample_target(|| PriorOnly(&prior), &transforms, &prior.means(), &config).unwrap();
        for (j, (m, v)) in prior.means().iter().zip(prior.variances()).enumerate() {
            assert!((run.mean()[j] / m - 1.0).abs() < 0.02, "mean {j}: {} vs {m}", run.mean()[j]);
            assert!((run.variance()[j] / v - 1.0).abs() < 0.02, "var {j}: {} vs {v}", run.variance()[j]);
        }
    }

    #[test]
    fn long_run_histogram_matches_beta_target() {
        struct BetaTarget;
        impl LogTarget for BetaTarget {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&mut self, t: &[f64]) -> f64 {
                t[0].ln() + 4.0 * (-t[0]).ln_1p()
            }
            fn log_density_and_grad(&mut self, _: &[f64], _: &mut [f64]) -> f64 {
                unimplemented!("sampling only")
            }
        }
        let config = McmcConfig { n_iters: 400_000, n_chains: 2, seed: 9, ..McmcConfig::default() };
        let run = sample_target(|| BetaTarget, &[Transform::Logit], &[0.3], &config).unwrap();
        // Thin to roughly independent draws before the chi-square test.
        let thin = (20.0 * config.retained() as f64 / run.diagnostics.ess[0]).ceil() as usize;
        let draws: Vec<f64> = run.chains.iter().flat_map(|c| c.column(0).into_iter().step_by(thin)).collect();
        let bins = 20;
        let mut counts = vec![0.0; bins];
        for d in &draws {
            counts[((d * bins as f64) as usize).min(bins - 1)] += 1.0;
        }
        let n = draws.len() as f64;
        let mut stat = 0.0;
        for (k, c) in counts.iter().enumerate() {
            let p = beta_reg(2.0, 5.0, (k + 1) as f64 / bins as f64).unwrap()
                - beta_reg(2.0, 5.0, k as f64 / bins as f64).unwrap();
            stat += (c - n * p).powi(2) / (n * p);
        }
        let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        assert!(p_value > 0.01, "chi-square {stat}, p {p_value}, n {n}");
    }

    fn one_rq_likelihood() -> Likelihood {
        let truth = EcmParams::new(0.5, vec![RqElement::new(1.0, 0.2, 0.85).unwrap()], 0.0, 0.01).unwrap();
        let grid = FrequencyGrid::log_spaced(0.01, 1000.0, 4).unwrap();
        let z = impedance(&truth, &grid)
            .iter()
            .enumerate()
            .map(|(i, z)| z + num_complex::Complex64::new(0.01 * (2.1 * i as f64).sin(), 0.01 * (1.7 * i as f64).cos()))
            .collect();
        Likelihood::new(ImpedanceSpectrum::from_grid(&grid, z).unwrap(), 1, 0.0).unwrap()
    }

    #[test]
    fn seeded_chains_are_reproducible_and_in_support() {
        let lik = one_rq_likelihood();
        let prior =
            VariationalFamily::from_moments(1, &[(0.6, 0.1), (1.2, 0.3), (0.3, 0.02), (0.8, 0.01), (0.05, 0.001)])
                .unwrap();
        let config = McmcConfig { n_iters: 20_000, n_chains: 2, seed: 3, ..McmcConfig::default() };
        let a = sample(&lik, &prior, &config).unwrap();
        let b = sample(&lik, &prior, &config).unwrap();
        assert_eq!(a, b);
        for c in &a.chains {
            for row in c.rows() {
                assert!(crate::ecm::EcmParams::from_slice(row, 0.0).is_ok());
            }
        }
    }

    #[test]
    fn failing_acceptance_is_reported_with_the_run() {
        let config = McmcConfig { n_iters: 2_000, target_acceptance: 0.95, seed: 1, ..McmcConfig::default() };
        match sample_target(|| StdNormal, &[Transform::Identity], &[0.0], &config) {
            Err(McmcError::Diagnostic { run, .. }) => assert_eq!(run.chains.len(), 4),
            other => panic!("expected a diagnostic failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config_and_init() {
        assert!(McmcConfig { burn_in: 1.0, ..McmcConfig::default() }.validate().is_err());
        assert!(McmcConfig { n_chains: 1, ..McmcConfig::default() }.validate().is_err());
        let config = McmcConfig { n_iters: 100, ..McmcConfig::default() };
        assert!(matches!(
            sample_target(|| StdNormal, &[Transform::Log], &[-1.0], &config),
            Err(McmcError::InitNotFinite)
        ));
    }
}
