//! Stochastic variational Bayes for the equivalent-circuit model.

mod adam;
mod bands;
mod elbo;
mod fit;
mod likelihood;

pub use adam::Adam;
pub use bands::{extract_bands, BandConfig, CredibleBands};
pub use elbo::{elbo_estimate, elbo_estimate_for_target, elbo_estimate_with_noise, BaseNoise, ElboEstimate};
pub use fit::{fit, monotonicity_violations, PosteriorReport, StopReason};
pub use likelihood::{log_joint, Likelihood, LogJoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probdist::ProbError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VbError {
    #[error("{0}")]
    Invalid(String),
    #[error("spectrum has {points} points, the model needs at least {needed}")]
    TooFewPoints { points: usize, needed: usize },
    #[error("ELBO became non-finite at iteration {iteration}")]
    NonFiniteElbo { iteration: usize },
    #[error(transparent)]
    Prob(#[from] ProbError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VbConfig {
    pub learning_rate: f64,
    /// If set to τ, the step size at iteration t is
    /// `learning_rate / sqrt(1 + t / τ)`; unset keeps it constant.
    pub lr_decay_iters: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Use the learning rate as the ADAM denominator guard.
    pub paper_epsilon: bool,
    pub mc_samples: usize,
    pub min_iters: usize,
    pub max_iters: usize,
    pub convergence_window: usize,
    pub convergence_rel_change: f64,
    /// Report the average of the unconstrained hyperparameters over the
    /// final window instead of the last iterate.
    pub average_final_window: bool,
    /// Independent runs from seeds `seed, seed + 1, …`; the one with the
    /// highest mean ELBO over its final window is kept.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for VbConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            lr_decay_iters: None,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            paper_epsilon: false,
            mc_samples: 8,
            min_iters: 8000,
            max_iters: 35000,
            convergence_window: 1000,
            convergence_rel_change: 0.01,
            average_final_window: true,
            restarts: 1,
            seed: 0,
        }
    }
}

impl VbConfig {
    /// Defaults for measured spectra (smaller learning rate).
    pub fn measured() -> Self {
        Self { learning_rate: 0.005, ..Self::default() }
    }

    pub fn effective_epsilon(&self) -> f64 {
        if self.paper_epsilon {
            self.learning_rate
        } else {
            self.adam_epsilon
        }
    }

    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        match self.lr_decay_iters {
            Some(tau) => self.learning_rate / (1.0 + iteration as f64 / tau as f64).sqrt(),
            None => self.learning_rate,
        }
    }

    pub fn validate(&self) -> Result<(), VbError> {
        let bad = |msg: &str| Err(VbError::Invalid(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.lr_decay_iters == Some(0) {
            return bad("lr_decay_iters must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam_epsilon must be positive");
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.convergence_window == 0 {
            return bad("convergence_window must be at least 1");
        }
        if self.min_iters > self.max_iters {
            return bad("min_iters must not exceed max_iters");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.convergence_rel_change > 0.0 && self.convergence_rel_change < 1.0) {
            return bad("convergence_rel_change must lie in (0, 1)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        VbConfig::default().validate().unwrap();
        assert_eq!(VbConfig::measured().learning_rate, 0.005);
    }

    #[test]
    fn paper_epsilon_uses_learning_rate() {
        let c = VbConfig { paper_epsilon: true, ..VbConfig::default() };
        assert_eq!(c.effective_epsilon(), 0.05);
        assert_eq!(VbConfig::default().effective_epsilon(), 1e-8);
    }

    #[test]
    fn learning_rate_decay() {
        let c = VbConfig { lr_decay_iters: Some(100), ..VbConfig::default() };
        assert_eq!(c.learning_rate_at(0), 0.05);
        assert!((c.learning_rate_at(300) - 0.025).abs() < 1e-15);
        assert_eq!(VbConfig::default().learning_rate_at(10_000), 0.05);
        assert!(VbConfig { lr_decay_iters: Some(0), ..c }.validate().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        for c in [
            VbConfig { min_iters: 10, max_iters: 5, ..VbConfig::default() },
            VbConfig { convergence_rel_change: 1.0, ..VbConfig::default() },
            VbConfig { mc_samples: 0, ..VbConfig::default() },
            VbConfig { restarts: 0, ..VbConfig::default() },
            VbConfig { beta1: 1.0, ..VbConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: VbConfig = serde_json::from_str(r#"{"learning_rate": 0.01, "seed": 3}"#).unwrap();
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.min_iters, 8000);
        assert!(serde_json::from_str::<VbConfig>(r#"{"lr": 0.01}"#).is_err());
    }
}
