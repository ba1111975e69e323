use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::bands::CredibleBands;
use super::elbo::{BaseNoise, ElboEngine};
use super::likelihood::Likelihood;
use super::{VbConfig, VbError};
use crate::probdist::VariationalFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

/// Outcome of [`fit`]. Traces hold one entry per iteration, recorded at the
/// hyperparameters the ELBO was evaluated at.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub family: VariationalFamily,
    pub elbo_trace: Vec<f64>,
    /// Per-iteration factor means, one row per iteration.
    pub mean_trace: Vec<Vec<f64>>,
    /// Per-iteration factor standard deviations.
    pub sd_trace: Vec<Vec<f64>>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// Index of the kept run when several restarts were made.
    pub restart: usize,
    /// Mean ELBO over the final window of each restart.
    pub restart_scores: Vec<f64>,
    pub bands: Option<CredibleBands>,
    #[serde(skip)]
    pub duration: Duration,
}

impl PosteriorReport {
    pub fn means(&self) -> Vec<f64> {
        self.family.means()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.family.variances()
    }

    /// Negative ELBO, the quantity usually plotted as the loss.
    pub fn loss_trace(&self) -> Vec<f64> {
        self.elbo_trace.iter().map(|e| -e).collect()
    }

    fn final_score(&self, window: usize) -> f64 {
        let tail = &self.elbo_trace[self.elbo_trace.len().saturating_sub(window)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// Maximize the ELBO with ADAM from `init`.
///
/// After `min_iters`, the run stops once the mean ELBO over the last
/// `convergence_window` iterations differs from the mean over the window
/// before it by less than `convergence_rel_change` (relative). With
/// `restarts > 1` the runs proceed in parallel and the best is returned.
pub fn fit(
    likelihood: &Likelihood,
    prior: &VariationalFamily,
    init: &VariationalFamily,
    config: &VbConfig,
) -> Result<PosteriorReport, VbError> {
    config.validate()?;
    likelihood.check_prior(prior)?;
    if init.order() != likelihood.order() {
        return Err(VbError::Invalid("initial family does not match model order".into()));
    }
    let start = Instant::now();
    let runs: Vec<PosteriorReport> = (0..config.restarts)
        .into_par_iter()
        .map(|k| fit_once(likelihood, prior, init, config, config.seed.wrapping_add(k as u64)))
        .collect::<Result<_, _>>()?;
    let scores: Vec<f64> = runs.iter().map(|r| r.final_score(config.convergence_window)).collect();
    let best = (0..scores.len()).fold(0, |b, k| if scores[k] > scores[b] { k } else { b });
    let mut report = runs.into_iter().nth(best).expect("at least one run");
    report.restart = best;
    report.restart_scores = scores;
    report.duration = start.elapsed();
    Ok(report)
}

fn fit_once(
    likelihood: &Likelihood,
    prior: &VariationalFamily,
    init: &VariationalFamily,
    config: &VbConfig,
    seed: u64,
) -> Result<PosteriorReport, VbError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut engine = ElboEngine::new(likelihood.evaluator(prior));
    let mut adam = Adam::from_config(init.n_hyper(), config);
    let mut family = init.clone();
    let mut u = family.to_unconstrained();
    let mut grad = vec![0.0; u.len()];
    let window = config.convergence_window;

    let mut elbo_trace = Vec::new();
    let mut mean_trace = Vec::new();
    let mut sd_trace = Vec::new();
    let mut prefix = vec![0.0];
    let mut recent: VecDeque<Vec<f64>> = VecDeque::with_capacity(window + 1);
    let mut stop_reason = StopReason::MaxIters;

    for t in 1..=config.max_iters {
        let noise = BaseNoise::draw(family.factors(), config.mc_samples, &mut rng);
        let elbo = engine.estimate(family.factors(), &noise, &mut grad)?;
        if !elbo.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(VbError::NonFiniteElbo { iteration: t });
        }
        elbo_trace.push(elbo);
        prefix.push(prefix[t - 1] + elbo);
        mean_trace.push(family.means());
        sd_trace.push(family.variances().into_iter().map(f64::sqrt).collect());

        grad.iter_mut().for_each(|g| *g = -*g);
        adam.set_learning_rate(config.learning_rate_at(t));
        adam.step(&mut u, &grad);
        family = family.with_unconstrained(&u).map_err(|_| VbError::NonFiniteElbo { iteration: t })?;
        if recent.len() == window {
            recent.pop_front();
        }
        recent.push_back(u.clone());

        if t >= config.min_iters + window && t >= 2 * window {
            let last = (prefix[t] - prefix[t - window]) / window as f64;
            let previous = (prefix[t - window] - prefix[t - 2 * window]) / window as f64;
            if ((last - previous) / previous).abs() < config.convergence_rel_change {
                stop_reason = StopReason::Converged;
                break;
            }
        }
    }

    if config.average_final_window && !recent.is_empty() {
        let n = recent.len() as f64;
        let mut avg = vec![0.0; u.len()];
        for row in &recent {
            for (a, x) in avg.iter_mut().zip(row) {
                *a += x / n;
            }
        }
        family = family.with_unconstrained(&avg)?;
    }

    Ok(PosteriorReport {
        family,
        iterations: elbo_trace.len(),
        elbo_trace,
        mean_trace,
        sd_trace,
        stop_reason,
        restart: 0,
        restart_scores: Vec::new(),
        bands: None,
        duration: Duration::ZERO,
    })
}

/// Share of consecutive non-overlapping `window`-length ELBO means that
/// drop by more than three standard errors of their difference. Returns
/// `(violations, pairs)`.
pub fn monotonicity_violations(trace: &[f64], window: usize) -> (usize, usize) {
    let stats: Vec<(f64, f64)> = trace
        .chunks_exact(window.max(2))
        .map(|c| {
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var / n)
        })
        .collect();
    let pairs = stats.len().saturating_sub(1);
    let violations = stats.windows(2).filter(|w| w[1].0 < w[0].0 - 3.0 * (w[0].1 + w[1].1).sqrt()).count();
    (violations, pairs)
}
