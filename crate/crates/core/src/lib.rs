//! Bayesian estimation of fractional-order equivalent circuit models from
//! impedance spectra.
//!
//! The pipeline runs from simulated current/voltage records
//! ([`signal::simulate_sweep`]) through wavelet-based impedance estimation
//! ([`signal::estimate_impedance_cwt`]) to a mean-field variational
//! posterior ([`vb::fit`]), with an adaptive Metropolis sampler
//! ([`mcmc::sample`]) as the reference.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ecm;
pub mod mcmc;
pub mod probdist;
pub mod signal;
pub mod target;
pub mod vb;

pub use ecm::{impedance, EcmError, EcmParams, FrequencyGrid, ParamLayout, RqElement, Support};
pub use mcmc::{McmcConfig, McmcError, McmcRun};
pub use probdist::{Factor, ProbError, VariationalFamily};
pub use signal::{ImpedanceSpectrum, SignalError, Simulation, SimulationConfig, SweepConfig, TimeSeriesRecord};
pub use target::LogTarget;
pub use vb::{Likelihood, PosteriorReport, VbConfig, VbError};
