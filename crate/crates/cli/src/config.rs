//! Per-command configuration files. Every field has a default, so an empty
//! JSON object (or no `--config` at all) is a valid configuration.

use std::path::Path;

use eis_bayes::mcmc::McmcConfig;
use eis_bayes::probdist::VariationalFamily;
use eis_bayes::signal::{CwtConfig, SimulationConfig, SweepConfig};
use eis_bayes::vb::{BandConfig, VbConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::read_json;

/// Load `path`, or the defaults when no file is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}

/// Circuit structure and prior shared by both fitting commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of RQ elements.
    pub order: usize,
    /// Fixed series inductance in henry.
    pub inductance_h: f64,
    /// Prior (mean, variance) per parameter in `[R_s, R_1, Q_1, α_1, …, σ_n]`
    /// order. May be omitted for a three-element model, which then uses the
    /// reference prior.
    pub prior: Option<Vec<(f64, f64)>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { order: 3, inductance_h: 100e-9, prior: None }
    }
}

impl ModelConfig {
    pub fn prior_family(&self) -> Result<VariationalFamily, CliError> {
        match &self.prior {
            Some(moments) => Ok(VariationalFamily::from_moments(self.order, moments)?),
            None if self.order == 3 => Ok(VariationalFamily::reference_three_rq_prior()),
            None => {
                Err(CliError::Validation(format!("a model with {} elements needs explicit prior moments", self.order)))
            }
        }
    }

    /// Check that the prior can be built.
    pub fn resolved(&self) -> Result<Self, CliError> {
        self.prior_family()?;
        Ok(self.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulateConfig {
    /// Multi-band multisine sweep.
    Sweep(SweepConfig),
    /// A single record with explicit excitation.
    Record(SimulationConfig),
    /// Reference circuit at noise level 1, 2 or 3.
    Reference {
        measurement: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig::Reference { measurement: 2, seed: 0 }
    }
}

impl SimulateConfig {
    /// Expand presets and apply a seed override.
    pub fn resolved(&self, seed: Option<u64>) -> Result<Self, CliError> {
        let mut out = match self {
            SimulateConfig::Reference { measurement, seed } => {
                SimulateConfig::Sweep(SweepConfig::reference(*measurement, *seed)?)
            }
            other => other.clone(),
        };
        if let Some(s) = seed {
            match &mut out {
                SimulateConfig::Sweep(c) => c.seed = s,
                SimulateConfig::Record(c) => c.seed = s,
                SimulateConfig::Reference { .. } => unreachable!("presets are expanded above"),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    /// The tone frequencies recorded in each sidecar, or the default grid
    /// for records without tones.
    Excited,
    /// Log-spaced grid over each record's valid band.
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub cwt: CwtConfig,
    pub grid: GridChoice,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { cwt: CwtConfig::default(), grid: GridChoice::Excited }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Start from the prior.
    Prior,
    /// Start at the prior means with this relative standard deviation.
    Narrowed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitVbConfig {
    pub model: ModelConfig,
    pub vb: VbConfig,
    pub init: InitSpec,
    pub bands: BandConfig,
}

impl Default for FitVbConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            vb: VbConfig::default(),
            init: InitSpec::Prior,
            bands: BandConfig::default(),
        }
    }
}

impl FitVbConfig {
    pub fn resolved(&self, seed: Option<u64>, paper_epsilon: bool) -> Result<Self, CliError> {
        let mut out = Self { model: self.model.resolved()?, ..self.clone() };
        if let Some(s) = seed {
            out.vb.seed = s;
            out.bands.seed = s;
        }
        out.vb.paper_epsilon |= paper_epsilon;
        out.vb.validate()?;
        Ok(out)
    }

    pub fn init_family(&self, prior: &VariationalFamily) -> Result<VariationalFamily, CliError> {
        match self.init {
            InitSpec::Prior => Ok(prior.clone()),
            InitSpec::Narrowed(rel_sd) => Ok(prior.narrowed(rel_sd)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitMcmcConfig {
    pub model: ModelConfig,
    pub mcmc: McmcConfig,
    /// Keep every `thin`-th retained draw in the chains file. Diagnostics
    /// always use all draws.
    pub thin: usize,
}

impl Default for FitMcmcConfig {
    fn default() -> Self {
        Self { model: ModelConfig::default(), mcmc: McmcConfig::default(), thin: 10 }
    }
}

impl FitMcmcConfig {
    pub fn resolved(&self, seed: Option<u64>) -> Result<Self, CliError> {
        let mut out = Self { model: self.model.resolved()?, ..self.clone() };
        if let Some(s) = seed {
            out.mcmc.seed = s;
        }
        if out.thin == 0 {
            return Err(CliError::Validation("thin must be at least 1".into()));
        }
        out.mcmc.validate()?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c: FitVbConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, FitVbConfig::default());
        let c: FitMcmcConfig = serde_json::from_str(r#"{"mcmc": {"n_iters": 1000}}"#).unwrap();
        assert_eq!(c.mcmc.n_iters, 1000);
        assert_eq!(c.mcmc.n_chains, 4);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<FitVbConfig>(r#"{"vb": {"lr": 1}}"#).is_err());
        assert!(serde_json::from_str::<EstimateConfig>(r#"{"omega": 6}"#).is_err());
    }

    #[test]
    fn init_and_simulate_forms_parse() {
        let c: FitVbConfig = serde_json::from_str(r#"{"init": {"narrowed": 0.01}}"#).unwrap();
        assert_eq!(c.init, InitSpec::Narrowed(0.01));
        let c: FitVbConfig = serde_json::from_str(r#"{"init": "prior"}"#).unwrap();
        assert_eq!(c.init, InitSpec::Prior);
        let s: SimulateConfig = serde_json::from_str(r#"{"reference": {"measurement": 3}}"#).unwrap();
        match s.resolved(Some(9)).unwrap() {
            SimulateConfig::Sweep(c) => {
                assert_eq!(c.seed, 9);
                assert_eq!(c.current_noise_sd, 0.05);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn prior_resolution() {
        let m = ModelConfig::default().resolved().unwrap();
        assert_eq!(m.prior_family().unwrap(), VariationalFamily::reference_three_rq_prior());
        let explicit = ModelConfig {
            prior: Some(vec![(1.0, 0.1), (1.0, 0.1), (1.0, 0.1), (0.8, 0.01), (0.05, 0.01)]),
            order: 1,
            ..m
        };
        assert_eq!(explicit.prior_family().unwrap().len(), 5);
        let one = ModelConfig { order: 1, ..ModelConfig::default() };
        assert!(one.prior_family().is_err());
    }

    #[test]
    fn overrides_apply() {
        let c = FitVbConfig::default().resolved(Some(5), true).unwrap();
        assert_eq!((c.vb.seed, c.bands.seed), (5, 5));
        assert!(c.vb.paper_epsilon);
        let bad = FitVbConfig { vb: VbConfig { mc_samples: 0, ..VbConfig::default() }, ..FitVbConfig::default() };
        assert!(bad.resolved(None, false).is_err());
    }
}
