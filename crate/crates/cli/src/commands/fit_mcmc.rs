use std::path::Path;

use eis_bayes::mcmc::{sample, McmcRun};
use eis_bayes::vb::Likelihood;
use eis_bayes::McmcError;
use serde::{Deserialize, Serialize};

use super::display;
use crate::args::GlobalArgs;
use crate::config::{load, FitMcmcConfig};
use crate::error::CliError;
use crate::io::{create_dir, fmt_f64, read_spectrum, write_csv, write_json, SCHEMA_VERSION};

pub const DIAGNOSTICS: &str = "diagnostics.json";

/// Contents of `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFile {
    pub schema_version: u32,
    pub command: String,
    pub config: FitMcmcConfig,
    pub spectrum: String,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub r_hat: Vec<f64>,
    pub ess: Vec<f64>,
    pub acceptance_rates: Vec<f64>,
    pub passed: bool,
    pub failure: Option<String>,
}

pub fn run(args: &GlobalArgs, spectrum_path: &Path) -> Result<(), CliError> {
    let config = load::<FitMcmcConfig>(args.config.as_deref())?.resolved(args.seed)?;
    let spectrum = read_spectrum(spectrum_path)?;
    let likelihood = Likelihood::new(spectrum, config.model.order, config.model.inductance_h)?;
    let prior = config.model.prior_family()?;
    let (run, failure) = match sample(&likelihood, &prior, &config.mcmc) {
        Ok(run) => (run, None),
        Err(McmcError::Diagnostic { reason, run }) => (*run, Some(reason)),
        Err(e) => return Err(e.into()),
    };
    let names = prior.layout().names();

    create_dir(&args.out)?;
    write_chains(&args.out.join("chains.csv"), &names, &run, config.thin)?;
    let file = DiagnosticsFile {
        schema_version: SCHEMA_VERSION,
        command: "fit-mcmc".into(),
        spectrum: display(spectrum_path),
        names,
        means: run.mean().to_vec(),
        variances: run.variance().to_vec(),
        r_hat: run.diagnostics.r_hat.clone(),
        ess: run.diagnostics.ess.clone(),
        acceptance_rates: run.chains.iter().map(|c| c.acceptance_rate).collect(),
        passed: failure.is_none(),
        failure: failure.clone(),
        config,
    };
    write_json(&args.out.join(DIAGNOSTICS), &file)?;
    say!("max R-hat {:.4}, min ESS {:.0}", run.diagnostics.max_r_hat(), run.diagnostics.min_ess());
    match failure {
        None => Ok(()),
        Some(reason) => Err(CliError::Convergence(format!("{reason}; outputs were written"))),
    }
}

fn write_chains(path: &Path, names: &[String], run: &McmcRun, thin: usize) -> Result<(), CliError> {
    let mut header = vec!["chain", "draw"];
    header.extend(names.iter().map(String::as_str));
    let rows = run.chains.iter().enumerate().flat_map(|(c, chain)| {
        chain.rows().enumerate().step_by(thin).map(move |(i, row)| {
            let mut fields = vec![c.to_string(), i.to_string()];
            fields.extend(row.iter().map(|v| fmt_f64(*v)));
            fields
        })
    });
    write_csv(path, &header, rows)
}
