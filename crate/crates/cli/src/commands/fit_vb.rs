use std::path::Path;

use eis_bayes::probdist::VariationalFamily;
use eis_bayes::vb::{extract_bands, fit, CredibleBands, Likelihood, PosteriorReport, StopReason};
use serde::{Deserialize, Serialize};

use super::display;
use crate::args::GlobalArgs;
use crate::config::{load, FitVbConfig};
use crate::error::CliError;
use crate::io::{create_dir, fmt_f64, read_spectrum, write_csv, write_json, SCHEMA_VERSION};

pub const POSTERIOR: &str = "posterior.json";

/// Contents of `posterior.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorFile {
    pub schema_version: u32,
    pub command: String,
    pub config: FitVbConfig,
    pub spectrum: String,
    /// Frequencies of the fitted spectrum.
    pub freqs_hz: Vec<f64>,
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub family: VariationalFamily,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub restart: usize,
    pub restart_scores: Vec<f64>,
    pub final_elbo: f64,
}

pub fn run(args: &GlobalArgs, spectrum_path: &Path) -> Result<(), CliError> {
    let config = load::<FitVbConfig>(args.config.as_deref())?.resolved(args.seed, args.paper_epsilon)?;
    let spectrum = read_spectrum(spectrum_path)?;
    let likelihood = Likelihood::new(spectrum, config.model.order, config.model.inductance_h)?;
    let prior = config.model.prior_family()?;
    let init = config.init_family(&prior)?;
    let report = fit(&likelihood, &prior, &init, &config.vb)?;
    let grid = likelihood.spectrum().grid();
    let bands = extract_bands(&report.family, config.model.inductance_h, &grid, &config.bands)?;

    create_dir(&args.out)?;
    write_trace(&args.out.join("trace.csv"), &report)?;
    write_bands(&args.out.join("bands.csv"), &bands)?;
    let file = PosteriorFile {
        schema_version: SCHEMA_VERSION,
        command: "fit-vb".into(),
        spectrum: display(spectrum_path),
        freqs_hz: grid.freqs_hz().to_vec(),
        names: report.family.layout().names(),
        means: report.means(),
        variances: report.variances(),
        family: report.family.clone(),
        iterations: report.iterations,
        stop_reason: report.stop_reason,
        restart: report.restart,
        restart_scores: report.restart_scores.clone(),
        final_elbo: *report.elbo_trace.last().unwrap_or(&f64::NAN),
        config,
    };
    write_json(&args.out.join(POSTERIOR), &file)?;
    say!(
        "{} after {} iterations in {:.2} s",
        match report.stop_reason {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "stopped at max_iters",
        },
        report.iterations,
        report.duration.as_secs_f64()
    );
    match report.stop_reason {
        StopReason::Converged => Ok(()),
        StopReason::MaxIters => Err(CliError::Convergence(format!(
            "no convergence within {} iterations; outputs were written",
            report.iterations
        ))),
    }
}

fn write_trace(path: &Path, report: &PosteriorReport) -> Result<(), CliError> {
    let names = report.family.layout().names();
    let mut header = vec!["iteration".to_string(), "elbo".to_string()];
    header.extend(names.iter().map(|n| format!("mean_{n}")));
    header.extend(names.iter().map(|n| format!("sd_{n}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..report.elbo_trace.len()).map(|t| {
        let mut row = vec![t.to_string(), fmt_f64(report.elbo_trace[t])];
        row.extend(report.mean_trace[t].iter().map(|v| fmt_f64(*v)));
        row.extend(report.sd_trace[t].iter().map(|v| fmt_f64(*v)));
        row
    });
    write_csv(path, &header, rows)
}

fn write_bands(path: &Path, bands: &CredibleBands) -> Result<(), CliError> {
    let header =
        ["freq_hz", "mean_re_ohm", "mean_im_ohm", "lower_re_ohm", "lower_im_ohm", "upper_re_ohm", "upper_im_ohm"];
    let rows = (0..bands.freqs_hz.len()).map(|k| {
        let (m, lo, hi) = (bands.mean_curve[k], bands.lower[k], bands.upper[k]);
        [bands.freqs_hz[k], m.re, m.im, lo.re, lo.im, hi.re, hi.im].map(fmt_f64)
    });
    write_csv(path, &header, rows)
}
