use std::path::Path;

use eis_bayes::ecm::{FrequencyGrid, ImpedanceModel};
use eis_bayes::signal::{rms_distance, ImpedanceSpectrum};
use eis_bayes::vb::extract_bands;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::display;
use super::fit_vb::PosteriorFile;
use crate::args::GlobalArgs;
use crate::error::CliError;
use crate::io::{create_dir, read_json, read_spectrum, write_json, SCHEMA_VERSION};

pub const COMPARISON: &str = "comparison.json";

/// Moments shared by `posterior.json` and `diagnostics.json`.
#[derive(Debug, Deserialize)]
struct Moments {
    names: Vec<String>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct ParameterRow {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_variance: Option<f64>,
    /// (mean - reference_mean) / reference_mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SpectrumCheck {
    /// RMS of |Z| differences between the posterior mean curve and the spectrum.
    pub mean_curve_rms: f64,
    /// Share of spectrum points inside the credible band.
    pub band_coverage: f64,
}

#[derive(Debug, Serialize)]
pub struct TruthCheck {
    pub mean_curve_rms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum_rms: Option<f64>,
    /// mean_curve_rms / spectrum_rms.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub schema_version: u32,
    pub command: &'static str,
    pub posterior: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub parameters: Vec<ParameterRow>,
    /// RMS between the two mean curves on the fitted grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_curve_rms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthCheck>,
}

pub fn run(
    args: &GlobalArgs,
    posterior_path: &Path,
    reference_path: Option<&Path>,
    spectrum_path: Option<&Path>,
    truth_path: Option<&Path>,
) -> Result<(), CliError> {
    let post: PosteriorFile = read_json(posterior_path)?;
    let reference: Option<Moments> = reference_path.map(read_json).transpose()?;
    let spectrum = spectrum_path.map(read_spectrum).transpose()?;
    let truth = truth_path.map(read_spectrum).transpose()?;
    let comparison = compare(&post, reference.as_ref(), spectrum.as_ref(), truth.as_ref())?;
    let comparison =
        Comparison { posterior: display(posterior_path), reference: reference_path.map(display), ..comparison };
    create_dir(&args.out)?;
    write_json(&args.out.join(COMPARISON), &comparison)?;
    for row in &comparison.parameters {
        match (row.mean_rel_error, row.variance_ratio) {
            (Some(e), Some(r)) => say!("{:<8} mean error {:+.3}%  variance ratio {:.3}", row.name, 100.0 * e, r),
            _ => say!("{:<8} mean {:.6e}  variance {:.3e}", row.name, row.mean, row.variance),
        }
    }
    if let Some(t) = &comparison.truth {
        say!("rms to truth: posterior mean {:.4e}, spectrum {:?}", t.mean_curve_rms, t.spectrum_rms);
    }
    Ok(())
}

fn mean_curve(post: &PosteriorFile, means: &[f64], freqs_hz: &[f64]) -> Result<Vec<Complex64>, CliError> {
    let grid = FrequencyGrid::new(freqs_hz.to_vec())?;
    let model = ImpedanceModel::new(post.config.model.order, post.config.model.inductance_h, &grid);
    let mut z = vec![Complex64::new(0.0, 0.0); grid.len()];
    model.eval(means, &mut z);
    Ok(z)
}

fn compare(
    post: &PosteriorFile,
    reference: Option<&Moments>,
    spectrum: Option<&ImpedanceSpectrum>,
    truth: Option<&ImpedanceSpectrum>,
) -> Result<Comparison, CliError> {
    if let Some(r) = reference {
        if r.names != post.names || r.means.len() != r.names.len() || r.variances.len() != r.names.len() {
            return Err(CliError::Validation(format!(
                "reference parameters {:?} do not match the posterior's {:?}",
                r.names, post.names
            )));
        }
    }
    let parameters = (0..post.names.len())
        .map(|i| {
            let (rm, rv) = match reference {
                Some(r) => (Some(r.means[i]), Some(r.variances[i])),
                None => (None, None),
            };
            ParameterRow {
                name: post.names[i].clone(),
                mean: post.means[i],
                variance: post.variances[i],
                reference_mean: rm,
                reference_variance: rv,
                mean_rel_error: rm.map(|m| (post.means[i] - m) / m),
                variance_ratio: rv.map(|v| post.variances[i] / v),
            }
        })
        .collect();

    let reference_curve_rms = match reference {
        Some(r) => Some(rms_distance(
            &mean_curve(post, &post.means, &post.freqs_hz)?,
            &mean_curve(post, &r.means, &post.freqs_hz)?,
        )),
        None => None,
    };

    let spectrum_check = match spectrum {
        Some(s) => {
            let bands = extract_bands(&post.family, post.config.model.inductance_h, &s.grid(), &post.config.bands)?;
            Some(SpectrumCheck {
                mean_curve_rms: rms_distance(&bands.mean_curve, s.z()),
                band_coverage: bands.coverage(s.z()),
            })
        }
        None => None,
    };

    let truth_check = match truth {
        Some(t) => {
            let mean_curve_rms = rms_distance(&mean_curve(post, &post.means, t.freqs_hz())?, t.z());
            let spectrum_rms = spectrum.map(|s| s.rms_distance(t)).transpose()?;
            Some(TruthCheck { mean_curve_rms, spectrum_rms, ratio: spectrum_rms.map(|s| mean_curve_rms / s) })
        }
        None => None,
    };

    Ok(Comparison {
        schema_version: SCHEMA_VERSION,
        command: "compare",
        posterior: String::new(),
        reference: None,
        parameters,
        reference_curve_rms,
        spectrum: spectrum_check,
        truth: truth_check,
    })
}
