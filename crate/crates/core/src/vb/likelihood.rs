use std::f64::consts::PI;

use num_complex::Complex64;

use super::VbError;
use crate::ecm::{EcmParams, ImpedanceModel, ParamLayout};
use crate::probdist::VariationalFamily;
use crate::signal::ImpedanceSpectrum;
use crate::target::LogTarget;

/// Observed spectrum plus the model structure it is explained with.
///
/// Real and imaginary residuals are independent Gaussians with a shared
/// standard deviation `σ_n`, the last free parameter:
///
/// ```text
/// log p(x | θ) = Σ_k [ -ln(2π) - 2 ln σ_n - |Z_k^obs - Z_k(θ)|² / (2 σ_n²) ]
/// ```
#[derive(Debug, Clone)]
pub struct Likelihood {
    spectrum: ImpedanceSpectrum,
    model: ImpedanceModel,
}

impl Likelihood {
    pub fn new(spectrum: ImpedanceSpectrum, order: usize, inductance: f64) -> Result<Self, VbError> {
        let layout = ParamLayout::new(order);
        if order == 0 {
            return Err(VbError::Invalid("model order must be at least 1".into()));
        }
        if spectrum.len() < layout.len() {
            return Err(VbError::TooFewPoints { points: spectrum.len(), needed: layout.len() });
        }
        if !(inductance >= 0.0 && inductance.is_finite()) {
            return Err(VbError::Invalid(format!("inductance must be non-negative, got {inductance}")));
        }
        let model = ImpedanceModel::new(order, inductance, &spectrum.grid());
        Ok(Self { spectrum, model })
    }

    pub fn spectrum(&self) -> &ImpedanceSpectrum {
        &self.spectrum
    }

    pub fn model(&self) -> &ImpedanceModel {
        &self.model
    }

    pub fn order(&self) -> usize {
        self.model.order()
    }

    pub fn inductance(&self) -> f64 {
        self.model.inductance()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.order())
    }

    pub fn n_points(&self) -> usize {
        self.spectrum.len()
    }

    pub(crate) fn check_prior(&self, prior: &VariationalFamily) -> Result<(), VbError> {
        if prior.order() != self.order() {
            return Err(VbError::Invalid(format!(
                "prior is for order {}, model has order {}",
                prior.order(),
                self.order()
            )));
        }
        Ok(())
    }

    pub fn evaluator<'a>(&'a self, prior: &'a VariationalFamily) -> LogJoint<'a> {
        LogJoint {
            likelihood: self,
            prior,
            z: vec![Complex64::new(0.0, 0.0); self.n_points()],
            jac: vec![Complex64::new(0.0, 0.0); self.n_points() * self.layout().circuit_len()],
        }
    }

    /// `log p(x | θ)` for a flat parameter vector.
    pub fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let mut z = vec![Complex64::new(0.0, 0.0); self.n_points()];
        self.model.eval(theta, &mut z);
        gaussian_log_likelihood(self.spectrum.z(), &z, theta[theta.len() - 1])
    }
}

fn gaussian_log_likelihood(observed: &[Complex64], predicted: &[Complex64], sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return f64::NEG_INFINITY;
    }
    let ssr: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p).norm_sqr()).sum();
    let k = observed.len() as f64;
    -k * (2.0 * PI).ln() - 2.0 * k * sigma.ln() - ssr / (2.0 * sigma * sigma)
}

/// `log p(x, θ) = log p(x | θ) + log p(θ)`. Returns -∞ outside the prior's
/// support.
pub fn log_joint(theta: &EcmParams, likelihood: &Likelihood, prior: &VariationalFamily) -> f64 {
    likelihood.evaluator(prior).value(&theta.to_vec())
}

/// Log-joint evaluator with scratch buffers, for the inner loops of the
/// optimizer and the sampler.
pub struct LogJoint<'a> {
    likelihood: &'a Likelihood,
    prior: &'a VariationalFamily,
    z: Vec<Complex64>,
    jac: Vec<Complex64>,
}

impl LogJoint<'_> {
    pub fn dim(&self) -> usize {
        self.likelihood.layout().len()
    }

    pub fn value(&mut self, theta: &[f64]) -> f64 {
        let lp = self.prior.log_density(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.likelihood.model.eval(theta, &mut self.z);
        lp + gaussian_log_likelihood(self.likelihood.spectrum.z(), &self.z, theta[theta.len() - 1])
    }

    /// Value and gradient with respect to θ (physical coordinates).
    pub fn value_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let lp = self.prior.log_density(theta);
        if !lp.is_finite() {
            grad.fill(0.0);
            return f64::NEG_INFINITY;
        }
        let model = &self.likelihood.model;
        model.eval_with_jacobian(theta, &mut self.z, &mut self.jac);
        let cols = model.circuit_len();
        let sigma = theta[theta.len() - 1];
        let inv_s2 = 1.0 / (sigma * sigma);
        let observed = self.likelihood.spectrum.z();
        grad.fill(0.0);
        let mut ssr = 0.0;
        for (k, (o, p)) in observed.iter().zip(&self.z).enumerate() {
            let r = o - p;
            ssr += r.norm_sqr();
            let row = &self.jac[k * cols..(k + 1) * cols];
            for (g, d) in grad[..cols].iter_mut().zip(row) {
                *g += r.re * d.re + r.im * d.im;
            }
        }
        for g in grad[..cols].iter_mut() {
            *g *= inv_s2;
        }
        let kf = observed.len() as f64;
        grad[cols] = -2.0 * kf / sigma + ssr * inv_s2 / sigma;
        for ((g, f), &x) in grad.iter_mut().zip(self.prior.factors()).zip(theta) {
            *g += f.d_log_pdf_dx(x);
        }
        lp - kf * (2.0 * PI).ln() - 2.0 * kf * sigma.ln() - 0.5 * ssr * inv_s2
    }
}

impl LogTarget for LogJoint<'_> {
    fn dim(&self) -> usize {
        LogJoint::dim(self)
    }

    fn log_density(&mut self, theta: &[f64]) -> f64 {
        self.value(theta)
    }

    fn log_density_and_grad(&mut self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.value_and_grad(theta, grad)
    }
}
