//! Fractional-order equivalent circuit model: a series resistance, a chain of
//! RQ elements (resistor in parallel with a constant-phase element) and a
//! series inductance.
//!
//! ```text
//! Z(ω) = R_s + Σ_i R_i / ((jω)^α_i · Q_i · R_i + 1) + jωL
//! ```
//!
//! `(jω)^α` is taken on the principal branch: magnitude `ω^α`, phase `απ/2`.
//!
//! Parameters are exchanged with the inference code as a flat vector in the
//! order `[R_s, R_1, Q_1, α_1, …, R_N, Q_N, α_N, σ_n]`, see [`ParamLayout`].

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EcmError {
    #[error("invalid parameter {name}: {value} ({reason})")]
    InvalidParameter { name: String, value: f64, reason: &'static str },
    #[error("model needs at least one RQ element")]
    NoElements,
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(&'static str),
    #[error("parameter vector has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Resistor in parallel with a constant-phase element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RqElement {
    pub r: f64,
    pub q: f64,
    pub alpha: f64,
}

impl RqElement {
    pub fn new(r: f64, q: f64, alpha: f64) -> Result<Self, EcmError> {
        let el = Self { r, q, alpha };
        el.validate(0)?;
        Ok(el)
    }

    /// Characteristic time constant `(R·Q)^(1/α)`.
    pub fn time_constant(&self) -> f64 {
        (self.r * self.q).powf(1.0 / self.alpha)
    }

    fn validate(&self, index: usize) -> Result<(), EcmError> {
        positive(&format!("R_{}", index + 1), self.r)?;
        positive(&format!("Q_{}", index + 1), self.q)?;
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(EcmError::InvalidParameter {
                name: format!("alpha_{}", index + 1),
                value: self.alpha,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(())
    }
}

fn positive(name: &str, value: f64) -> Result<(), EcmError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(EcmError::InvalidParameter { name: name.to_string(), value, reason: "must be positive and finite" })
    }
}

/// One concrete parameter vector of the circuit, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEcmParams", into = "RawEcmParams")]
pub struct EcmParams {
    r_s: f64,
    elements: Vec<RqElement>,
    inductance: f64,
    noise_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct RawEcmParams {
    r_s: f64,
    elements: Vec<RqElement>,
    #[serde(default)]
    inductance: f64,
    noise_scale: f64,
}

impl TryFrom<RawEcmParams> for EcmParams {
    type Error = EcmError;

    fn try_from(raw: RawEcmParams) -> Result<Self, Self::Error> {
        EcmParams::new(raw.r_s, raw.elements, raw.inductance, raw.noise_scale)
    }
}

impl From<EcmParams> for RawEcmParams {
    fn from(p: EcmParams) -> Self {
        RawEcmParams { r_s: p.r_s, elements: p.elements, inductance: p.inductance, noise_scale: p.noise_scale }
    }
}

impl EcmParams {
    pub fn new(r_s: f64, elements: Vec<RqElement>, inductance: f64, noise_scale: f64) -> Result<Self, EcmError> {
        positive("R_s", r_s)?;
        positive("sigma_n", noise_scale)?;
        if !(inductance >= 0.0 && inductance.is_finite()) {
            return Err(EcmError::InvalidParameter {
                name: "L".into(),
                value: inductance,
                reason: "must be non-negative and finite",
            });
        }
        if elements.is_empty() {
            return Err(EcmError::NoElements);
        }
        for (i, el) in elements.iter().enumerate() {
            el.validate(i)?;
        }
        Ok(Self { r_s, elements, inductance, noise_scale })
    }

    /// Three-element reference circuit: R_s = 3 Ω, R = {1, 2, 3} Ω,
    /// Q = {0.1, 5, 150}, α = {0.88, 0.82, 0.99}, L = 100 nH.
    pub fn reference_three_rq(noise_scale: f64) -> Self {
        Self::new(
            3.0,
            vec![
                RqElement { r: 1.0, q: 0.1, alpha: 0.88 },
                RqElement { r: 2.0, q: 5.0, alpha: 0.82 },
                RqElement { r: 3.0, q: 150.0, alpha: 0.99 },
            ],
            100e-9,
            noise_scale,
        )
        .expect("reference parameters are valid")
    }

    pub fn r_s(&self) -> f64 {
        self.r_s
    }

    pub fn elements(&self) -> &[RqElement] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn inductance(&self) -> f64 {
        self.inductance
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Sum of all resistances, the impedance at zero frequency.
    pub fn dc_resistance(&self) -> f64 {
        self.r_s + self.elements.iter().map(|e| e.r).sum::<f64>()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self.order())
    }

    /// Flatten into the free-parameter order of [`ParamLayout`].
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.order() + 2);
        v.push(self.r_s);
        for el in &self.elements {
            v.extend([el.r, el.q, el.alpha]);
        }
        v.push(self.noise_scale);
        v
    }

    pub fn from_slice(theta: &[f64], inductance: f64) -> Result<Self, EcmError> {
        if theta.len() < 5 || !(theta.len() - 2).is_multiple_of(3) {
            return Err(EcmError::LengthMismatch {
                got: theta.len(),
                expected: 3 * ((theta.len().max(2) - 2) / 3).max(1) + 2,
            });
        }
        let order = (theta.len() - 2) / 3;
        let elements = (0..order)
            .map(|i| RqElement { r: theta[1 + 3 * i], q: theta[2 + 3 * i], alpha: theta[3 + 3 * i] })
            .collect();
        Self::new(theta[0], elements, inductance, theta[theta.len() - 1])
    }

    /// Copy with the RQ elements ordered by increasing time constant.
    /// Display helper only; inference never reorders elements.
    pub fn sorted_by_time_constant(&self) -> Self {
        let mut out = self.clone();
        out.elements.sort_by(|a, b| a.time_constant().total_cmp(&b.time_constant()));
        out
    }
}

/// Support of one free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Positive,
    UnitInterval,
}

/// Names and supports of the free parameters for a model of order N.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    order: usize,
}

impl ParamLayout {
    pub fn new(order: usize) -> Self {
        Self { order }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Free parameters including the noise scale: `3N + 2`.
    pub fn len(&self) -> usize {
        3 * self.order + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Parameters that enter the impedance: `3N + 1`.
    pub fn circuit_len(&self) -> usize {
        3 * self.order + 1
    }

    pub fn noise_index(&self) -> usize {
        3 * self.order + 1
    }

    pub fn name(&self, index: usize) -> String {
        if index == 0 {
            "R_s".to_string()
        } else if index == self.noise_index() {
            "sigma_n".to_string()
        } else {
            let el = (index - 1) / 3 + 1;
            match (index - 1) % 3 {
                0 => format!("R_{el}"),
                1 => format!("Q_{el}"),
                _ => format!("alpha_{el}"),
            }
        }
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.name(i)).collect()
    }

    pub fn support(&self, index: usize) -> Support {
        if index != 0 && index != self.noise_index() && (index - 1) % 3 == 2 {
            Support::UnitInterval
        } else {
            Support::Positive
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        (0..self.len()).find(|&i| self.name(i) == name)
    }
}

/// Strictly increasing list of positive frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    freqs_hz: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = EcmError;

    fn try_from(freqs_hz: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(freqs_hz)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.freqs_hz
    }
}

impl FrequencyGrid {
    pub fn new(freqs_hz: Vec<f64>) -> Result<Self, EcmError> {
        if freqs_hz.is_empty() {
            return Err(EcmError::InvalidGrid("empty"));
        }
        if freqs_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(EcmError::InvalidGrid("frequencies must be positive and finite"));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EcmError::InvalidGrid("frequencies must be strictly increasing"));
        }
        Ok(Self { freqs_hz })
    }

    /// Logarithmic grid from `f_min` to `f_max` inclusive.
    pub fn log_spaced(f_min: f64, f_max: f64, points_per_decade: usize) -> Result<Self, EcmError> {
        if !(f_min > 0.0 && f_max > f_min) || points_per_decade == 0 {
            return Err(EcmError::InvalidGrid("need 0 < f_min < f_max and points_per_decade ≥ 1"));
        }
        let decades = (f_max / f_min).log10();
        let n = (decades * points_per_decade as f64).round().max(1.0) as usize;
        let freqs = (0..=n).map(|k| f_min * 10f64.powf(decades * k as f64 / n as f64)).collect();
        Self::new(freqs)
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn angular(&self) -> impl Iterator<Item = f64> + '_ {
        self.freqs_hz.iter().map(|f| 2.0 * PI * f)
    }
}

/// Impedance evaluator with per-frequency quantities precomputed. Works on
/// the flat parameter vector, so the inference loops never allocate.
#[derive(Debug, Clone)]
pub struct ImpedanceModel {
    order: usize,
    inductance: f64,
    omega: Vec<f64>,
    ln_omega: Vec<f64>,
}

impl ImpedanceModel {
    /// Accepts ω = 0 (the dc limit) in addition to grid frequencies.
    pub fn from_angular(order: usize, inductance: f64, omega: Vec<f64>) -> Self {
        let ln_omega = omega.iter().map(|w| w.ln()).collect();
        Self { order, inductance, omega, ln_omega }
    }

    pub fn new(order: usize, inductance: f64, grid: &FrequencyGrid) -> Self {
        Self::from_angular(order, inductance, grid.angular().collect())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn inductance(&self) -> f64 {
        self.inductance
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn circuit_len(&self) -> usize {
        3 * self.order + 1
    }

    /// Evaluate Z at every frequency. `theta` holds at least the `3N + 1`
    /// circuit parameters; a trailing noise scale is ignored.
    pub fn eval(&self, theta: &[f64], out: &mut [Complex64]) {
        debug_assert!(theta.len() >= self.circuit_len());
        debug_assert_eq!(out.len(), self.omega.len());
        let phases: Vec<Complex64> = (0..self.order).map(|i| Complex64::cis(theta[3 + 3 * i] * FRAC_PI_2)).collect();
        for (k, z) in out.iter_mut().enumerate() {
            let w = self.omega[k];
            let mut acc = Complex64::new(theta[0], w * self.inductance);
            if w > 0.0 {
                for (i, phase) in phases.iter().enumerate() {
                    let (r, q, a) = (theta[1 + 3 * i], theta[2 + 3 * i], theta[3 + 3 * i]);
                    let p = phase * (a * self.ln_omega[k]).exp();
                    acc += r / (p * (q * r) + 1.0);
                }
            } else {
                for i in 0..self.order {
                    acc += theta[1 + 3 * i];
                }
            }
            *z = acc;
        }
    }

    /// Evaluate Z and its partial derivatives. `jac` is row-major with one
    /// row per frequency and `3N + 1` columns in layout order.
    pub fn eval_with_jacobian(&self, theta: &[f64], z: &mut [Complex64], jac: &mut [Complex64]) {
        let cols = self.circuit_len();
        debug_assert_eq!(jac.len(), cols * self.omega.len());
        let phases: Vec<Complex64> = (0..self.order).map(|i| Complex64::cis(theta[3 + 3 * i] * FRAC_PI_2)).collect();
        for k in 0..self.omega.len() {
            let w = self.omega[k];
            let row = &mut jac[k * cols..(k + 1) * cols];
            row[0] = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(theta[0], w * self.inductance);
            if w > 0.0 {
                let log_jw = Complex64::new(self.ln_omega[k], FRAC_PI_2);
                for (i, phase) in phases.iter().enumerate() {
                    let (r, q, a) = (theta[1 + 3 * i], theta[2 + 3 * i], theta[3 + 3 * i]);
                    let p = phase * (a * self.ln_omega[k]).exp();
                    let d = p * (q * r) + 1.0;
                    let inv_d = d.inv();
                    let inv_d2 = inv_d * inv_d;
                    acc += r * inv_d;
                    row[1 + 3 * i] = inv_d2;
                    row[2 + 3 * i] = -(r * r) * p * inv_d2;
                    row[3 + 3 * i] = -(r * r * q) * p * log_jw * inv_d2;
                }
            } else {
                for i in 0..self.order {
                    acc += theta[1 + 3 * i];
                    row[1 + 3 * i] = Complex64::new(1.0, 0.0);
                    row[2 + 3 * i] = Complex64::new(0.0, 0.0);
                    row[3 + 3 * i] = Complex64::new(0.0, 0.0);
                }
            }
            z[k] = acc;
        }
    }
}

/// Impedance of `params` at every grid frequency.
pub fn impedance(params: &EcmParams, grid: &FrequencyGrid) -> Vec<Complex64> {
    let model = ImpedanceModel::new(params.order(), params.inductance(), grid);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.len()];
    model.eval(&params.to_vec(), &mut out);
    out
}

/// Complex partial derivatives of Z, one row per frequency, one column per
/// circuit parameter (`R_s, R_1, Q_1, α_1, …`). The noise scale does not
/// enter Z and has no column.
pub fn impedance_jacobian(params: &EcmParams, grid: &FrequencyGrid) -> Vec<Vec<Complex64>> {
    let model = ImpedanceModel::new(params.order(), params.inductance(), grid);
    let cols = model.circuit_len();
    let mut z = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut jac = vec![Complex64::new(0.0, 0.0); grid.len() * cols];
    model.eval_with_jacobian(&params.to_vec(), &mut z, &mut jac);
    jac.chunks(cols).map(|c| c.to_vec()).collect()
}
