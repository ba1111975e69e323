//! Regularized incomplete beta function and its inverse.

use statrs::function::gamma::ln_gamma;

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

const CF_MAX_TERMS: usize = 20_000;
const CF_TOL: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Continued fraction for `I_x(a, b)` (modified Lentz). Converges fast for
/// `x < (a + 1) / (a + b + 2)`.
fn beta_cf(a: f64, b: f64, x: f64) -> Option<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_TOL {
            return Some(h);
        }
    }
    None
}

/// `I_x(a, b)` given a precomputed `ln B(a, b)`. Returns `None` only if the
/// continued fraction fails to converge.
pub fn beta_reg_with_ln_beta(a: f64, b: f64, x: f64, ln_b: f64) -> Option<f64> {
    if x <= 0.0 {
        return Some(0.0);
    }
    if x >= 1.0 {
        return Some(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_b;
    if x < (a + 1.0) / (a + b + 2.0) {
        beta_cf(a, b, x).map(|cf| (ln_front.exp() * cf / a).clamp(0.0, 1.0))
    } else {
        beta_cf(b, a, 1.0 - x).map(|cf| (1.0 - ln_front.exp() * cf / b).clamp(0.0, 1.0))
    }
}

pub fn beta_reg(a: f64, b: f64, x: f64) -> Option<f64> {
    beta_reg_with_ln_beta(a, b, x, ln_beta(a, b))
}

/// Lowest and highest values returned by [`beta_reg_inv`].
pub const UNIT_CLAMP: f64 = 1e-9;

/// Solve `I_x(a, b) = u` for x by Newton iteration inside a shrinking
/// bisection bracket. The result is clamped to `[1e-9, 1 - 1e-9]`.
pub fn beta_reg_inv(a: f64, b: f64, u: f64, ln_b: f64) -> Option<f64> {
    let lo_bound = UNIT_CLAMP;
    let hi_bound = 1.0 - UNIT_CLAMP;
    let f_lo = beta_reg_with_ln_beta(a, b, lo_bound, ln_b)?;
    if u <= f_lo {
        return Some(lo_bound);
    }
    let f_hi = beta_reg_with_ln_beta(a, b, hi_bound, ln_b)?;
    if u >= f_hi {
        return Some(hi_bound);
    }
    let (mut lo, mut hi) = (lo_bound, hi_bound);
    let mut x = initial_guess(a, b, u).clamp(lo_bound, hi_bound);
    for _ in 0..300 {
        let f = beta_reg_with_ln_beta(a, b, x, ln_b)? - u;
        if f == 0.0 {
            return Some(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let log_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_b;
        let pdf = log_pdf.exp();
        let newton = x - f / pdf;
        let next = if pdf > 0.0 && newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        // Quadratic convergence: the error after a step this small is far
        // below rounding.
        if (next - x).abs() <= 1e-9 * x.min(1.0 - x).max(1e-300) || hi - lo <= 1e-15 {
            return Some(next);
        }
        x = next;
    }
    None
}

/// Normal approximation to the quantile, good when both shapes are large.
fn initial_guess(a: f64, b: f64, u: f64) -> f64 {
    let mean = a / (a + b);
    if a < 2.0 || b < 2.0 {
        return mean;
    }
    let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
    let z = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u);
    let x = mean + sd * z;
    if x > 0.0 && x < 1.0 {
        x
    } else {
        mean
    }
}
