use serde::Serialize;

use crate::error::{Error, Result};

/// Maximum-likelihood mean signal for `n` observed counts on top of a
/// Poisson background with known mean `lambda_b`.
pub fn mle_signal(n: f64, lambda_b: f64) -> Result<f64> {
    if !(n >= 0.0 && lambda_b >= 0.0) {
        return Err(Error::Domain(format!(
            "counts and background must be non-negative, got n = {n}, λ_B = {lambda_b}"
        )));
    }
    Ok((n - lambda_b).max(0.0))
}

/// Ratio of interfering pair experiments to uncorrelated pairs two cycles
/// apart, `η/(1 + η)²`, for delay-line transmission `η`.
pub fn normalization_factor(eta: f64) -> Result<f64> {
    if eta == 0.0 {
        return Err(Error::Config(
            "delay transmission 0 leaves no pair experiments".into(),
        ));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!(
            "delay transmission must lie in (0, 1], got {eta}"
        )));
    }
    Ok(eta / (1.0 + eta).powi(2))
}

/// Integrated signal over integrated background correction.
pub fn snr(signal: f64, background: f64) -> Result<f64> {
    if !(background > 0.0) {
        return Err(Error::UndefinedRatio(format!("background is {background}")));
    }
    Ok(signal / background)
}

/// A normalized count with its one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    /// `n` counts scaled by `norm`, with Poisson error.
    pub fn from_counts(n: f64, norm: f64) -> Self {
        Self::new(n / norm, n.max(0.0).sqrt() / norm)
    }
}

/// Normalized cross-detector aggregates from the four datasets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityInputs {
    /// All cross-detector pairs, parallel and perpendicular (φ = 0).
    pub n_parallel: Estimate,
    pub n_perpendicular: Estimate,
    /// Cross-detector pairs with one click in each time bin.
    pub n_perpendicular_cross: Estimate,
    pub n_zero_cross: Estimate,
    pub n_pi_cross: Estimate,
    /// Feedback data: D in the first bin and C in the second, and vice versa.
    pub n_d1c2: Estimate,
    pub n_c1d2: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Visibilities {
    pub v_hom: Estimate,
    pub v_ref: Estimate,
    pub v_phi: Estimate,
    pub v_feed: Estimate,
}

/// `1 − x/y`, with errors propagated.
pub fn ratio_visibility(x: Estimate, y: Estimate, name: &str) -> Result<Estimate> {
    if !(y.value > 0.0) {
        return Err(Error::UndefinedVisibility(format!(
            "{name}: reference count is zero"
        )));
    }
    let r = x.value / y.value;
    let sigma = ((x.sigma / y.value).powi(2) + (r * y.sigma / y.value).powi(2)).sqrt();
    Ok(Estimate::new(1.0 - r, sigma))
}

/// `(x − y)/(x + y)`, with errors propagated.
pub fn contrast_visibility(x: Estimate, y: Estimate, name: &str) -> Result<Estimate> {
    let s = x.value + y.value;
    if !(s > 0.0) {
        return Err(Error::UndefinedVisibility(format!(
            "{name}: both counts are zero"
        )));
    }
    let v = (x.value - y.value) / s;
    // ∂v/∂x = 2y/s², ∂v/∂y = −2x/s²
    let sigma = 2.0 * ((y.value * x.sigma).powi(2) + (x.value * y.sigma).powi(2)).sqrt() / (s * s);
    Ok(Estimate::new(v, sigma))
}

pub fn visibilities(n: &VisibilityInputs) -> Result<Visibilities> {
    Ok(Visibilities {
        v_hom: ratio_visibility(n.n_parallel, n.n_perpendicular, "V_HOM")?,
        v_ref: ratio_visibility(n.n_zero_cross, n.n_perpendicular_cross, "V_ref")?,
        v_phi: contrast_visibility(n.n_pi_cross, n.n_zero_cross, "V_phi")?,
        v_feed: contrast_visibility(n.n_d1c2, n.n_c1d2, "V_feed")?,
    })
}
