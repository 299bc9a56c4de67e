//! Plug-in variance and normal confidence intervals for `f̃(x0)`.
//!
//! `f̃(x0) - f̂(x0)` is the linear smoother `Σ W_i r_i` of fold-2 residuals, so
//! conditional on fold 1 its variance is `Σ W_i² Var(ξ_i)`. The noise `ξ_i`
//! is replaced by the second-stage residual `ξ̂_i = r_i - b̂(X_i)`.

use serde::{Deserialize, Serialize};

use crate::debias::DebiasedFit;
use crate::error::{Error, Result};
use crate::local_poly::{poly_basis, WeightVector};
use crate::stats::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub x0: f64,
    pub ftilde: f64,
    /// Estimated `Var(f̃(x0))`.
    pub var_hat: f64,
    /// `n h var_hat`, the plug-in for the asymptotic variance `V(x0)`.
    pub v_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
}

impl InferenceResult {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }
}

/// `f̃ ± z_{(1+level)/2} sqrt(var_hat)`.
pub fn interval(
    x0: f64,
    ftilde: f64,
    var_hat: f64,
    level: f64,
    n: usize,
    bandwidth: f64,
) -> Result<InferenceResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("level must lie in (0, 1), got {level}")));
    }
    if !(var_hat >= 0.0) || !var_hat.is_finite() {
        return Err(Error::InvalidConfig(format!("variance must be finite and >= 0, got {var_hat}")));
    }
    let half = normal_quantile(0.5 * (1.0 + level)) * var_hat.sqrt();
    Ok(InferenceResult {
        x0,
        ftilde,
        var_hat,
        v_hat: n as f64 * bandwidth * var_hat,
        ci_lo: ftilde - half,
        ci_hi: ftilde + half,
        level,
    })
}

/// `Σ W_i² ξ̂_i²` for weights over fold 2 and noise proxies aligned with them.
pub fn plugin_variance(weights: &WeightVector, xi_hat: &[f64]) -> Result<f64> {
    if xi_hat.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "noise proxies vs weights",
            left: xi_hat.len(),
            right: weights.len(),
        });
    }
    let w = weights.normalized();
    Ok(w.iter().map(|(i, wi)| (wi * xi_hat[i]).powi(2)).sum())
}

/// `ξ̂_i = r_i - b̂(X_i)` for every fold-2 point in the window of `x0`; zero
/// elsewhere.
///
/// If the design is singular at some `X_i`, that point falls back to the
/// residual of the local polynomial fitted at `x0` itself.
pub fn noise_proxies(fit: &DebiasedFit, x0: f64) -> Result<Vec<f64>> {
    let point = fit.point(x0)?;
    let mut xi = vec![0.0; fit.m];
    let mut local: Option<Vec<f64>> = None;
    for &i in point.weights.support() {
        let xi_x = fit.fold2_xs[i];
        let b = match fit.bhat_at(xi_x) {
            Ok(b) => b,
            Err(Error::Singular(_)) => {
                if local.is_none() {
                    local = Some(fit.smoother().coefficients_at(x0, &fit.residuals)?);
                }
                let beta = local.as_ref().expect("just set");
                let rho = poly_basis((xi_x - x0) / fit.bandwidth, fit.degree);
                rho.iter().zip(beta).map(|(a, b)| a * b).sum()
            }
            Err(e) => return Err(e),
        };
        xi[i] = fit.residuals[i] - b;
    }
    Ok(xi)
}

/// Plug-in `Var(f̃(x0))` for a fitted evaluation point.
pub fn variance_estimate(fit: &DebiasedFit, x0: f64) -> Result<f64> {
    let xi = noise_proxies(fit, x0)?;
    plugin_variance(&fit.point(x0)?.weights, &xi)
}

pub fn confidence_interval(fit: &DebiasedFit, x0: f64, level: f64) -> Result<InferenceResult> {
    let point = fit.point(x0)?;
    let var_hat = variance_estimate(fit, x0)?;
    interval(x0, point.ftilde, var_hat, level, fit.n, fit.bandwidth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedErrors {
    pub values: Vec<f64>,
    /// Replications dropped because their variance estimate was zero.
    pub excluded: usize,
}

/// `(f̃_r - f0) / sqrt(var_hat_r)` over replications `(f̃_r, var_hat_r)`.
pub fn standardized_errors(replications: &[(f64, f64)], f0: f64) -> StandardizedErrors {
    let mut values = Vec::with_capacity(replications.len());
    let mut excluded = 0;
    for &(ftilde, var_hat) in replications {
        if var_hat > 0.0 {
            values.push((ftilde - f0) / var_hat.sqrt());
        } else {
            excluded += 1;
        }
    }
    StandardizedErrors { values, excluded }
}
