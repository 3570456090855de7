//! Weighted quantiles and the asymmetric Laplace likelihood.
//!
//! Ratio estimates are modelled as `ALD(theta, tau, w_i * lambda)`. For fixed
//! `tau` the location MLE is the weighted `tau`-quantile, and the `lambda`
//! and `tau` MLEs have closed forms given the other two parameters.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bounds applied to every `tau` update.
pub const TAU_MIN: f64 = 1e-6;
pub const TAU_MAX: f64 = 1.0 - 1e-6;

/// Relative floor on the weighted check loss below which `lambda` diverges.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Check loss `rho_tau(u)`: `tau * u` for `u >= 0`, `(tau - 1) * u` otherwise.
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1), got {tau}");
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckLossEval {
    pub tau: f64,
    pub value: f64,
}

/// Location, skewness and common inverse scale of an asymmetric Laplace model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AldParams {
    pub theta: f64,
    pub tau: f64,
    pub lambda: f64,
}

impl AldParams {
    pub fn new(theta: f64, tau: f64, lambda: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidConfig(format!("theta must be finite, got {theta}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidConfig(format!("tau must lie in (0, 1), got {tau}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(AldParams { theta, tau, lambda })
    }
}

fn validate(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: weights.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "value at index {index} is not finite"
        )));
    }
    if let Some(index) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::NonPositiveWeight {
            index,
            value: weights[index],
        });
    }
    Ok(())
}

/// Values sorted by `(value, input index)` with their weights, for repeated
/// quantile queries on the same sample.
#[derive(Debug, Clone)]
pub struct SortedSample {
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl SortedSample {
    pub fn new(values: &[f64], weights: &[f64]) -> Result<Self> {
        validate(values, weights)?;
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| match values[i].total_cmp(&values[j]) {
            Ordering::Equal => i.cmp(&j),
            other => other,
        });
        let mut acc = 0.0;
        let mut sorted = Vec::with_capacity(order.len());
        let mut cumulative = Vec::with_capacity(order.len());
        for i in order {
            acc += weights[i];
            sorted.push(values[i]);
            cumulative.push(acc);
        }
        Ok(SortedSample {
            values: sorted,
            cumulative,
        })
    }

    pub fn total_weight(&self) -> f64 {
        *self.cumulative.last().expect("non-empty by construction")
    }

    /// Smallest value whose cumulative weight reaches `tau * total`.
    pub fn quantile(&self, tau: f64) -> f64 {
        let target = tau * self.total_weight();
        let k = self.cumulative.partition_point(|&c| c < target);
        self.values[k.min(self.values.len() - 1)]
    }
}

/// Weighted `tau`-quantile: the smallest value `v` such that the weight of all
/// elements `<= v` is at least `tau` times the total weight.
pub fn weighted_quantile(values: &[f64], weights: &[f64], tau: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0, 1), got {tau}")));
    }
    Ok(SortedSample::new(values, weights)?.quantile(tau))
}

/// `sum_i w_i * rho_tau(r_i - theta)`.
pub fn weighted_check_loss(ratios: &[f64], weights: &[f64], theta: f64, tau: f64) -> f64 {
    ratios
        .iter()
        .zip(weights)
        .map(|(r, w)| w * check_loss(r - theta, tau))
        .sum()
}

/// Log density of one ratio with inverse scale `w * lambda`.
pub fn ald_logpdf(r: f64, p: &AldParams, w: f64) -> f64 {
    let scale = w * p.lambda;
    scale.ln() + (p.tau * (1.0 - p.tau)).ln() - scale * check_loss(r - p.theta, p.tau)
}

/// `ALD(0, tau, 1)` density, used for plotting standardized residuals.
pub fn ald_pdf_standard(e: f64, tau: f64) -> f64 {
    tau * (1.0 - tau) * (-check_loss(e, tau)).exp()
}

/// Joint log-likelihood of all ratios under `lambda_i = w_i * lambda`.
pub fn log_likelihood(ratios: &[f64], weights: &[f64], p: &AldParams) -> Result<f64> {
    validate(ratios, weights)?;
    Ok(log_likelihood_unchecked(ratios, weights, p))
}

pub(crate) fn log_likelihood_unchecked(ratios: &[f64], weights: &[f64], p: &AldParams) -> f64 {
    let n = ratios.len() as f64;
    let sum_log_w: f64 = weights.iter().map(|w| w.ln()).sum();
    sum_log_w + n * (p.lambda * p.tau * (1.0 - p.tau)).ln()
        - p.lambda * weighted_check_loss(ratios, weights, p.theta, p.tau)
}

/// Conditional MLE of `lambda`: `p / sum_i w_i rho_tau(r_i - theta)`.
pub fn update_lambda(ratios: &[f64], weights: &[f64], theta: f64, tau: f64) -> Result<f64> {
    validate(ratios, weights)?;
    let loss = weighted_check_loss(ratios, weights, theta, tau);
    let n = ratios.len() as f64;
    let mean_w = weights.iter().sum::<f64>() / n;
    let floor = LOSS_FLOOR * n * mean_w;
    if !(loss >= floor) {
        return Err(Error::DegenerateFit(format!(
            "weighted check loss {loss:e} is below {floor:e}; residuals are all ~0"
        )));
    }
    Ok(n / loss)
}

/// Root of `a tau^2 - tau (2p + a) + p = 0` lying in (0, 1), in the form that
/// stays finite at `a = 0`, clamped to `[TAU_MIN, TAU_MAX]`.
pub fn tau_from_score(a: f64, p: f64) -> f64 {
    let tau = 0.5 - a / (2.0 * (2.0 * p + a.hypot(2.0 * p)));
    tau.clamp(TAU_MIN, TAU_MAX)
}

/// Conditional MLE of `tau` given `theta` and `lambda`.
pub fn update_tau(ratios: &[f64], weights: &[f64], theta: f64, lambda: f64) -> f64 {
    let a = lambda
        * ratios
            .iter()
            .zip(weights)
            .map(|(r, w)| w * (r - theta))
            .sum::<f64>();
    tau_from_score(a, ratios.len() as f64)
}
