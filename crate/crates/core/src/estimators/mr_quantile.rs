use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ratios::{quantile_weights, RatioSet};
use crate::wqr::{self, AldParams, SortedSample};

use super::SolverConfig;

/// Fitted asymmetric-Laplace model of the ratio estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AldFit {
    pub params: AldParams,
    /// Log-likelihood after each full (theta, lambda, tau) sweep.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `w_i * lambda * (r_i - theta)`.
    pub std_residuals: Vec<f64>,
}

impl AldFit {
    pub fn loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("at least one sweep")
    }
}

fn rel_change(new: f64, old: f64) -> f64 {
    let d = (new - old).abs();
    if d == 0.0 {
        0.0
    } else {
        d / new.abs().max(old.abs())
    }
}

/// Coordinate ascent on the ALD log-likelihood.
///
/// Each sweep sets theta to the weighted tau-quantile, then lambda and tau to
/// their closed-form conditional maximizers, so the log-likelihood never
/// decreases. The fit stops once the log-likelihood change is below `tol` and
/// no parameter moved by more than `tol` relative to its size.
pub fn fit_ald(ratios: &[f64], weights: &[f64], cfg: &SolverConfig) -> Result<AldFit> {
    cfg.validate()?;
    let sample = SortedSample::new(ratios, weights)?;

    let mut tau = cfg.tau_init;
    let mut trace: Vec<f64> = Vec::new();
    let mut prev: Option<(f64, f64, f64)> = None;
    let mut converged = false;
    let mut params = AldParams {
        theta: sample.quantile(tau),
        tau,
        lambda: 1.0,
    };

    for _ in 0..cfg.max_iter {
        let theta = sample.quantile(tau);
        let lambda = wqr::update_lambda(ratios, weights, theta, tau)?;
        let tau_next = wqr::update_tau(ratios, weights, theta, lambda);
        params = AldParams {
            theta,
            tau: tau_next,
            lambda,
        };
        let ll = wqr::log_likelihood_unchecked(ratios, weights, &params);

        if let (Some(&last), Some((prev_theta, prev_lambda, prev_tau))) = (trace.last(), prev) {
            let still = rel_change(theta, prev_theta) <= cfg.tol
                && rel_change(lambda, prev_lambda) <= cfg.tol
                && rel_change(tau_next, prev_tau) <= cfg.tol;
            if (ll - last).abs() < cfg.tol && still {
                converged = true;
            }
        }
        trace.push(ll);
        prev = Some((theta, lambda, tau_next));
        tau = tau_next;
        if converged {
            break;
        }
    }

    let std_residuals = ratios
        .iter()
        .zip(weights)
        .map(|(r, w)| w * params.lambda * (r - params.theta))
        .collect();
    Ok(AldFit {
        params,
        iterations: trace.len(),
        loglik_trace: trace,
        converged,
        std_residuals,
    })
}

/// MR-Quantile point fit with weights `1 / se(r_i)`.
pub fn fit_mr_quantile(rs: &RatioSet, cfg: &SolverConfig) -> Result<AldFit> {
    fit_ald(&rs.ratio, &quantile_weights(rs), cfg)
}
