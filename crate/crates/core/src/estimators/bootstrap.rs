//! Parametric bootstrap over summary statistics.
//!
//! Replicate `b` redraws every `beta_x ~ N(beta_x, se_x^2)` and
//! `beta_y ~ N(beta_y, se_y^2)` from its own random stream `(seed, b)`, then
//! recomputes ratios and weights and refits from scratch.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ratios::{compute_ratios, quantile_weights, RatioSet};
use crate::rng::keyed_rng;
use crate::summary_data::{HarmonizedSet, InstrumentRecord};

use super::{
    fit_ald, weighted_median, z_critical, AldFit, BootstrapConfig, CiKind, EstimateReport, Method,
    SolverConfig,
};

/// Redraws each instrument's betas around their estimates; SEs are kept.
pub fn resample_instruments<R: Rng + ?Sized>(
    records: &[InstrumentRecord],
    rng: &mut R,
) -> Vec<InstrumentRecord> {
    records
        .iter()
        .map(|rec| {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            InstrumentRecord {
                beta_x: rec.beta_x + rec.se_x * zx,
                beta_y: rec.beta_y + rec.se_y * zy,
                ..rec.clone()
            }
        })
        .collect()
}

struct PointFit {
    theta: f64,
    ald: Option<AldFit>,
}

fn point_fit(method: Method, rs: &RatioSet, cfg: &SolverConfig) -> Result<PointFit> {
    match method {
        Method::MrQuantile => {
            let fit = fit_ald(&rs.ratio, &quantile_weights(rs), cfg)?;
            Ok(PointFit {
                theta: fit.params.theta,
                ald: Some(fit),
            })
        }
        Method::WeightedMedian => Ok(PointFit {
            theta: weighted_median(rs)?,
            ald: None,
        }),
        other => Err(Error::UnsupportedBootstrap(other.as_str())),
    }
}

/// Bootstrap estimates in replicate order, with failed replicates removed.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    pub thetas: Vec<f64>,
    pub failed: usize,
}

impl BootstrapDraws {
    /// Sample standard deviation (divisor `n - 1`).
    pub fn sd(&self) -> f64 {
        let n = self.thetas.len() as f64;
        let mean = self.thetas.iter().sum::<f64>() / n;
        let ss: f64 = self.thetas.iter().map(|t| (t - mean) * (t - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    }
}

/// Refits `method` on `boot.n_boot` resampled data sets.
pub fn bootstrap_replicates(
    rs: &RatioSet,
    method: Method,
    cfg: &SolverConfig,
    boot: &BootstrapConfig,
) -> Result<BootstrapDraws> {
    boot.validate()?;
    if !matches!(method, Method::MrQuantile | Method::WeightedMedian) {
        return Err(Error::UnsupportedBootstrap(method.as_str()));
    }
    let results: Vec<Option<f64>> = (0..boot.n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = keyed_rng(boot.seed, &[b as u64]);
            let records = resample_instruments(&rs.instruments, &mut rng);
            RatioSet::from_records(&records, rs.outcome_type, rs.min_abs_beta_x)
                .and_then(|resampled| point_fit(method, &resampled, cfg))
                .ok()
                .map(|fit| fit.theta)
        })
        .collect();
    let thetas: Vec<f64> = results.iter().flatten().copied().collect();
    let failed = results.len() - thetas.len();
    if failed * 20 >= boot.n_boot {
        return Err(Error::TooManyFailedReplicates {
            failed,
            total: boot.n_boot,
        });
    }
    Ok(BootstrapDraws { thetas, failed })
}

/// Linear-interpolation quantile of sorted data.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Point fit on the original ratios plus bootstrap SE and interval.
pub fn bootstrap_ratio_set(
    rs: &RatioSet,
    method: Method,
    cfg: &SolverConfig,
    boot: &BootstrapConfig,
) -> Result<EstimateReport> {
    boot.validate()?;
    let fit = point_fit(method, rs, cfg)?;
    let draws = bootstrap_replicates(rs, method, cfg, boot)?;
    let se = draws.sd();

    let (ci_low, ci_high) = match boot.ci {
        CiKind::Normal => {
            let half = z_critical(boot.alpha_level) * se;
            (fit.theta - half, fit.theta + half)
        }
        CiKind::Percentile => {
            let mut sorted = draws.thetas.clone();
            sorted.sort_by(f64::total_cmp);
            (
                empirical_quantile(&sorted, boot.alpha_level / 2.0),
                empirical_quantile(&sorted, 1.0 - boot.alpha_level / 2.0),
            )
        }
    };
    let mut report = EstimateReport {
        method,
        theta_hat: fit.theta,
        se,
        ci_low,
        ci_high,
        alpha_level: boot.alpha_level,
        ci_kind: boot.ci,
        n_instruments: rs.len(),
        rr_scale: None,
        extras: Default::default(),
    }
    .with_outcome_type(rs.outcome_type);
    if let Some(ald) = fit.ald {
        report.extras.tau = Some(ald.params.tau);
        report.extras.lambda = Some(ald.params.lambda);
        report.extras.converged = Some(ald.converged);
        report.extras.iterations = Some(ald.iterations);
    }
    report.extras.n_boot = Some(boot.n_boot);
    report.extras.failed_replicates = Some(draws.failed);
    Ok(report)
}

/// Bootstrap report for `method` on a harmonized set (no exposure-effect
/// threshold beyond dropping exact zeros).
pub fn bootstrap_se(
    data: &HarmonizedSet,
    method: Method,
    cfg: &SolverConfig,
    boot: &BootstrapConfig,
) -> Result<EstimateReport> {
    let rs = compute_ratios(data, 0.0)?;
    bootstrap_ratio_set(&rs, method, cfg, boot)
}
