use crate::error::{Error, Result};
use crate::ratios::{median_weights, RatioSet};
use crate::summary_data::{HarmonizedSet, InstrumentRecord, OutcomeType};
use crate::wqr::weighted_quantile;

use super::{bootstrap_ratio_set, check_alpha, BootstrapConfig, EstimateReport, Method, SolverConfig};

fn require_outcome_se(records: &[InstrumentRecord], method: &str) -> Result<()> {
    match records.iter().find(|r| !(r.se_y > 0.0)) {
        Some(r) => Err(Error::InvalidInstrument {
            snp_id: r.snp_id.clone(),
            reason: format!("{method} needs se_y > 0"),
        }),
        None => Ok(()),
    }
}

/// Inverse-variance weighted mean of the ratios, weights `beta_x^2 / se_y^2`.
///
/// The standard error is the fixed-effect one from regressing `beta_y` on
/// `beta_x` through the origin with weights `se_y^-2`.
pub fn fit_ivw(rs: &RatioSet, alpha: f64) -> Result<EstimateReport> {
    check_alpha(alpha)?;
    if rs.is_empty() {
        return Err(Error::EmptyInput);
    }
    require_outcome_se(&rs.instruments, "IVW")?;
    let mut sum_v = 0.0;
    let mut sum_vr = 0.0;
    for (rec, r) in rs.instruments.iter().zip(&rs.ratio) {
        let v = rec.beta_x * rec.beta_x / (rec.se_y * rec.se_y);
        sum_v += v;
        sum_vr += v * r;
    }
    let theta = sum_vr / sum_v;
    let se = sum_v.sqrt().recip();
    Ok(EstimateReport::normal(
        Method::Ivw,
        theta,
        se,
        alpha,
        rs.len(),
        rs.outcome_type,
    ))
}

/// MR-Egger on a harmonized set.
pub fn fit_egger(data: &HarmonizedSet, alpha: f64) -> Result<EstimateReport> {
    fit_egger_records(&data.records, data.outcome_type, alpha)
}

/// Weighted regression of `beta_y` on `beta_x` with a free intercept and
/// weights `se_y^-2`, after orienting every instrument to `beta_x >= 0`.
///
/// Standard errors use the residual scale, floored at one.
pub fn fit_egger_records(
    records: &[InstrumentRecord],
    outcome_type: OutcomeType,
    alpha: f64,
) -> Result<EstimateReport> {
    check_alpha(alpha)?;
    let p = records.len();
    if p < 3 {
        return Err(Error::TooFewInstruments {
            method: "egger",
            needed: 3,
            got: p,
        });
    }
    require_outcome_se(records, "MR-Egger")?;

    let oriented: Vec<(f64, f64, f64)> = records
        .iter()
        .map(|r| {
            let u = 1.0 / (r.se_y * r.se_y);
            if r.beta_x < 0.0 {
                (-r.beta_x, -r.beta_y, u)
            } else {
                (r.beta_x, r.beta_y, u)
            }
        })
        .collect();

    let sum_u: f64 = oriented.iter().map(|o| o.2).sum();
    let x_bar = oriented.iter().map(|(x, _, u)| u * x).sum::<f64>() / sum_u;
    let y_bar = oriented.iter().map(|(_, y, u)| u * y).sum::<f64>() / sum_u;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y, u) in &oriented {
        sxx += u * (x - x_bar) * (x - x_bar);
        sxy += u * (x - x_bar) * (y - y_bar);
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit(
            "MR-Egger: oriented exposure effects have no spread".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = oriented
        .iter()
        .map(|(x, y, u)| {
            let e = y - intercept - slope * x;
            u * e * e
        })
        .sum();
    let sigma = (rss / (p - 2) as f64).sqrt();
    let scale = sigma.max(1.0);
    let se_slope = scale / sxx.sqrt();
    let se_intercept = scale * (1.0 / sum_u + x_bar * x_bar / sxx).sqrt();

    let mut report = EstimateReport::normal(Method::Egger, slope, se_slope, alpha, p, outcome_type);
    report.extras.intercept = Some(intercept);
    report.extras.intercept_se = Some(se_intercept);
    Ok(report)
}

/// Weighted median of the ratios with weights `1 / Var(r_i)`.
pub fn weighted_median(rs: &RatioSet) -> Result<f64> {
    weighted_quantile(&rs.ratio, &median_weights(rs), 0.5)
}

/// Weighted median with a parametric-bootstrap standard error.
pub fn fit_weighted_median(rs: &RatioSet, boot: &BootstrapConfig) -> Result<EstimateReport> {
    bootstrap_ratio_set(rs, Method::WeightedMedian, &SolverConfig::default(), boot)
}
