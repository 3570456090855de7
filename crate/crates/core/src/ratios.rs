//! Wald ratio estimates and their first-order (delta-method) variances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summary_data::{HarmonizedSet, InstrumentRecord, OutcomeType};

/// Ratio variances below this are rejected; their weights would overflow.
pub const MIN_RATIO_VARIANCE: f64 = 1e-30;

/// Per-SNP ratio estimates `beta_y / beta_x` aligned with the instruments
/// they were computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSet {
    pub ratio: Vec<f64>,
    pub var_ratio: Vec<f64>,
    pub snp_ids: Vec<String>,
    /// The instruments behind each ratio, same order.
    pub instruments: Vec<InstrumentRecord>,
    pub outcome_type: OutcomeType,
    pub min_abs_beta_x: f64,
    pub dropped_weak: usize,
    pub dropped_degenerate: usize,
}

/// Delta-method variance of `beta_y / beta_x` for independent estimates.
pub fn ratio_variance(beta_x: f64, se_x: f64, beta_y: f64, se_y: f64) -> f64 {
    let bx2 = beta_x * beta_x;
    se_y * se_y / bx2 + beta_y * beta_y * se_x * se_x / (bx2 * bx2)
}

impl RatioSet {
    /// Forms ratios from records, dropping those with `|beta_x| <= min_abs_beta_x`
    /// or a degenerate variance.
    pub fn from_records(
        records: &[InstrumentRecord],
        outcome_type: OutcomeType,
        min_abs_beta_x: f64,
    ) -> Result<Self> {
        if !(min_abs_beta_x >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "min_abs_beta_x must be >= 0 (got {min_abs_beta_x})"
            )));
        }
        let mut rs = RatioSet {
            ratio: Vec::with_capacity(records.len()),
            var_ratio: Vec::with_capacity(records.len()),
            snp_ids: Vec::with_capacity(records.len()),
            instruments: Vec::with_capacity(records.len()),
            outcome_type,
            min_abs_beta_x,
            dropped_weak: 0,
            dropped_degenerate: 0,
        };
        for rec in records {
            if !(rec.beta_x.abs() > min_abs_beta_x) {
                rs.dropped_weak += 1;
                continue;
            }
            let ratio = rec.beta_y / rec.beta_x;
            let var = ratio_variance(rec.beta_x, rec.se_x, rec.beta_y, rec.se_y);
            if !(ratio.is_finite() && var.is_finite() && var >= MIN_RATIO_VARIANCE) {
                rs.dropped_degenerate += 1;
                continue;
            }
            rs.ratio.push(ratio);
            rs.var_ratio.push(var);
            rs.snp_ids.push(rec.snp_id.clone());
            rs.instruments.push(rec.clone());
        }
        if rs.ratio.is_empty() {
            return Err(Error::AllInstrumentsDropped);
        }
        Ok(rs)
    }

    pub fn len(&self) -> usize {
        self.ratio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratio.is_empty()
    }

    pub fn se_ratio(&self) -> Vec<f64> {
        self.var_ratio.iter().map(|v| v.sqrt()).collect()
    }
}

pub fn compute_ratios(data: &HarmonizedSet, min_abs_beta_x: f64) -> Result<RatioSet> {
    RatioSet::from_records(&data.records, data.outcome_type, min_abs_beta_x)
}

/// `1 / se(r_i)`: the weights scaling the ALD inverse-scale per instrument.
pub fn quantile_weights(rs: &RatioSet) -> Vec<f64> {
    rs.var_ratio.iter().map(|v| 1.0 / v.sqrt()).collect()
}

/// `1 / Var(r_i)`: the weighted-median weights.
pub fn median_weights(rs: &RatioSet) -> Vec<f64> {
    rs.var_ratio.iter().map(|v| 1.0 / v).collect()
}
