//! Causal-effect estimators on ratio estimates.
//!
//! [`fit_mr_quantile`] is the asymmetric-Laplace MLE with data-driven quantile
//! level; [`fit_ivw`], [`fit_egger`] and [`fit_weighted_median`] are the
//! baselines. Standard errors for the quantile-type estimators come from the
//! parametric bootstrap in [`bootstrap`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ratios::RatioSet;
use crate::summary_data::OutcomeType;

mod baselines;
pub mod bootstrap;
mod mr_quantile;

pub use baselines::{fit_egger, fit_egger_records, fit_ivw, fit_weighted_median, weighted_median};
pub use bootstrap::{bootstrap_ratio_set, bootstrap_replicates, bootstrap_se, BootstrapDraws};
pub use mr_quantile::{fit_ald, fit_mr_quantile, AldFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MrQuantile,
    Ivw,
    Egger,
    WeightedMedian,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::MrQuantile,
        Method::Ivw,
        Method::Egger,
        Method::WeightedMedian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::MrQuantile => "mr_quantile",
            Method::Ivw => "ivw",
            Method::Egger => "egger",
            Method::WeightedMedian => "weighted_median",
        }
    }

    /// Parses a comma-separated list, keeping first occurrences in order.
    pub fn parse_list(s: &str) -> std::result::Result<Vec<Method>, String> {
        let mut out = Vec::new();
        for item in s.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m: Method = item.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err("no methods given".into());
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mr_quantile" | "quantile" => Ok(Method::MrQuantile),
            "ivw" | "mr_ivw" => Ok(Method::Ivw),
            "egger" | "mr_egger" => Ok(Method::Egger),
            "weighted_median" | "mr_weighted_median" | "wm" => Ok(Method::WeightedMedian),
            other => Err(format!(
                "unknown method '{other}' (expected mr-quantile, ivw, egger, weighted-median)"
            )),
        }
    }
}

/// Stopping rule and starting point of the coordinate-ascent solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub tau_init: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-8,
            max_iter: 1000,
            tau_init: 0.5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if !(self.tau_init > 0.0 && self.tau_init < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "tau_init must lie in (0, 1), got {}",
                self.tau_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiKind {
    /// `theta_hat +/- z * se`.
    #[default]
    Normal,
    /// Empirical `alpha/2` and `1 - alpha/2` quantiles of the bootstrap draws.
    Percentile,
}

impl FromStr for CiKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "normal" => Ok(CiKind::Normal),
            "percentile" => Ok(CiKind::Percentile),
            other => Err(format!("unknown CI kind '{other}' (expected normal or percentile)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    pub alpha_level: f64,
    pub ci: CiKind,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_boot: 1000,
            seed: 0,
            alpha_level: 0.05,
            ci: CiKind::Normal,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_boot < 2 {
            return Err(Error::RequiresBge2(self.n_boot));
        }
        check_alpha(self.alpha_level)
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Two-sided normal critical value `z_{1 - alpha/2}`.
pub fn z_critical(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Relative-risk scale of a log-RR estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrScale {
    pub rr: f64,
    pub rr_low: f64,
    pub rr_high: f64,
}

impl RrScale {
    pub fn from_log(theta: f64, low: f64, high: f64) -> Self {
        RrScale {
            rr: theta.exp(),
            rr_low: low.exp(),
            rr_high: high.exp(),
        }
    }
}

/// Method-specific output fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateExtras {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_boot: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub theta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha_level: f64,
    pub ci_kind: CiKind,
    pub n_instruments: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rr_scale: Option<RrScale>,
    pub extras: EstimateExtras,
}

impl EstimateReport {
    /// Report with a symmetric normal-theory interval.
    pub fn normal(
        method: Method,
        theta_hat: f64,
        se: f64,
        alpha_level: f64,
        n_instruments: usize,
        outcome_type: OutcomeType,
    ) -> Self {
        let half = z_critical(alpha_level) * se;
        EstimateReport {
            method,
            theta_hat,
            se,
            ci_low: theta_hat - half,
            ci_high: theta_hat + half,
            alpha_level,
            ci_kind: CiKind::Normal,
            n_instruments,
            rr_scale: None,
            extras: EstimateExtras::default(),
        }
        .with_outcome_type(outcome_type)
    }

    /// Attaches the relative-risk transform for rare binary outcomes.
    pub fn with_outcome_type(mut self, outcome_type: OutcomeType) -> Self {
        self.rr_scale = match outcome_type {
            OutcomeType::BinaryRare => {
                Some(RrScale::from_log(self.theta_hat, self.ci_low, self.ci_high))
            }
            OutcomeType::Continuous => None,
        };
        self
    }

    /// Two-sided test of `theta = 0`: the interval excludes zero.
    pub fn rejects_zero(&self) -> bool {
        self.ci_low > 0.0 || self.ci_high < 0.0
    }
}

/// Fits `method` on `rs`; quantile-type methods get bootstrap SEs.
pub fn fit_method(
    method: Method,
    rs: &RatioSet,
    solver: &SolverConfig,
    boot: &BootstrapConfig,
) -> Result<EstimateReport> {
    match method {
        Method::Ivw => fit_ivw(rs, boot.alpha_level),
        Method::Egger => fit_egger_records(&rs.instruments, rs.outcome_type, boot.alpha_level),
        Method::WeightedMedian => fit_weighted_median(rs, boot),
        Method::MrQuantile => bootstrap_ratio_set(rs, Method::MrQuantile, solver, boot),
    }
}
