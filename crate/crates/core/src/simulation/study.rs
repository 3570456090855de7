use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{fit_method, BootstrapConfig, Method, SolverConfig};
use crate::ratios::compute_ratios;
use crate::rng::stream_id;

use super::Design;

/// One method fitted on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub rep: usize,
    pub method: Method,
    pub theta_hat: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Interval excludes zero at the configured alpha.
    pub reject: Option<bool>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

/// Performance of one method across replicates. `sd` uses divisor R, so
/// `rmse^2 = bias^2 + sd^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub mean_se: f64,
    pub rejection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub design: Design,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub bootstrap: BootstrapConfig,
    pub solver: SolverConfig,
    pub sd_convention: String,
    pub aggregates: Vec<Aggregate>,
    pub replicates: Vec<ReplicateRow>,
}

impl SimulationResult {
    pub fn aggregate(&self, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }
}

/// Bias, SD, RMSE and rejection rate of the successful fits.
pub fn summarize(method: Method, rows: &[&ReplicateRow], theta0: f64) -> Aggregate {
    let ok: Vec<&ReplicateRow> = rows.iter().copied().filter(|r| r.theta_hat.is_some()).collect();
    let n = ok.len() as f64;
    let thetas: Vec<f64> = ok.iter().filter_map(|r| r.theta_hat).collect();
    let mean = thetas.iter().sum::<f64>() / n;
    let sd = (thetas.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n).sqrt();
    let rmse = (thetas.iter().map(|t| (t - theta0) * (t - theta0)).sum::<f64>() / n).sqrt();
    let mean_se = ok.iter().filter_map(|r| r.se).sum::<f64>() / n;
    let rejections = ok.iter().filter(|r| r.reject == Some(true)).count() as f64;
    Aggregate {
        method,
        n_ok: ok.len(),
        n_failed: rows.len() - ok.len(),
        mean,
        bias: mean - theta0,
        sd,
        rmse,
        mean_se,
        rejection_rate: rejections / n,
    }
}

fn run_replicate(
    design: &Design,
    rep: usize,
    methods: &[Method],
    boot: &BootstrapConfig,
    solver: &SolverConfig,
) -> Vec<ReplicateRow> {
    let data = design.generate(rep);
    let rs = compute_ratios(&data, 0.0);
    let rep_boot = BootstrapConfig {
        seed: stream_id(&[boot.seed, rep as u64]),
        ..*boot
    };
    methods
        .iter()
        .map(|&method| {
            let fit = rs
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|rs| fit_method(method, rs, solver, &rep_boot).map_err(|e| e.to_string()));
            match fit {
                Ok(r) => ReplicateRow {
                    rep,
                    method,
                    theta_hat: Some(r.theta_hat),
                    se: Some(r.se),
                    ci_low: Some(r.ci_low),
                    ci_high: Some(r.ci_high),
                    reject: Some(r.rejects_zero()),
                    converged: r.extras.converged,
                    error: None,
                },
                Err(e) => ReplicateRow {
                    rep,
                    method,
                    theta_hat: None,
                    se: None,
                    ci_low: None,
                    ci_high: None,
                    reject: None,
                    converged: None,
                    error: Some(e),
                },
            }
        })
        .collect()
}

/// Runs `reps` replicates of `design`, fitting every method on each.
///
/// Failed fits are kept as rows with an error and excluded from aggregates.
/// Replicate `r` bootstraps from stream seed `(boot.seed, r)`.
pub fn run_study(
    design: &Design,
    methods: &[Method],
    reps: usize,
    boot: &BootstrapConfig,
    solver: &SolverConfig,
) -> Result<SimulationResult> {
    design.validate()?;
    solver.validate()?;
    boot.validate()?;
    if reps < 2 {
        return Err(Error::InvalidConfig(format!("reps must be >= 2, got {reps}")));
    }
    if methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }

    let replicates: Vec<ReplicateRow> = (0..reps)
        .into_par_iter()
        .map(|rep| run_replicate(design, rep, methods, boot, solver))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let aggregates = methods
        .iter()
        .map(|&m| {
            let rows: Vec<&ReplicateRow> = replicates.iter().filter(|r| r.method == m).collect();
            summarize(m, &rows, design.theta0())
        })
        .collect();

    Ok(SimulationResult {
        design: *design,
        methods: methods.to_vec(),
        reps,
        bootstrap: *boot,
        solver: *solver,
        sd_convention: "population (divisor R)".into(),
        aggregates,
        replicates,
    })
}
