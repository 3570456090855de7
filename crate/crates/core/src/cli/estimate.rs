use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    fit_method, fit_mr_quantile, BootstrapConfig, CiKind, EstimateReport, Method, SolverConfig,
};
use crate::ratios::{compute_ratios, quantile_weights, RatioSet};
use crate::summary_data::{
    load_and_harmonize, ColumnMap, Delimiter, OutcomeType, Provenance, DEFAULT_PVAL_THRESHOLD,
};
use crate::wqr::ald_pdf_standard;

use super::output::{self, cell, num, opt_bool, opt_num, Table};
use super::{parse_flag, CommonArgs, Format, RunManifest};

/// Points in the exported residual-density grid.
pub const DENSITY_GRID: usize = 512;

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Exposure GWAS summary statistics.
    #[arg(long)]
    pub exposure: PathBuf,
    /// Outcome GWAS summary statistics.
    #[arg(long)]
    pub outcome: PathBuf,
    /// Exposure column names, e.g. `snp=SNP,beta=BETA,p=PVAL`.
    #[arg(long)]
    pub exposure_cols: Option<String>,
    #[arg(long)]
    pub outcome_cols: Option<String>,
    /// tab or comma (default: comma for .csv files, tab otherwise).
    #[arg(long)]
    pub delimiter: Option<String>,
    /// Exposure p-value threshold for instrument selection.
    #[arg(long, default_value_t = DEFAULT_PVAL_THRESHOLD)]
    pub pval_threshold: f64,
    /// continuous or binary-rare.
    #[arg(long, default_value = "continuous")]
    pub outcome_type: String,
    /// Drop instruments with |beta_x| at or below this value.
    #[arg(long, default_value_t = 0.0)]
    pub min_abs_beta_x: f64,
    /// Per-SNP table and fitted residual density (written to PATH.density.tsv).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Fully resolved estimate configuration.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateConfig {
    pub exposure: String,
    pub outcome: String,
    pub exposure_cols: ColumnMap,
    pub outcome_cols: ColumnMap,
    pub delimiter: Option<Delimiter>,
    pub pval_threshold: f64,
    pub outcome_type: OutcomeType,
    pub min_abs_beta_x: f64,
    pub methods: Vec<Method>,
    pub bootstrap: BootstrapConfig,
    pub solver: SolverConfig,
    pub format: Format,
    pub out: Option<String>,
    pub diagnostics: Option<String>,
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

impl EstimateConfig {
    pub fn resolve(args: &EstimateArgs) -> Result<Self> {
        let c = &args.common;
        let cols = |spec: &Option<String>| match spec {
            Some(s) => ColumnMap::default().with_overrides(s),
            None => Ok(ColumnMap::default()),
        };
        if !(args.pval_threshold > 0.0 && args.pval_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "--pval-threshold must be in (0, 1], got {}",
                args.pval_threshold
            )));
        }
        if !(args.min_abs_beta_x.is_finite() && args.min_abs_beta_x >= 0.0) {
            return Err(Error::InvalidConfig("--min-abs-beta-x must be finite and >= 0".into()));
        }
        let methods = parse_methods(&c.methods)?;
        let cfg = EstimateConfig {
            exposure: display(&args.exposure),
            outcome: display(&args.outcome),
            exposure_cols: cols(&args.exposure_cols)?,
            outcome_cols: cols(&args.outcome_cols)?,
            delimiter: args.delimiter.as_deref().map(parse_flag).transpose()?,
            pval_threshold: args.pval_threshold,
            outcome_type: parse_flag(&args.outcome_type)?,
            min_abs_beta_x: args.min_abs_beta_x,
            methods,
            bootstrap: BootstrapConfig {
                n_boot: c.n_boot,
                seed: c.seed,
                alpha_level: c.alpha,
                ci: parse_flag::<CiKind>(&c.ci)?,
            },
            solver: SolverConfig {
                tol: c.tol,
                max_iter: c.max_iter,
                ..Default::default()
            },
            format: c.format,
            out: c.out.as_deref().map(display),
            diagnostics: args.diagnostics.as_deref().map(display),
        };
        cfg.solver.validate()?;
        let needs_boot = methods_need_bootstrap(&cfg.methods);
        if needs_boot {
            cfg.bootstrap.validate()?;
        } else {
            crate::estimators::check_alpha(cfg.bootstrap.alpha_level)?;
        }
        Ok(cfg)
    }
}

pub(crate) fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = Method::parse_list(list).map_err(Error::InvalidConfig)?;
    if methods.is_empty() {
        return Err(Error::InvalidConfig("--methods is empty".into()));
    }
    Ok(methods)
}

pub(crate) fn methods_need_bootstrap(methods: &[Method]) -> bool {
    methods
        .iter()
        .any(|m| matches!(m, Method::MrQuantile | Method::WeightedMedian))
}

/// A method's report, or why it could not be produced.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum MethodOutcome {
    Fitted(Box<EstimateReport>),
    Failed { error: String },
}

#[derive(Debug, Serialize)]
struct InstrumentSummary {
    n_instruments: usize,
    dropped_weak: usize,
    dropped_degenerate: usize,
}

#[derive(Debug, Serialize)]
struct EstimateOutput<'a> {
    manifest: &'a RunManifest<EstimateConfig>,
    provenance: &'a Provenance,
    instruments: InstrumentSummary,
    estimates: BTreeMap<&'static str, &'a MethodOutcome>,
}

const REPORT_COLUMNS: [&str; 20] = [
    "method",
    "theta_hat",
    "se",
    "ci_low",
    "ci_high",
    "alpha_level",
    "ci_kind",
    "n_instruments",
    "rr",
    "rr_low",
    "rr_high",
    "tau",
    "lambda",
    "converged",
    "iterations",
    "intercept",
    "intercept_se",
    "n_boot",
    "failed_replicates",
    "error",
];

fn report_row(method: Method, outcome: &MethodOutcome) -> Vec<String> {
    let na = || "NA".to_string();
    let count = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_else(na);
    match outcome {
        MethodOutcome::Fitted(r) => {
            let rr = r.rr_scale;
            vec![
                method.as_str().into(),
                num(r.theta_hat),
                num(r.se),
                num(r.ci_low),
                num(r.ci_high),
                num(r.alpha_level),
                match r.ci_kind {
                    CiKind::Normal => "normal".into(),
                    CiKind::Percentile => "percentile".into(),
                },
                r.n_instruments.to_string(),
                opt_num(rr.map(|s| s.rr)),
                opt_num(rr.map(|s| s.rr_low)),
                opt_num(rr.map(|s| s.rr_high)),
                opt_num(r.extras.tau),
                opt_num(r.extras.lambda),
                opt_bool(r.extras.converged),
                count(r.extras.iterations),
                opt_num(r.extras.intercept),
                opt_num(r.extras.intercept_se),
                count(r.extras.n_boot),
                count(r.extras.failed_replicates),
                na(),
            ]
        }
        MethodOutcome::Failed { error } => {
            let mut row = vec![na(); REPORT_COLUMNS.len()];
            row[0] = method.as_str().into();
            row[REPORT_COLUMNS.len() - 1] = cell(error);
            row
        }
    }
}

/// Per-SNP diagnostics and the fitted standardized residual density.
fn diagnostics(rs: &RatioSet, solver: &SolverConfig, manifest: &str) -> Result<(Table, Table)> {
    let fit = fit_mr_quantile(rs, solver)?;
    let weights = quantile_weights(rs);
    let mut snps = Table::new(vec!["snp_id", "ratio", "se_ratio", "weight", "std_residual"])
        .comment(manifest);
    for (i, se) in rs.se_ratio().into_iter().enumerate() {
        snps.push(vec![
            cell(&rs.snp_ids[i]),
            num(rs.ratio[i]),
            num(se),
            num(weights[i]),
            num(fit.std_residuals[i]),
        ]);
    }

    let tau = fit.params.tau;
    let (lo, hi) = fit
        .std_residuals
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let (lo, hi) = (lo - 1.0, hi + 1.0);
    let step = (hi - lo) / (DENSITY_GRID - 1) as f64;
    let mut density = Table::new(vec!["std_residual", "density"])
        .comment(manifest)
        .comment(format!("fitted ALD(0, tau = {}, 1)", num(tau)));
    for k in 0..DENSITY_GRID {
        let e = if k == DENSITY_GRID - 1 { hi } else { lo + step * k as f64 };
        density.push(vec![num(e), num(ald_pdf_standard(e, tau))]);
    }
    Ok((snps, density))
}

/// Runs `mrq estimate`. Returns 0 when every method succeeded, otherwise the
/// exit code of the first failure; the report is written either way.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<i32> {
    let cfg = EstimateConfig::resolve(args)?;
    let data = load_and_harmonize(
        &args.exposure,
        &args.outcome,
        &cfg.exposure_cols,
        &cfg.outcome_cols,
        cfg.delimiter,
        cfg.pval_threshold,
    )?
    .with_outcome_type(cfg.outcome_type);
    let rs = compute_ratios(&data, cfg.min_abs_beta_x)?;

    let mut exit = 0;
    let outcomes: Vec<(Method, MethodOutcome)> = cfg
        .methods
        .iter()
        .map(|&m| {
            let outcome = match fit_method(m, &rs, &cfg.solver, &cfg.bootstrap) {
                Ok(r) => MethodOutcome::Fitted(Box::new(r)),
                Err(e) => {
                    eprintln!("error: {m}: {e}");
                    if exit == 0 {
                        exit = e.exit_code();
                    }
                    MethodOutcome::Failed { error: e.to_string() }
                }
            };
            (m, outcome)
        })
        .collect();

    let manifest = RunManifest::new("estimate", cfg.clone(), args.common.stamp);
    let text = match cfg.format {
        Format::Json => output::to_json(&EstimateOutput {
            manifest: &manifest,
            provenance: &data.provenance,
            instruments: InstrumentSummary {
                n_instruments: rs.len(),
                dropped_weak: rs.dropped_weak,
                dropped_degenerate: rs.dropped_degenerate,
            },
            estimates: outcomes.iter().map(|(m, o)| (m.as_str(), o)).collect(),
        }),
        Format::Tsv => {
            let provenance = serde_json::to_string(&data.provenance).expect("plain data serializes");
            let mut t = Table::new(REPORT_COLUMNS.to_vec())
                .comment(manifest.one_line())
                .comment(format!("provenance: {provenance}"));
            for (m, o) in &outcomes {
                t.push(report_row(*m, o));
            }
            t.render()
        }
    };
    match &args.common.out {
        Some(path) => output::write_file(path, &text)?,
        None => print!("{text}"),
    }

    if let Some(path) = &args.diagnostics {
        let (snps, density) = diagnostics(&rs, &cfg.solver, &manifest.one_line())?;
        output::write_file(path, &snps.render())?;
        output::write_file(&output::sibling(path, ".density.tsv"), &density.render())?;
    }
    Ok(exit)
}
