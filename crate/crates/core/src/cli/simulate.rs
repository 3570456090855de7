use clap::Args;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{BootstrapConfig, CiKind, Method, SolverConfig};
use crate::simulation::{run_study, Design, Scenario, SimulationResult, StrongSimConfig, WeakSimConfig};

use super::estimate::{methods_need_bootstrap, parse_methods};
use super::output::{self, cell, num, opt_bool, opt_num, Table};
use super::{parse_flag, CommonArgs, Format, RunManifest};

/// Design parameters are named after the simulation config fields. Flags of
/// the other design are rejected.
#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// strong (individual-level) or weak (summary-level).
    #[arg(long)]
    pub design: String,
    /// Sample size of each GWAS.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of instruments.
    #[arg(long)]
    pub p: Option<usize>,
    /// Strong: no-pleiotropy, uncorrelated or correlated.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Strong: fraction of invalid instruments.
    #[arg(long)]
    pub q: Option<f64>,
    /// Strong: true causal effect.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Strong: confounder effect on the exposure.
    #[arg(long)]
    pub beta_xu: Option<f64>,
    /// Strong: confounder effect on the outcome.
    #[arg(long)]
    pub beta_yu: Option<f64>,
    /// Weak: number of invalid instruments.
    #[arg(long)]
    pub m: Option<usize>,
    /// Weak: variance explained by direct pleiotropy.
    #[arg(long)]
    pub h_y2: Option<f64>,
    /// Weak: variance explained by correlated pleiotropy.
    #[arg(long)]
    pub h_u2: Option<f64>,
    /// Weak: exposure variance explained by the instruments.
    #[arg(long)]
    pub h_x2: Option<f64>,
    /// Weak: true causal effect.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Monte Carlo replicates.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Fully resolved simulation configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub design: Design,
    pub reps: usize,
    pub methods: Vec<Method>,
    pub bootstrap: BootstrapConfig,
    pub solver: SolverConfig,
    pub format: Format,
    pub out: Option<String>,
}

fn reject_foreign(design: &str, given: &[(&str, bool)]) -> Result<()> {
    match given.iter().find(|(_, set)| *set) {
        Some((flag, _)) => Err(Error::InvalidConfig(format!(
            "--{flag} does not apply to the {design} design"
        ))),
        None => Ok(()),
    }
}

fn resolve_design(a: &SimulateArgs) -> Result<Design> {
    let seed = a.common.seed;
    let design = match a.design.as_str() {
        "strong" => {
            reject_foreign(
                "strong",
                &[
                    ("m", a.m.is_some()),
                    ("h-y2", a.h_y2.is_some()),
                    ("h-u2", a.h_u2.is_some()),
                    ("h-x2", a.h_x2.is_some()),
                    ("theta", a.theta.is_some()),
                ],
            )?;
            let d = StrongSimConfig::default();
            Design::Strong(StrongSimConfig {
                n: a.n.unwrap_or(d.n),
                p: a.p.unwrap_or(d.p),
                scenario: match &a.scenario {
                    Some(s) => parse_flag::<Scenario>(s)?,
                    None => d.scenario,
                },
                q: a.q.unwrap_or(d.q),
                theta0: a.theta0.unwrap_or(d.theta0),
                beta_xu: a.beta_xu.unwrap_or(d.beta_xu),
                beta_yu: a.beta_yu.unwrap_or(d.beta_yu),
                seed,
            })
        }
        "weak" => {
            reject_foreign(
                "weak",
                &[
                    ("scenario", a.scenario.is_some()),
                    ("q", a.q.is_some()),
                    ("theta0", a.theta0.is_some()),
                    ("beta-xu", a.beta_xu.is_some()),
                    ("beta-yu", a.beta_yu.is_some()),
                ],
            )?;
            let d = WeakSimConfig::default();
            Design::Weak(WeakSimConfig {
                n: a.n.unwrap_or(d.n),
                p: a.p.unwrap_or(d.p),
                m: a.m.unwrap_or(d.m),
                h_y2: a.h_y2.unwrap_or(d.h_y2),
                h_u2: a.h_u2.unwrap_or(d.h_u2),
                h_x2: a.h_x2.unwrap_or(d.h_x2),
                theta: a.theta.unwrap_or(d.theta),
                seed,
            })
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown design '{other}' (expected strong or weak)"
            )))
        }
    };
    design.validate()?;
    Ok(design)
}

impl SimulateConfig {
    pub fn resolve(a: &SimulateArgs) -> Result<Self> {
        let c = &a.common;
        let cfg = SimulateConfig {
            design: resolve_design(a)?,
            reps: a.reps,
            methods: parse_methods(&c.methods)?,
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
            out: c.out.as_ref().map(|p| p.display().to_string()),
        };
        cfg.solver.validate()?;
        if methods_need_bootstrap(&cfg.methods) {
            cfg.bootstrap.validate()?;
        } else {
            crate::estimators::check_alpha(cfg.bootstrap.alpha_level)?;
        }
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    manifest: &'a RunManifest<SimulateConfig>,
    result: &'a SimulationResult,
}

fn replicate_table(result: &SimulationResult, manifest: &str) -> Table {
    let mut t = Table::new(vec![
        "rep", "method", "theta_hat", "se", "ci_low", "ci_high", "reject", "converged", "error",
    ])
    .comment(manifest);
    for r in &result.replicates {
        t.push(vec![
            r.rep.to_string(),
            r.method.as_str().into(),
            opt_num(r.theta_hat),
            opt_num(r.se),
            opt_num(r.ci_low),
            opt_num(r.ci_high),
            opt_bool(r.reject),
            opt_bool(r.converged),
            r.error.as_deref().map(cell).unwrap_or_else(|| "NA".into()),
        ]);
    }
    t
}

fn summary_table(result: &SimulationResult, manifest: &str) -> Table {
    let mut t = Table::new(vec![
        "method",
        "n_ok",
        "n_failed",
        "mean",
        "bias",
        "sd",
        "rmse",
        "mean_se",
        "rejection_rate",
    ])
    .comment(manifest)
    .comment(format!("sd convention: {}", result.sd_convention));
    for a in &result.aggregates {
        t.push(vec![
            a.method.as_str().into(),
            a.n_ok.to_string(),
            a.n_failed.to_string(),
            num(a.mean),
            num(a.bias),
            num(a.sd),
            num(a.rmse),
            num(a.mean_se),
            num(a.rejection_rate),
        ]);
    }
    t
}

/// Runs `mrq simulate`. JSON goes to `--out`; TSV writes replicates to
/// `--out` and aggregates to `<out>.summary.tsv`.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let cfg = SimulateConfig::resolve(args)?;
    let result = run_study(&cfg.design, &cfg.methods, cfg.reps, &cfg.bootstrap, &cfg.solver)?;
    let manifest = RunManifest::new("simulate", cfg.clone(), args.common.stamp);
    let line = manifest.one_line();
    match (cfg.format, &args.common.out) {
        (Format::Json, out) => {
            let text = output::to_json(&SimulateOutput {
                manifest: &manifest,
                result: &result,
            });
            match out {
                Some(path) => output::write_file(path, &text)?,
                None => print!("{text}"),
            }
        }
        (Format::Tsv, Some(path)) => {
            output::write_file(path, &replicate_table(&result, &line).render())?;
            let summary = output::sibling(path, ".summary.tsv");
            output::write_file(&summary, &summary_table(&result, &line).render())?;
        }
        (Format::Tsv, None) => {
            print!("{}", summary_table(&result, &line).render());
            println!();
            print!("{}", replicate_table(&result, &line).render());
        }
    }
    Ok(0)
}
