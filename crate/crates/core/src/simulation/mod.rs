//! Monte Carlo data generators and the study runner.
//!
//! Two designs are available. The strong-pleiotropy design simulates
//! individual-level genotypes, confounder, exposure and outcome for two
//! independent samples and computes marginal per-SNP regressions. The weak
//! invalid-IV design draws summary statistics directly from normals.
//!
//! All draws come from [`crate::rng::keyed_rng`] streams keyed by
//! `(seed, replicate, ...)`, so a replicate is reproducible on its own.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::keyed_rng;
use crate::summary_data::{HarmonizedSet, InstrumentRecord, OutcomeType, Provenance};

mod study;

pub use study::{run_study, summarize, Aggregate, ReplicateRow, SimulationResult};

const TAG_INVALID: u64 = 1;
const TAG_EFFECT: u64 = 2;
const TAG_GENOTYPE: u64 = 3;
const TAG_NOISE: u64 = 4;
const TAG_WEAK: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Every variant is a valid instrument.
    NoPleiotropy,
    /// Invalid variants carry direct effects on the outcome.
    Uncorrelated,
    /// Invalid variants also act through the confounder.
    Correlated,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "no_pleiotropy" | "1" => Ok(Scenario::NoPleiotropy),
            "uncorrelated" | "2" => Ok(Scenario::Uncorrelated),
            "correlated" | "3" => Ok(Scenario::Correlated),
            other => Err(format!(
                "unknown scenario '{other}' (expected no-pleiotropy, uncorrelated, correlated)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongSimConfig {
    pub n: usize,
    pub p: usize,
    pub scenario: Scenario,
    pub q: f64,
    pub theta0: f64,
    pub beta_xu: f64,
    pub beta_yu: f64,
    pub seed: u64,
}

impl Default for StrongSimConfig {
    fn default() -> Self {
        StrongSimConfig {
            n: 50_000,
            p: 30,
            scenario: Scenario::NoPleiotropy,
            q: 0.0,
            theta0: 0.0,
            beta_xu: 1.0,
            beta_yu: 1.0,
            seed: 0,
        }
    }
}

impl StrongSimConfig {
    /// Number of invalid instruments, `round(q * p)`.
    pub fn m(&self) -> usize {
        (self.q * self.p as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 3 {
            return bad(format!("n must be >= 3, got {}", self.n));
        }
        if self.p == 0 {
            return bad("p must be >= 1".into());
        }
        if !(self.q >= 0.0 && self.q < 1.0) {
            return bad(format!("q must lie in [0, 1), got {}", self.q));
        }
        match (self.scenario, self.q == 0.0) {
            (Scenario::NoPleiotropy, false) => {
                return bad(format!("scenario no_pleiotropy requires q = 0, got {}", self.q))
            }
            (Scenario::Uncorrelated | Scenario::Correlated, true) => {
                return bad("pleiotropic scenarios require q > 0".into())
            }
            _ => {}
        }
        for (name, v) in [
            ("theta0", self.theta0),
            ("beta_xu", self.beta_xu),
            ("beta_yu", self.beta_yu),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}

/// Per-replicate variant effects of the strong design.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongEffects {
    pub maf: Vec<f64>,
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    pub invalid: Vec<bool>,
}

pub fn draw_strong_effects(cfg: &StrongSimConfig, rep: usize) -> StrongEffects {
    let p = cfg.p;
    let mut invalid = vec![false; p];
    let mut rng = keyed_rng(cfg.seed, &[rep as u64, TAG_INVALID]);
    for i in index::sample(&mut rng, p, cfg.m().min(p)) {
        invalid[i] = true;
    }

    let mut fx = StrongEffects {
        maf: Vec::with_capacity(p),
        gamma: Vec::with_capacity(p),
        alpha: Vec::with_capacity(p),
        phi: Vec::with_capacity(p),
        invalid,
    };
    for i in 0..p {
        let mut rng = keyed_rng(cfg.seed, &[rep as u64, TAG_EFFECT, i as u64]);
        let maf = rng.random_range(0.1..0.3);
        let magnitude = rng.random_range(0.1..0.2);
        let gamma = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        let alpha_draw = rng.random_range(0.2..0.3);
        let phi_draw = rng.random_range(-0.1..0.1);
        let inv = fx.invalid[i];
        fx.maf.push(maf);
        fx.gamma.push(gamma);
        fx.alpha.push(if inv && cfg.scenario != Scenario::NoPleiotropy {
            alpha_draw
        } else {
            0.0
        });
        fx.phi.push(if inv && cfg.scenario == Scenario::Correlated {
            phi_draw
        } else {
            0.0
        });
    }
    fx
}

/// Simple linear regression of `y` on one genotype, both mean-centered.
/// Returns `(beta, se)`; a monomorphic genotype gives `(0, inf)`.
pub fn marginal_regression(g: &[u8], y: &[f64]) -> (f64, f64) {
    let n = g.len() as f64;
    let g_bar = g.iter().map(|&v| v as f64).sum::<f64>() / n;
    let y_bar = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&gi, &yi) in g.iter().zip(y) {
        let dg = gi as f64 - g_bar;
        let dy = yi - y_bar;
        sxx += dg * dg;
        sxy += dg * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let beta = sxy / sxx;
    let rss = (syy - beta * sxy).max(0.0);
    let sigma2 = rss / (n - 2.0);
    (beta, (sigma2 / sxx).sqrt())
}

/// Genotypes of one sample, one `Vec` per SNP.
pub fn draw_genotypes(cfg: &StrongSimConfig, fx: &StrongEffects, rep: usize, sample: u64) -> Vec<Vec<u8>> {
    fx.maf
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let mut rng = keyed_rng(cfg.seed, &[rep as u64, TAG_GENOTYPE, sample, i as u64]);
            let dist = Binomial::new(2, f).expect("maf lies in (0, 1)");
            (0..cfg.n).map(|_| dist.sample(&mut rng) as u8).collect()
        })
        .collect()
}

/// Exposure and outcome of one sample from the structural model.
fn simulate_traits(
    cfg: &StrongSimConfig,
    fx: &StrongEffects,
    genotypes: &[Vec<u8>],
    rep: usize,
    sample: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n = cfg.n;
    let mut u_score = vec![0.0; n];
    let mut x_score = vec![0.0; n];
    let mut y_score = vec![0.0; n];
    for (i, g) in genotypes.iter().enumerate() {
        let (phi, gamma, alpha) = (fx.phi[i], fx.gamma[i], fx.alpha[i]);
        for j in 0..n {
            let gj = g[j] as f64;
            u_score[j] += phi * gj;
            x_score[j] += gamma * gj;
            y_score[j] += alpha * gj;
        }
    }
    let mut rng = keyed_rng(cfg.seed, &[rep as u64, TAG_NOISE, sample]);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for j in 0..n {
        let eu: f64 = rng.sample(StandardNormal);
        let ex: f64 = rng.sample(StandardNormal);
        let ey: f64 = rng.sample(StandardNormal);
        let u = u_score[j] + eu;
        let xj = x_score[j] + cfg.beta_xu * u + ex;
        let yj = cfg.theta0 * xj + y_score[j] + cfg.beta_yu * u + ey;
        x.push(xj);
        y.push(yj);
    }
    (x, y)
}

/// One replicate of the strong design: outcome associations from sample 1,
/// exposure associations from sample 2.
pub fn generate_strong(cfg: &StrongSimConfig, rep: usize) -> HarmonizedSet {
    let fx = draw_strong_effects(cfg, rep);

    let g_outcome = draw_genotypes(cfg, &fx, rep, 0);
    let (_, y) = simulate_traits(cfg, &fx, &g_outcome, rep, 0);
    let g_exposure = draw_genotypes(cfg, &fx, rep, 1);
    let (x, _) = simulate_traits(cfg, &fx, &g_exposure, rep, 1);

    let records: Vec<InstrumentRecord> = (0..cfg.p)
        .map(|i| {
            let (beta_y, se_y) = marginal_regression(&g_outcome[i], &y);
            let (beta_x, se_x) = marginal_regression(&g_exposure[i], &x);
            InstrumentRecord::new(format!("snp{}", i + 1), beta_x, se_x, beta_y, se_y)
        })
        .collect();
    simulated_set(records)
}

fn simulated_set(records: Vec<InstrumentRecord>) -> HarmonizedSet {
    let provenance = Provenance {
        exposure_rows: records.len(),
        exposure_passing: records.len(),
        retained: records.len(),
        ..Provenance::default()
    };
    HarmonizedSet {
        records,
        outcome_type: OutcomeType::Continuous,
        provenance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakSimConfig {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub h_y2: f64,
    pub h_u2: f64,
    pub h_x2: f64,
    pub theta: f64,
    pub seed: u64,
}

impl Default for WeakSimConfig {
    fn default() -> Self {
        WeakSimConfig {
            n: 50_000,
            p: 50,
            m: 30,
            h_y2: 0.2,
            h_u2: 0.0,
            h_x2: 0.5,
            theta: 0.0,
            seed: 0,
        }
    }
}

impl WeakSimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be >= 1".into());
        }
        if self.m > self.p {
            return bad(format!("m ({}) exceeds p ({})", self.m, self.p));
        }
        for (name, v) in [("h_y2", self.h_y2), ("h_u2", self.h_u2), ("h_x2", self.h_x2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.h_x2 > 0.0) {
            return bad("h_x2 must be > 0".into());
        }
        if !self.theta.is_finite() {
            return bad("theta must be finite".into());
        }
        Ok(())
    }

    /// Summary-statistic standard error `1 / sqrt(n)`.
    pub fn se(&self) -> f64 {
        (self.n as f64).sqrt().recip()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakEffects {
    pub gamma: Vec<f64>,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Effects plus the two standardized sampling errors of each SNP.
fn draw_weak(cfg: &WeakSimConfig, rep: usize) -> (WeakEffects, Vec<(f64, f64)>) {
    let p = cfg.p as f64;
    let (sd_x, sd_y, sd_u) = ((cfg.h_x2 / p).sqrt(), (cfg.h_y2 / p).sqrt(), (cfg.h_u2 / p).sqrt());
    let mut fx = WeakEffects {
        gamma: Vec::with_capacity(cfg.p),
        alpha: Vec::with_capacity(cfg.p),
        phi: Vec::with_capacity(cfg.p),
    };
    let mut noise = Vec::with_capacity(cfg.p);
    for i in 0..cfg.p {
        let mut rng = keyed_rng(cfg.seed, &[rep as u64, TAG_WEAK, i as u64]);
        let z: [f64; 5] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let invalid = i < cfg.m;
        fx.gamma.push(sd_x * z[0]);
        fx.alpha.push(if invalid { sd_y * z[1] } else { 0.0 });
        fx.phi.push(if invalid { sd_u * z[2] } else { 0.0 });
        noise.push((z[3], z[4]));
    }
    (fx, noise)
}

pub fn draw_weak_effects(cfg: &WeakSimConfig, rep: usize) -> WeakEffects {
    draw_weak(cfg, rep).0
}

/// One replicate of the weak design. Instruments `1..=m` are invalid.
pub fn generate_weak(cfg: &WeakSimConfig, rep: usize) -> HarmonizedSet {
    let (fx, noise) = draw_weak(cfg, rep);
    let se = cfg.se();
    let records = (0..cfg.p)
        .map(|i| {
            let strength = fx.gamma[i] + fx.phi[i];
            let (zx, zy) = noise[i];
            InstrumentRecord::new(
                format!("snp{}", i + 1),
                strength + se * zx,
                se,
                cfg.theta * strength + fx.alpha[i] + fx.phi[i] + se * zy,
                se,
            )
        })
        .collect();
    simulated_set(records)
}

/// A simulation design with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum Design {
    Strong(StrongSimConfig),
    Weak(WeakSimConfig),
}

impl Design {
    pub fn validate(&self) -> Result<()> {
        match self {
            Design::Strong(c) => c.validate(),
            Design::Weak(c) => c.validate(),
        }
    }

    pub fn generate(&self, rep: usize) -> HarmonizedSet {
        match self {
            Design::Strong(c) => generate_strong(c, rep),
            Design::Weak(c) => generate_weak(c, rep),
        }
    }

    /// True causal effect.
    pub fn theta0(&self) -> f64 {
        match self {
            Design::Strong(c) => c.theta0,
            Design::Weak(c) => c.theta,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Design::Strong(c) => c.seed,
            Design::Weak(c) => c.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strong(scenario: Scenario, q: f64) -> StrongSimConfig {
        StrongSimConfig {
            n: 2_000,
            p: 30,
            scenario,
            q,
            theta0: 0.1,
            seed: 42,
            ..Default::default()
        }
    }

    #[test]
    fn no_pleiotropy_has_no_invalid_effects() {
        let fx = draw_strong_effects(&strong(Scenario::NoPleiotropy, 0.0), 3);
        assert!(fx.alpha.iter().all(|&a| a == 0.0));
        assert!(fx.phi.iter().all(|&a| a == 0.0));
        assert!(fx.invalid.iter().all(|&v| !v));
    }

    #[test]
    fn uncorrelated_scenario_has_m_direct_effects() {
        let cfg = strong(Scenario::Uncorrelated, 0.4);
        for rep in 0..5 {
            let fx = draw_strong_effects(&cfg, rep);
            let hits: Vec<f64> = fx.alpha.iter().copied().filter(|&a| a != 0.0).collect();
            assert_eq!(hits.len(), 12);
            assert!(hits.iter().all(|&a| a > 0.2 && a < 0.3));
            assert!(fx.phi.iter().all(|&a| a == 0.0));
            for (g, f) in fx.gamma.iter().zip(&fx.maf) {
                assert!(g.abs() >= 0.1 && g.abs() < 0.2);
                assert!(*f >= 0.1 && *f < 0.3);
            }
        }
        // invalid set is redrawn per replicate
        assert_ne!(draw_strong_effects(&cfg, 0).invalid, draw_strong_effects(&cfg, 1).invalid);
    }

    #[test]
    fn correlated_scenario_adds_confounder_effects() {
        let fx = draw_strong_effects(&strong(Scenario::Correlated, 0.6), 0);
        let with_phi = fx.phi.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(with_phi, 18);
        assert!(fx.phi.iter().all(|&v| v > -0.1 && v < 0.1));
        for i in 0..30 {
            assert_eq!(fx.invalid[i], fx.alpha[i] != 0.0);
        }
    }

    #[test]
    fn strong_config_validation() {
        assert!(strong(Scenario::NoPleiotropy, 0.4).validate().is_err());
        assert!(strong(Scenario::Uncorrelated, 0.0).validate().is_err());
        assert!(strong(Scenario::Correlated, 1.0).validate().is_err());
        assert!(strong(Scenario::Correlated, 0.2).validate().is_ok());
    }

    #[test]
    fn strong_generation_is_deterministic() {
        let cfg = strong(Scenario::Correlated, 0.2);
        let a = generate_strong(&cfg, 7);
        let b = generate_strong(&cfg, 7);
        assert_eq!(a, b);
        assert_ne!(a, generate_strong(&cfg, 8));
        assert_eq!(a.records.len(), 30);
    }

    #[test]
    fn regression_recovers_a_known_slope() {
        let g: Vec<u8> = (0..1000).map(|i| (i % 3) as u8).collect();
        let y: Vec<f64> = g.iter().enumerate().map(|(i, &v)| 0.7 * v as f64 + 0.01 * ((i % 7) as f64 - 3.0)).collect();
        let (b, se) = marginal_regression(&g, &y);
        assert!((b - 0.7).abs() < 1e-3);
        assert!(se > 0.0 && se < 1e-2);
        assert_eq!(marginal_regression(&[1, 1, 1], &[0.1, 0.2, 0.3]), (0.0, f64::INFINITY));
    }

    #[test]
    fn weak_design_effects() {
        let cfg = WeakSimConfig {
            h_u2: 0.0,
            seed: 9,
            ..Default::default()
        };
        let fx = draw_weak_effects(&cfg, 0);
        assert!(fx.phi.iter().all(|&v| v == 0.0));
        assert!(fx.alpha[30..].iter().all(|&v| v == 0.0));
        assert!(fx.alpha[..30].iter().all(|&v| v != 0.0));
        let h = generate_weak(&cfg, 0);
        assert_eq!(h, generate_weak(&cfg, 0));
        assert!(h.records.iter().all(|r| r.se_x == cfg.se() && r.se_y == cfg.se()));
    }

    #[test]
    fn weak_design_without_pleiotropy_centres_on_theta_gamma() {
        let cfg = WeakSimConfig {
            h_y2: 0.0,
            h_u2: 0.0,
            theta: 0.2,
            seed: 5,
            ..Default::default()
        };
        let fx = draw_weak_effects(&cfg, 0);
        assert!(fx.alpha.iter().chain(&fx.phi).all(|&v| v == 0.0));
        let h = generate_weak(&cfg, 0);
        // residuals beta_y - theta * gamma are pure sampling noise
        let z: Vec<f64> = h
            .records
            .iter()
            .zip(&fx.gamma)
            .map(|(r, g)| (r.beta_y - cfg.theta * g) / cfg.se())
            .collect();
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        assert!(mean.abs() < 3.0 * (1.0 + cfg.theta * cfg.theta).sqrt() / (z.len() as f64).sqrt());
    }
}
