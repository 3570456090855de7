//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mr_quantile::estimators::{
    bootstrap_ratio_set, fit_ald, BootstrapConfig, EstimateReport, Method, SolverConfig,
};
use mr_quantile::ratios::compute_ratios;
use mr_quantile::simulation::{run_study, Design, Scenario, StrongSimConfig, WeakSimConfig};
use mr_quantile::summary_data::{HarmonizedSet, OutcomeType};
use mr_quantile::wqr::{update_lambda, update_tau, weighted_quantile, SortedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Closed-form tau solves `a t^2 - t (2p + a) + p = 0`.
fn tau_closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let target: f64 = rng.random_range(-100.0..=100.0);
        let p: usize = rng.random_range(1..=200);
        let ratios = vec![target / p as f64; p];
        let weights = vec![1.0; p];
        let a: f64 = ratios.iter().sum();
        let tau = update_tau(&ratios, &weights, 0.0, 1.0);
        let pf = p as f64;
        let resid = (a * tau * tau - tau * (2.0 * pf + a) + pf).abs();
        worst = worst.max(resid / (1e-9 * pf));
    }
    let at_zero = update_tau(&[1.0, -1.0], &[1.0, 1.0], 0.0, 3.0);
    let elapsed = start.elapsed();
    check(
        worst < 1.0 && at_zero == 0.5 && elapsed < Duration::from_secs(1),
        format!(
            "max residual / (1e-9 p) = {worst:.3e}, tau(a=0) = {at_zero}, {:.1} ms",
            elapsed.as_secs_f64() * 1e3
        ),
    )
}

/// `tau > 0.5` exactly when the weighted mean residual is negative.
fn sign_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut exceptions = 0;
    for _ in 0..10_000 {
        let p = rng.random_range(1..=60);
        let ratios: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let weights: Vec<f64> = (0..p).map(|_| rng.random_range(0.01..50.0)).collect();
        let theta = rng.random_range(-1.0..1.0);
        let lambda = rng.random_range(0.01..100.0);
        let s: f64 = ratios.iter().zip(&weights).map(|(r, w)| w * (r - theta)).sum();
        let tau = update_tau(&ratios, &weights, theta, lambda);
        let lhs = (tau - 0.5).partial_cmp(&0.0).unwrap();
        let rhs = 0.0f64.partial_cmp(&s).unwrap();
        if lhs != rhs {
            exceptions += 1;
        }
    }
    check(exceptions == 0, format!("{exceptions} exceptions in 10000 instances"))
}

/// Weighted quantile is exactly zero inside `[q_neg, 1 - q_pos]`.
fn consistency_window() -> Outcome {
    let levels = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
    let pairs: Vec<(f64, f64)> = levels
        .iter()
        .flat_map(|&a| levels.iter().map(move |&b| (a, b)))
        .filter(|(a, b)| a + b < 1.0 - 1e-12)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for c in 0..100 {
        let (q_neg, q_pos) = pairs[rng.random_range(0..pairs.len())];
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for (share, sign) in [(q_neg, -1.0), (1.0 - q_neg - q_pos, 0.0), (q_pos, 1.0)] {
            let k = rng.random_range(1..=8);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for w in raw {
                values.push(sign * rng.random_range(0.01..3.0));
                weights.push(w / total * share);
            }
        }
        for step in 1..100 {
            let tau = step as f64 / 100.0;
            let q = weighted_quantile(&values, &weights, tau).unwrap();
            let inside = tau >= q_neg + 1e-9 && tau <= 1.0 - q_pos - 1e-9;
            let outside = tau < q_neg - 1e-9 || tau > 1.0 - q_pos + 1e-9;
            if inside {
                checked += 1;
                if q != 0.0 {
                    failures.push(format!("#{c} tau={tau} q=({q_neg},{q_pos}) got {q}"));
                }
            } else if outside {
                checked += 1;
                if q == 0.0 {
                    failures.push(format!("#{c} tau={tau} q=({q_neg},{q_pos}) got 0"));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        match failures.first() {
            None => format!("{checked} grid checks, 0 failures"),
            Some(first) => format!("{checked} grid checks, {} failures, first {first:?}", failures.len()),
        },
    )
}

/// Random mixture of valid ratios near a common value plus outliers.
fn random_instance(rng: &mut ChaCha8Rng, p: usize) -> (Vec<f64>, Vec<f64>) {
    let theta = rng.random_range(-0.5..0.5);
    let invalid = rng.random_range(0.0..0.6);
    let ratios = (0..p)
        .map(|_| {
            let noise = rng.random_range(-0.05..0.05);
            if rng.random_bool(invalid) {
                theta + rng.random_range(-2.0..2.0)
            } else {
                theta + noise
            }
        })
        .collect();
    let weights = (0..p).map(|_| rng.random_range(0.5..40.0)).collect();
    (ratios, weights)
}

fn rel(new: f64, old: f64) -> f64 {
    let d = (new - old).abs();
    if d == 0.0 {
        0.0
    } else {
        d / new.abs().max(old.abs())
    }
}

/// Log-likelihood never decreases; converged fits are fixed points.
fn monotone_ascent() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cfg = SolverConfig::default();
    let (mut worst_drop, mut worst_move) = (0.0f64, 0.0f64);
    let mut converged = 0;
    for _ in 0..500 {
        let p = rng.random_range(5..=100);
        let (r, w) = random_instance(&mut rng, p);
        let fit = fit_ald(&r, &w, &cfg).map_err(|e| format!("fit failed: {e}"))?;
        for pair in fit.loglik_trace.windows(2) {
            worst_drop = worst_drop.max(pair[0] - pair[1]);
        }
        if fit.converged {
            converged += 1;
            let sample = SortedSample::new(&r, &w).unwrap();
            let theta = sample.quantile(fit.params.tau);
            let lambda = update_lambda(&r, &w, theta, fit.params.tau).unwrap();
            let tau = update_tau(&r, &w, theta, lambda);
            worst_move = worst_move
                .max(rel(theta, fit.params.theta))
                .max(rel(lambda, fit.params.lambda))
                .max(rel(tau, fit.params.tau));
        }
    }
    check(
        worst_drop <= 1e-10 && worst_move < 1e-8,
        format!(
            "max decrease {worst_drop:.2e}, max fixed-point move {worst_move:.2e} ({converged}/500 converged)"
        ),
    )
}

/// Profile log-likelihood at `(theta, tau)` with `lambda` at its MLE.
fn profile_loglik(r: &[f64], w: &[f64], theta: f64, tau: f64) -> Option<f64> {
    let lambda = update_lambda(r, w, theta, tau).ok()?;
    let p = r.len() as f64;
    let loss: f64 = r
        .iter()
        .zip(w)
        .map(|(x, wi)| {
            let u = x - theta;
            wi * if u >= 0.0 { tau * u } else { (tau - 1.0) * u }
        })
        .sum();
    Some(w.iter().map(|v| v.ln()).sum::<f64>() + p * (lambda * tau * (1.0 - tau)).ln() - lambda * loss)
}

/// Coordinate ascent matches an exhaustive grid search on small problems.
fn grid_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cfg = SolverConfig::default();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..50 {
        let p = rng.random_range(2..=6);
        let (r, w) = random_instance(&mut rng, p);
        let fit = fit_ald(&r, &w, &cfg).map_err(|e| format!("fit failed: {e}"))?;
        let mut grid_max = f64::NEG_INFINITY;
        for &theta in &r {
            for k in 1..100 {
                if let Some(ll) = profile_loglik(&r, &w, theta, k as f64 / 100.0) {
                    grid_max = grid_max.max(ll);
                }
            }
        }
        worst = worst.max(grid_max - fit.loglik());
    }
    check(
        worst <= 1e-6,
        format!("max(grid - fit) log-likelihood = {worst:.3e}"),
    )
}

fn weak(h_y2: f64, h_u2: f64, seed: u64) -> Design {
    Design::Weak(WeakSimConfig {
        n: 50_000,
        p: 50,
        m: 30,
        h_y2,
        h_u2,
        h_x2: 0.5,
        theta: 0.0,
        seed,
    })
}

fn boot(n_boot: usize, seed: u64) -> BootstrapConfig {
    BootstrapConfig {
        n_boot,
        seed,
        ..Default::default()
    }
}

fn rate(design: &Design, methods: &[Method], reps: usize, n_boot: usize, seed: u64) -> Result<Vec<f64>, String> {
    let res = run_study(design, methods, reps, &boot(n_boot, seed), &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    Ok(methods
        .iter()
        .map(|&m| res.aggregate(m).unwrap().rejection_rate)
        .collect())
}

/// Size of the MR-Quantile test under uncorrelated pleiotropy.
fn weak_type_one_error() -> Outcome {
    let start = Instant::now();
    let r = rate(&weak(0.2, 0.0, 606), &[Method::MrQuantile], 500, 200, 606)?[0];
    check(
        (0.03..=0.11).contains(&r),
        format!("MR-Quantile rejection rate {r:.3} (R=500, B=200, {:.1} s)", start.elapsed().as_secs_f64()),
    )
}

/// IVW is inflated under correlated pleiotropy, MR-Quantile much less so.
fn weak_correlated_contrast() -> Outcome {
    let r = rate(&weak(0.1, 0.1, 707), &[Method::MrQuantile, Method::Ivw], 500, 200, 707)?;
    check(
        r[1] > 2.0 * r[0],
        format!("IVW {:.3} vs MR-Quantile {:.3} (R=500)", r[1], r[0]),
    )
}

/// No bias with valid instruments in the individual-level design.
fn strong_unbiased() -> Outcome {
    let start = Instant::now();
    let design = Design::Strong(StrongSimConfig {
        n: 50_000,
        p: 30,
        scenario: Scenario::NoPleiotropy,
        q: 0.0,
        theta0: 0.1,
        beta_xu: 1.0,
        beta_yu: 1.0,
        seed: 808,
    });
    let methods = [Method::Ivw, Method::MrQuantile];
    let res = run_study(&design, &methods, 200, &boot(100, 808), &SolverConfig::default())
        .map_err(|e| e.to_string())?;
    let bias: Vec<f64> = methods.iter().map(|&m| res.aggregate(m).unwrap().bias).collect();
    check(
        bias.iter().all(|b| b.abs() < 0.01),
        format!(
            "bias IVW {:+.4}, MR-Quantile {:+.4} (R=200, {:.1} s)",
            bias[0],
            bias[1],
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Relative-risk transform of a log-scale estimate.
fn rr_transform() -> Outcome {
    let report = EstimateReport::normal(Method::MrQuantile, -0.23, 0.045, 0.05, 104, OutcomeType::BinaryRare);
    let rr = report.rr_scale.map(|s| s.rr).unwrap_or(f64::NAN);

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let records = [(0.1, 0.2), (0.2, 0.1), (-0.3, 0.3)];
    let mut exp = String::from("snp\tea\toa\tbeta\tse\tp\n");
    let mut out = String::from("snp\tea\toa\tbeta\tse\tp\n");
    for (i, (bx, se)) in records.iter().enumerate() {
        let _ = writeln!(exp, "rs{i}\tA\tG\t{bx}\t0.01\t1e-20");
        let _ = writeln!(out, "rs{i}\tA\tG\t{}\t{se}\t0.5", -0.23 * bx);
    }
    let (xp, yp) = (dir.path().join("x.tsv"), dir.path().join("y.tsv"));
    std::fs::write(&xp, exp).unwrap();
    std::fs::write(&yp, out).unwrap();
    let json = run_mrq(
        dir.path(),
        &["estimate", "--exposure", "x.tsv", "--outcome", "y.tsv", "--methods", "ivw", "--outcome-type", "binary-rare"],
    )?;
    let v: serde_json::Value = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let cli_rr = v["estimates"]["ivw"]["rr_scale"]["rr"].as_f64().unwrap_or(f64::NAN);
    let target = 0.7945;
    check(
        (rr - target).abs() <= 1e-4 && (cli_rr - target).abs() <= 1e-4,
        format!("RR {rr:.6} (report), {cli_rr:.6} (cli)"),
    )
}

/// Full MR-Quantile fit plus 1000 bootstrap refits at p = 100.
fn performance() -> Outcome {
    let data = Design::Weak(WeakSimConfig {
        p: 100,
        m: 30,
        seed: 1010,
        ..Default::default()
    })
    .generate(0);
    let start = Instant::now();
    let rs = compute_ratios(&data, 0.0).map_err(|e| e.to_string())?;
    let report = bootstrap_ratio_set(&rs, Method::MrQuantile, &SolverConfig::default(), &boot(1000, 1010))
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(2),
        format!("{:.3} s (se = {:.4})", elapsed.as_secs_f64(), report.se),
    )
}

fn run_mrq(dir: &Path, args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mrq"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("mrq {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write_gwas_pair(dir: &Path, data: &HarmonizedSet) {
    let mut exp = String::from("snp\tea\toa\tbeta\tse\tp\n");
    let mut out = exp.clone();
    for r in &data.records {
        let _ = writeln!(exp, "{}\tA\tG\t{}\t{}\t1e-10", r.snp_id, r.beta_x, r.se_x);
        let _ = writeln!(out, "{}\tA\tG\t{}\t{}\t0.5", r.snp_id, r.beta_y, r.se_y);
    }
    std::fs::write(dir.join("exposure.tsv"), exp).unwrap();
    std::fs::write(dir.join("outcome.tsv"), out).unwrap();
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Repeated CLI runs give byte-identical files for any thread count.
fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_gwas_pair(root.path(), &weak(0.2, 0.0, 1111).generate(0));
    let estimate = [
        "estimate", "--exposure", "../exposure.tsv", "--outcome", "../outcome.tsv", "--pval-threshold", "1",
        "--boot", "200", "--seed", "11", "--out", "est.json", "--diagnostics", "diag.tsv",
    ];
    let estimate_tsv = [
        "estimate", "--exposure", "../exposure.tsv", "--outcome", "../outcome.tsv", "--pval-threshold", "1",
        "--boot", "200", "--seed", "11", "--out", "est.tsv", "--format", "tsv",
    ];
    let simulate = [
        "simulate", "--design", "weak", "--reps", "20", "--boot", "50", "--seed", "11", "--format", "tsv",
        "--out", "sim.tsv",
    ];
    let simulate_strong = [
        "simulate", "--design", "strong", "--n", "2000", "--p", "10", "--scenario", "correlated", "--q", "0.3",
        "--reps", "4", "--boot", "20", "--out", "strong.json",
    ];
    let mut runs = Vec::new();
    for (k, threads) in ["1", "4", "1"].iter().enumerate() {
        let dir = root.path().join(format!("run{k}"));
        std::fs::create_dir(&dir).unwrap();
        for args in [&estimate[..], &estimate_tsv[..], &simulate[..], &simulate_strong[..]] {
            let mut full: Vec<&str> = vec!["--threads", threads];
            full.extend_from_slice(args);
            run_mrq(&dir, &full)?;
        }
        runs.push(read_all(&dir));
    }
    let n_files = runs[0].len();
    check(
        n_files == 7 && runs.iter().all(|r| *r == runs[0]),
        format!("{n_files} output files identical across 3 runs (threads 1, 4, 1)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("tau closed form solves the quadratic", tau_closed_form),
        ("tau sign law", sign_law),
        ("consistency window of the weighted quantile", consistency_window),
        ("coordinate ascent is monotone; converged fits are fixed points", monotone_ascent),
        ("coordinate ascent matches grid-search MLE (p <= 6)", grid_oracle),
        ("weak design type I error in [0.03, 0.11]", weak_type_one_error),
        ("correlated pleiotropy: IVW rate > 2x MR-Quantile", weak_correlated_contrast),
        ("strong design scenario 1 |bias| < 0.01", strong_unbiased),
        ("binary-rare RR = exp(-0.23) +- 1e-4", rr_transform),
        ("p = 100 fit + 1000 bootstrap refits < 2 s", performance),
        ("byte-identical outputs across runs and thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS  {:>2}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2}. {name}: {detail}", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
