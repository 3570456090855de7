use mr_quantile::simulation::{
    draw_genotypes, draw_strong_effects, draw_weak_effects, generate_strong, generate_weak,
    marginal_regression, Scenario, StrongSimConfig, WeakSimConfig,
};

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn valid_instrument_ratios_center_on_the_causal_effect() {
    let cfg = StrongSimConfig {
        n: 20_000,
        p: 10,
        theta0: 0.1,
        seed: 41,
        ..Default::default()
    };
    let ratios: Vec<f64> = (0..20)
        .flat_map(|rep| generate_strong(&cfg, rep).records)
        .map(|r| r.beta_y / r.beta_x)
        .collect();
    let (mean, sd) = mean_sd(&ratios);
    let mc_se = sd / (ratios.len() as f64).sqrt();
    assert!((mean - 0.1).abs() < 3.0 * mc_se, "mean {mean}, mc se {mc_se}");
}

#[test]
fn genotype_means_match_allele_frequencies() {
    let cfg = StrongSimConfig {
        n: 20_000,
        p: 8,
        seed: 5,
        ..Default::default()
    };
    let fx = draw_strong_effects(&cfg, 0);
    let g = draw_genotypes(&cfg, &fx, 0, 0);
    for (snp, &f) in g.iter().zip(&fx.maf) {
        assert!((0.1..0.3).contains(&f));
        let mean = snp.iter().map(|&v| f64::from(v)).sum::<f64>() / cfg.n as f64;
        let se = (2.0 * f * (1.0 - f) / cfg.n as f64).sqrt();
        assert!((mean - 2.0 * f).abs() < 3.0 * se, "mean {mean}, 2f {}", 2.0 * f);
    }
}

#[test]
fn scenarios_place_pleiotropy_on_invalid_instruments_only() {
    for (scenario, q) in [
        (Scenario::NoPleiotropy, 0.0),
        (Scenario::Uncorrelated, 0.4),
        (Scenario::Correlated, 0.6),
    ] {
        let cfg = StrongSimConfig {
            p: 30,
            scenario,
            q,
            seed: 9,
            ..Default::default()
        };
        let fx = draw_strong_effects(&cfg, 3);
        assert_eq!(fx.invalid.iter().filter(|&&b| b).count(), (q * 30.0_f64).round() as usize);
        for i in 0..30 {
            assert!((0.1..=0.2).contains(&fx.gamma[i].abs()));
            let direct = scenario != Scenario::NoPleiotropy && fx.invalid[i];
            assert_eq!(fx.alpha[i] != 0.0, direct);
            if direct {
                assert!((0.2..0.3).contains(&fx.alpha[i]));
            }
            assert_eq!(fx.phi[i] != 0.0, scenario == Scenario::Correlated && fx.invalid[i]);
        }
    }
}

#[test]
fn weak_effect_variance_matches_heritability() {
    let cfg = WeakSimConfig {
        p: 50,
        m: 30,
        h_y2: 0.2,
        h_u2: 0.1,
        h_x2: 0.5,
        seed: 77,
        ..Default::default()
    };
    let mut gamma = Vec::new();
    let mut alpha = Vec::new();
    let mut phi = Vec::new();
    for rep in 0..200 {
        let fx = draw_weak_effects(&cfg, rep);
        gamma.extend(&fx.gamma);
        alpha.extend(&fx.alpha[..cfg.m]);
        phi.extend(&fx.phi[..cfg.m]);
        assert!(fx.alpha[cfg.m..].iter().all(|&a| a == 0.0));
        assert!(fx.phi[cfg.m..].iter().all(|&a| a == 0.0));
    }
    let p = cfg.p as f64;
    for (draws, target) in [(&gamma, cfg.h_x2 / p), (&alpha, cfg.h_y2 / p), (&phi, cfg.h_u2 / p)] {
        let (_, sd) = mean_sd(draws);
        let ratio = sd * sd / target;
        assert!((0.9..1.1).contains(&ratio), "variance ratio {ratio}");
    }
}

#[test]
fn weak_summary_errors_are_one_over_root_n() {
    let cfg = WeakSimConfig {
        n: 40_000,
        seed: 2,
        ..Default::default()
    };
    let set = generate_weak(&cfg, 0);
    assert_eq!(set.len(), cfg.p);
    for r in &set.records {
        assert_eq!(r.se_x, 0.005);
        assert_eq!(r.se_y, 0.005);
    }
}

#[test]
fn marginal_regression_matches_hand_computation() {
    let g = [0u8, 1, 2, 1, 0, 2];
    let y = [0.5, 1.0, 2.5, 1.5, -0.5, 2.0];
    // Centered sums: g_bar = 1, y_bar = 7/6.
    let (sxx, sxy) = (4.0, 4.5);
    let beta = sxy / sxx;
    let syy: f64 = y.iter().map(|v| (v - 7.0 / 6.0) * (v - 7.0 / 6.0)).sum();
    let se = ((syy - beta * sxy) / 4.0 / sxx).sqrt();
    let (b, s) = marginal_regression(&g, &y);
    assert!((b - beta).abs() < 1e-14);
    assert!((s - se).abs() < 1e-14);
    assert_eq!(marginal_regression(&[1, 1, 1], &[0.0, 1.0, 2.0]), (0.0, f64::INFINITY));
}
