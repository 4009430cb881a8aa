use otcrm::distortion::Distortion;
use otcrm::experiments::*;
use otcrm::geometry::Dataset;
use otcrm::loss::LossSpec;
use otcrm::par::Exec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> RunConfig {
    RunConfig {
        ns: vec![50],
        reps: 2,
        distortions: vec![Distortion::Square],
        models: vec![ModelKind::Saa, ModelKind::Csaa],
        mc_samples: 10_000,
        oracle_resolution: 4,
        timings: false,
        ..RunConfig::default()
    }
}

#[test]
fn gate_and_scales_at_the_center() {
    assert_eq!(gate(0.5), 0.5);
    assert_eq!(scales(0.5), [1.0, 0.75, 4.0, 1.0, 4.0, 1.0]);
}

#[test]
fn mean_of_conditional_mean_matches_its_expectation() {
    let g = GenerativeModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 100_000;
    let draws: Vec<[f64; 6]> = (0..n).map(|_| mean(&g.sample_x(&mut rng))).collect();
    for k in 0..6 {
        let m = draws.iter().map(|d| d[k]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d[k] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let want = MU[k] + 0.1 * V1[k];
        assert!((m - want).abs() <= 3.0 * se, "coordinate {k}: {m} vs {want} (se {se})");
    }
}

#[test]
fn identity_risk_is_the_conditional_mean() {
    let cfg = RunConfig::default();
    let id = Distortion::identity();
    let loss = LossSpec::affine(1.0, 0.0);
    let e1 = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let est = oracle_conditional_risk(&e1, &id, &loss, &cfg, 20_000, 3).unwrap();
    let big = conditional_sample(&cfg, 1_000_000, 99).unwrap();
    let n = big.len() as f64;
    let m = big.iter().map(|y| y[0]).sum::<f64>() / n;
    let var = big.iter().map(|y| (y[0] - m).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (est.se.powi(2) + var / n).sqrt();
    assert!((est.value - m).abs() <= 4.0 * se, "{} vs {m} (se {se})", est.value);
}

#[test]
fn monte_carlo_error_behaves() {
    let cfg = RunConfig::default();
    let alpha = [0.2, 0.1, 0.3, 0.1, 0.2, 0.1];
    let loss = LossSpec::negative_return();
    let a = oracle_conditional_risk(&alpha, &Distortion::Square, &loss, &cfg, 20_000, 1).unwrap();
    let b = oracle_conditional_risk(&alpha, &Distortion::Square, &loss, &cfg, 20_000, 2).unwrap();
    assert!((a.value - b.value).abs() <= 4.0 * (a.se.powi(2) + b.se.powi(2)).sqrt());
    let c = oracle_conditional_risk(&alpha, &Distortion::Square, &loss, &cfg, 40_000, 1).unwrap();
    let ratio = a.se / c.se;
    assert!((ratio - 2f64.sqrt()).abs() < 0.15, "se ratio {ratio}");
    assert!(oracle_conditional_risk(&alpha, &Distortion::Square, &loss, &cfg, 9_999, 1).is_err());
}

#[test]
fn zero_radius_cdro_is_csaa() {
    let cfg = RunConfig {
        delta0_numerator: 0.0,
        ..RunConfig::default()
    };
    let data = sample_joint(&cfg, 100, 5);
    let a = run_model(ModelKind::Cdro, &Distortion::Square, &data, &cfg).unwrap();
    let b = run_model(ModelKind::Csaa, &Distortion::Square, &data, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn saa_ignores_covariates() {
    let cfg = RunConfig::default();
    let data = sample_joint(&cfg, 60, 6);
    let permuted: Vec<Vec<f64>> = data.covariates.iter().map(|x| vec![x[2], x[0], x[1]]).collect();
    let other = Dataset::new(permuted, data.outcomes.clone()).unwrap();
    let a = run_model(ModelKind::Saa, &Distortion::Exp, &data, &cfg).unwrap();
    let b = run_model(ModelKind::Saa, &Distortion::Exp, &other, &cfg).unwrap();
    assert_eq!(a.alpha, b.alpha);
}

#[test]
fn conditional_baselines_ignore_far_samples() {
    let cfg = RunConfig::default();
    let data = sample_joint(&cfg, 80, 7);
    let mut xs = data.covariates.clone();
    let mut ys = data.outcomes.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        xs.push(vec![15.0 + rng.gen_range(0.0..5.0), rng.gen_range(-1.0..1.0), 0.0]);
        ys.push((0..6).map(|_| rng.gen_range(-200.0..200.0)).collect());
    }
    let more = Dataset::new(xs, ys).unwrap();
    for kind in [ModelKind::Csaa, ModelKind::Cdro] {
        let a = run_model(kind, &Distortion::Square, &data, &cfg).unwrap();
        let b = run_model(kind, &Distortion::Square, &more, &cfg).unwrap();
        if kind == ModelKind::Csaa {
            assert_eq!(a, b);
        } else {
            // The CDRO radius is 100/N, so only the budget changes with N.
            let scaled = RunConfig {
                delta0_numerator: cfg.delta0_numerator * 100.0 / 80.0,
                ..cfg.clone()
            };
            let c = run_model(kind, &Distortion::Square, &more, &scaled).unwrap();
            assert_eq!(a, c);
            assert!(b.value <= a.value + cfg.psi_tol);
        }
    }
}

#[test]
fn covering_region_with_unit_mass_matches_udro() {
    let scale: f64 = 0.1;
    let cfg = RunConfig {
        radius: 1e3,
        omega: [1.0, 1.0],
        delta_scale: scale,
        delta0_numerator: scale * 100f64.ln().sqrt(),
        psi_tol: 1e-6,
        ..RunConfig::default()
    };
    let data = sample_joint(&cfg, 40, 9);
    let a = run_model(ModelKind::UbCdro, &Distortion::Square, &data, &cfg).unwrap();
    let b = run_model(ModelKind::Udro, &Distortion::Square, &data, &cfg).unwrap();
    assert!((a.value - b.value).abs() < 1e-5, "{} vs {}", a.value, b.value);
}

#[test]
fn single_replication_summary_is_the_run() {
    let cfg = RunConfig { reps: 1, ..small_config() };
    let res = replicate(&cfg).unwrap();
    let summary = res.summary();
    assert_eq!(summary.len(), res.rows.len());
    for s in &summary {
        let row = res.rows.iter().find(|r| r.model == s.model).unwrap();
        let risk = row.risk.unwrap();
        assert_eq!((s.mean, s.p15, s.p85), (risk, risk, risk));
        assert_eq!((s.successes, s.failures), (1, 0));
    }
}

#[test]
fn replication_is_deterministic_and_round_trips() {
    let cfg = small_config();
    let a = replicate(&cfg).unwrap();
    let b = replicate(&RunConfig {
        exec: Exec::Sequential,
        ..cfg.clone()
    })
    .unwrap();
    let (mut wa, mut wb) = (Vec::new(), Vec::new());
    write_results_csv(&a.rows, &mut wa).unwrap();
    write_results_csv(&b.rows, &mut wb).unwrap();
    assert_eq!(wa, wb);
    let text = String::from_utf8(wa.clone()).unwrap();
    assert!(text.starts_with("model,N,rep,distortion,risk,se,seconds,"));
    assert_eq!(text.lines().count(), 1 + 4);

    let back = read_results_csv(&wa[..]).unwrap();
    assert_eq!(back.len(), a.rows.len());
    for (x, y) in back.iter().zip(&a.rows) {
        assert_eq!((x.model, x.n, x.rep, x.risk, x.se), (y.model, y.n, y.rep, y.risk, y.se));
        for (p, q) in x.alpha.iter().zip(&y.alpha) {
            assert!((p - q).abs() <= 5e-7);
        }
    }
    let svg = write_svg(&a.summary(), &a.oracle);
    assert!(svg.starts_with("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn config_defaults_and_round_trip() {
    let d = RunConfig::default();
    assert_eq!((d.ns.clone(), d.reps, d.mc_samples), (vec![50, 100, 200], 10, 20_000));
    let p = RunConfig::full_scale();
    assert_eq!((p.ns.clone(), p.reps), (vec![50, 100, 200, 300, 400], 50));
    let text = toml::to_string(&d).unwrap();
    let back: RunConfig = toml::from_str(&text).unwrap();
    assert_eq!(back, d);
    assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    let low = RunConfig {
        mc_samples: 5_000,
        ..RunConfig::default()
    };
    assert!(low.validate().is_err());
}

#[test]
fn oracle_grid_has_about_a_thousand_points() {
    let g = simplex_grid(6, RunConfig::default().oracle_resolution);
    assert_eq!(g.len(), 1287);
    assert!(g.iter().all(|a| (a.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identity_risk_is_the_sample_mean(seed in 0u64..1000, w in prop::array::uniform6(0.0f64..1.0)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ys: Vec<[f64; 6]> = (0..50).map(|_| std::array::from_fn(|_| rng.gen_range(-5.0..5.0))).collect();
        let s: f64 = w.iter().sum::<f64>().max(1e-9);
        let alpha: Vec<f64> = w.iter().map(|v| v / s).collect();
        let loss = LossSpec::negative_return();
        let est = evaluate_risk(&alpha, &Distortion::identity(), &loss, &ys);
        let mean = ys.iter().map(|y| -y.iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>() / 50.0;
        prop_assert!((est.value - mean).abs() < 1e-10);
        // A convex distortion never lowers the risk below the mean.
        let sq = evaluate_risk(&alpha, &Distortion::Square, &loss, &ys);
        prop_assert!(sq.value >= mean - 1e-10);
        let mut rev = ys.clone();
        rev.reverse();
        prop_assert!((evaluate_risk(&alpha, &Distortion::Square, &loss, &rev).value - sq.value).abs() < 1e-10);
    }

    #[test]
    fn data_seeds_differ_across_cells(n1 in 1usize..500, n2 in 1usize..500, r1 in 0usize..100, r2 in 0usize..100) {
        prop_assume!((n1, r1) != (n2, r2));
        prop_assert_ne!(data_seed(7, n1, r1), data_seed(7, n2, r2));
    }
}
