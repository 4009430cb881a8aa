mod common;

use common::*;
use otcrm::ambiguity::{build_ball, build_full, build_partial, min_radius_full, min_radius_partial, MassInterval};
use otcrm::distortion::{distortion_value, Distortion};
use otcrm::geometry::Partition;
use otcrm::loss::{InnerLoss, LossKind, LossSpec};
use otcrm::reformulations::*;
use otcrm::{Error, Norm};
use otcrm_oracles::close;
use otcrm_oracles::grid::minimize_1d;
use rand::Rng;

const TOL: f64 = 1e-9;

fn scalar(ys: &[f64]) -> Vec<Vec<f64>> {
    ys.iter().map(|&y| vec![y]).collect()
}

fn pwl(pieces: Vec<[f64; 2]>) -> LossSpec {
    LossSpec::new(LossKind::PwlMax { pieces }).unwrap()
}

fn abs(b1: f64, b2: f64) -> LossSpec {
    LossSpec::new(LossKind::Abs { b1, b2 }).unwrap()
}

fn value(c: Result<Compiled, Error>) -> f64 {
    c.unwrap().solve(TOL).unwrap().value
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn single_ball_abs_worst_case() {
    let set = build_ball(&[1.0], 2.0).unwrap();
    let ys = scalar(&[0.0]);
    let dec = DecisionSet::fixed(vec![1.0]);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    let v = value(compile_expectation_q1(&abs(0.0, 0.0), inst));
    assert!((v - 2.0).abs() < 1e-7, "{v}");
}

#[test]
fn q1_expectation_matches_vertex_minimax() {
    let mut rng = rng(11);
    for case in 0..12 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, n, case % 2 == 0);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 2.0)).collect();
        let loss = pwl(random_pwl(&mut rng, 3));
        let lip = loss.lipschitz().unwrap();
        let dec = DecisionSet::simplex(2);
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let got = value(compile_expectation_q1(&loss, inst));
        let verts = pair_vertices(&set);
        let obj = |s: f64| {
            let a = [s, 1.0 - s];
            let vals: Vec<f64> = ys.iter().map(|y| loss.eval(dot(y, &a))).collect();
            vertex_max(&verts, &vals, lip * Norm::L2.eval(&a))
        };
        let (_, want) = minimize_1d(obj, 0.0, 1.0, 201, 20);
        assert!(close(got, want, 1e-6), "case {case}: {got} vs {want}");
    }
}

#[test]
fn zero_radius_reduces_to_vertex_minimax_of_nominal_risk() {
    // Every sample inside and mass interval covering 1: delta_min = 0.
    let part = Partition::from_distances(0, vec![0.5, 0.2, 0.9, 0.4]).unwrap();
    let mass = MassInterval::new(0.5, 1.0).unwrap();
    let set = build_partial(&part, 0.0, &mass).unwrap();
    let verts = pair_vertices(&set);
    assert!(verts.iter().all(|v| v[4].abs() < 1e-12));
    let ys = vec![vec![1.0, -0.5], vec![-1.0, 0.3], vec![0.2, 0.8], vec![0.5, 0.5]];
    let loss = pwl(vec![[1.0, 0.0], [-2.0, 0.1]]);
    let dec = DecisionSet::simplex(2);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    let got = value(compile_expectation_q1(&loss, inst));
    let obj = |s: f64| {
        let a = [s, 1.0 - s];
        let vals: Vec<f64> = ys.iter().map(|y| loss.eval(dot(y, &a))).collect();
        vertex_max(&verts, &vals, 0.0)
    };
    let (_, want) = minimize_1d(obj, 0.0, 1.0, 201, 20);
    assert!(close(got, want, 1e-6), "{got} vs {want}");
}

#[test]
fn affine_loss_with_fixed_decision_is_a_support_value() {
    let mut rng = rng(12);
    for _ in 0..8 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, n, true);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 3, 1.0)).collect();
        let alpha = random_vec(&mut rng, 3, 1.0);
        let dec = DecisionSet::fixed(alpha.clone());
        let inst = Instance::new(&ys, &set, &dec, Norm::L1).unwrap();
        let got = value(compile_expectation_q1(&LossSpec::affine(1.0, 0.0), inst));
        let mut v: Vec<f64> = ys.iter().map(|y| dot(y, &alpha)).collect();
        v.push(Norm::Linf.eval(&alpha));
        let want = otcrm::ambiguity::support(&set, &v).unwrap();
        assert!(close(got, want, 1e-7), "{got} vs {want}");
    }
}

#[test]
fn abs_at_order_two_single_ball_closed_form() {
    let p = [0.2, 0.5, 0.3];
    let ys = scalar(&[1.0, -0.4, 2.0]);
    let alpha = 1.5;
    let (b1, b2, c) = (0.3, 0.1, 2.0);
    let loss = abs(b1, b2).with_scale(c).unwrap();
    for delta in [0.0, 0.4, 1.7] {
        let set = build_ball(&p, delta).unwrap();
        let dec = DecisionSet::fixed(vec![alpha]);
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let got = value(compile_expectation_special_q(&loss, inst, 2.0));
        let nominal: f64 = ys.iter().zip(&p).map(|(y, pi)| pi * c * ((y[0] * alpha - b1).abs() + b2)).sum();
        let want = nominal + c * delta.sqrt() * alpha;
        assert!(close(got, want, 1e-6), "delta {delta}: {got} vs {want}");
    }
}

#[test]
fn abs_special_and_general_paths_agree_on_union_sets() {
    let mut rng = rng(13);
    for case in 0..10 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, n, case % 2 == 1);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 2.0)).collect();
        let loss = abs(rng.gen_range(-0.5..0.5), rng.gen_range(0.0..0.5));
        let dec = DecisionSet::simplex(2);
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let a = value(compile_expectation_special_q(&loss, inst, 2.0));
        let b = value(compile_expectation_general_q2(&loss, inst));
        assert!(close(a, b, 1e-6), "case {case}: {a} vs {b}");
    }
}

/// Scalar single-ball instance `(xs, p, delta)` with `alpha = 1`.
fn ball_case(rng: &mut rand_chacha::ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let xs = random_vec(rng, n, 1.5);
    let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    (xs, p, rng.gen_range(0.05..1.0))
}

fn ball_value_q2(loss: &LossSpec, xs: &[f64], p: &[f64], delta: f64) -> f64 {
    let set = build_ball(p, delta).unwrap();
    let ys = scalar(xs);
    let dec = DecisionSet::fixed(vec![1.0]);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    value(compile_expectation(loss, inst, 2.0))
}

#[test]
fn eta_form_matches_lambda_form_for_pwl_losses() {
    let mut rng = rng(14);
    for case in 0..4 {
        let (xs, p, delta) = ball_case(&mut rng, 3);
        let loss = pwl(random_pwl(&mut rng, 3));
        let got = ball_value_q2(&loss, &xs, &p, delta);
        let want = lambda_form(|z| loss.eval(z), &xs, &p, delta, 1.0, 50.0);
        assert!((got - want).abs() < 1e-4, "case {case}: {got} vs {want}");
    }
}

#[test]
fn pwq_and_power_losses_match_lambda_form() {
    let mut rng = rng(15);
    let pwq = LossSpec::new(LossKind::PwqMax {
        pieces: vec![[1.0, 0.0, 0.0], [0.5, 1.0, -0.2]],
    })
    .unwrap();
    let power = LossSpec::new(LossKind::Power { q: 2.0 }).unwrap();
    for loss in [pwq, power] {
        let (xs, p, delta) = ball_case(&mut rng, 3);
        let got = ball_value_q2(&loss, &xs, &p, delta);
        let want = lambda_form(|z| loss.eval(z), &xs, &p, delta, 1.0, 50.0);
        assert!((got - want).abs() < 1e-4, "{}: {got} vs {want}", loss.kind_name());
    }
}

#[test]
fn powered_catalog_matches_lambda_form() {
    let mut rng = rng(16);
    let forms = [
        LossKind::HingePlus { b: 0.2 },
        LossKind::HingeMinus { b: -0.1 },
        LossKind::AbsHinge { b1: 0.1, b2: 0.3 },
        LossKind::Abs { b1: 0.0, b2: 0.2 },
    ];
    for kind in forms {
        let loss = LossSpec::new(kind).unwrap().with_scale(1.5).unwrap().with_power(2.0).unwrap();
        let (xs, p, delta) = ball_case(&mut rng, 3);
        let got = ball_value_q2(&loss, &xs, &p, delta);
        let want = lambda_form(|z| loss.eval(z), &xs, &p, delta, 1.0, 200.0);
        assert!((got - want).abs() < 1e-4 * want.max(1.0), "{}: {got} vs {want}", loss.kind_name());
    }
}

#[test]
fn shortfall_closed_forms() {
    let u = LossSpec::affine(1.0, 0.0);
    let ys = scalar(&[0.0]);
    let dec = DecisionSet::fixed(vec![1.0]);
    for (delta, q, want) in [(0.0, 1.0, 0.0), (2.0, 1.0, 2.0), (2.0, 2.0, 2f64.sqrt())] {
        let set = build_ball(&[1.0], delta).unwrap();
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let got = value(compile_shortfall(&u, 0.0, inst, q));
        assert!((got - want).abs() < 1e-6, "delta {delta} q {q}: {got}");
    }
}

#[test]
fn shortfall_rejects_bad_utilities() {
    let ys = scalar(&[0.0]);
    let dec = DecisionSet::fixed(vec![1.0]);
    let set = build_ball(&[1.0], 1.0).unwrap();
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    let kinked = pwl(vec![[0.0, 0.0], [1.0, 0.0]]);
    assert!(compile_shortfall_linear(&kinked, 0.5, inst, 2.0).is_err());
    assert!(compile_shortfall(&kinked, 0.5, inst, 2.0).is_ok());
    assert!(compile_shortfall(&kinked, -0.1, inst, 1.0).is_err());
    assert!(compile_shortfall(&LossSpec::affine(-1.0, 0.0), 0.0, inst, 1.0).is_err());
}

#[test]
fn shortfall_q1_matches_bisection_on_the_vertex_oracle() {
    let mut rng = rng(17);
    for _ in 0..6 {
        let n = rng.gen_range(2..=4);
        let set = random_set(&mut rng, n, true);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let alpha = vec![0.3, 0.7];
        let u = pwl(vec![[0.5, 0.0], [2.0, -0.3]]);
        let level = 0.2;
        let dec = DecisionSet::fixed(alpha.clone());
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let got = value(compile_shortfall(&u, level, inst, 1.0));
        let verts = pair_vertices(&set);
        let lip_pen = 2.0 * Norm::L2.eval(&alpha);
        let worst = |k: f64| {
            let vals: Vec<f64> = ys.iter().map(|y| u.eval(-dot(y, &alpha) - k)).collect();
            vertex_max(&verts, &vals, lip_pen)
        };
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if worst(mid) <= level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((got - hi).abs() < 1e-6, "{got} vs {hi}");
    }
}

#[test]
fn min_expectation_cvar_inner_matches_grid() {
    let mut rng = rng(18);
    for _ in 0..6 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, n, false);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let alpha = vec![0.6, 0.4];
        let (theta, kappa) = (0.5, 0.3);
        let inner = InnerLoss::Cvar { theta, kappa };
        let dec = DecisionSet::fixed(alpha.clone());
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let got = value(compile_min_expectation(&inner, inst, 1.0));
        let verts = pair_vertices(&set);
        let xs: Vec<f64> = ys.iter().map(|y| dot(y, &alpha)).collect();
        let lip = theta + 1.0 / kappa;
        let pen = lip * Norm::L2.eval(&alpha);
        let obj = |t: f64| {
            let vals: Vec<f64> = xs.iter().map(|&x| t + (-x - t).max(0.0) / kappa - theta * x).collect();
            vertex_max(&verts, &vals, pen)
        };
        let (_, want) = minimize_1d(obj, -5.0, 5.0, 401, 20);
        assert!(close(got, want, 1e-6), "{got} vs {want}");
    }
}

#[test]
fn qnorm_single_ball_is_nominal_plus_penalty() {
    let p = [0.3, 0.3, 0.4];
    let xs = [0.5, -1.0, 0.2];
    let c = 2.0;
    let inner = InnerLoss::Shifted {
        loss: LossSpec::new(LossKind::HingePlus { b: 0.0 }).unwrap().with_scale(c).unwrap(),
    };
    let nominal = minimize_1d(
        |t| t + xs.iter().zip(&p).map(|(&x, &pi)| pi * (c * (x - t).max(0.0)).powi(2)).sum::<f64>().sqrt(),
        -5.0,
        5.0,
        401,
        30,
    )
    .1;
    for delta in [0.0, 0.5] {
        let set = build_ball(&p, delta).unwrap();
        let ys = scalar(&xs);
        let dec = DecisionSet::fixed(vec![1.0]);
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let got = value(compile_qnorm(&inner, inst, 2.0));
        let want = nominal + c * delta.sqrt();
        assert!((got - want).abs() < 1e-6, "delta {delta}: {got} vs {want}");
    }
    let weak = InnerLoss::AbsExcess { scale: 1.0 };
    let set = build_ball(&p, 0.5).unwrap();
    let ys = scalar(&xs);
    let dec = DecisionSet::fixed(vec![1.0]);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    assert!(compile_qnorm(&weak, inst, 2.0).is_err());
}

#[test]
fn mean_variance_point_mass_and_constant() {
    let set = build_ball(&[1.0], 0.0).unwrap();
    let ys = vec![vec![0.7]];
    let dec = DecisionSet::fixed(vec![1.0]);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    assert!(value(mean_variance_socp(0.0, inst, 2.0)).abs() < 1e-6);
    let c = mean_variance_socp(0.5, inst, 2.0).unwrap();
    assert!((c.program.objective.constant + 0.0625).abs() < 1e-15);
    assert!(mean_variance_socp(0.5, inst, 1.0).is_err());
    assert!((mean_cvar_constant(0.0, 0.5) - 0.5).abs() < 1e-15);
}

#[test]
fn mean_cvar_at_level_one_is_the_expectation() {
    let mut rng = rng(19);
    for _ in 0..5 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, n, true);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let dec = DecisionSet::simplex(2);
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let a = value(mean_cvar_socp(0.0, 1.0, inst, 2.0));
        let b = value(compile_expectation(&LossSpec::negative_return(), inst, 2.0));
        assert!(close(a, b, 1e-6), "{a} vs {b}");
    }
}

#[test]
fn distortion_identity_equals_expectation() {
    let mut rng = rng(20);
    for case in 0..6 {
        let n = rng.gen_range(2..=5);
        let set = random_set(&mut rng, n, case % 2 == 0);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let loss = pwl(random_pwl(&mut rng, 2));
        let dec = DecisionSet::simplex(2);
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let a = value(compile_distortion_q1_exponential(&Distortion::identity(), &loss, inst, 64));
        let b = value(compile_expectation_q1(&loss, inst));
        assert!((a - b).abs() < 1e-7 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn distortion_square_two_samples() {
    let set = build_ball(&[0.5, 0.5], 0.0).unwrap();
    let ys = scalar(&[0.0, 1.0]);
    let dec = DecisionSet::fixed(vec![1.0]);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    let got = value(compile_distortion_q1_exponential(&Distortion::Square, &LossSpec::affine(1.0, 0.0), inst, 64));
    assert!((got - 0.75).abs() < 1e-7, "{got}");
}

#[test]
fn distortion_ball_value_is_rank_dependent_plus_penalty() {
    let mut rng = rng(21);
    let hs = [Distortion::cvar_mix(0.5, 0.4).unwrap(), Distortion::Square, Distortion::Exp];
    for h in &hs {
        for _ in 0..3 {
            let n = rng.gen_range(2..=5);
            let (xs, p, delta) = ball_case(&mut rng, n);
            let loss = pwl(random_pwl(&mut rng, 2));
            let set = build_ball(&p, delta).unwrap();
            let ys = scalar(&xs);
            let dec = DecisionSet::fixed(vec![1.0]);
            let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
            let got = value(compile_distortion_q1_exponential(h, &loss, inst, 512));
            let r: Vec<f64> = xs.iter().map(|&x| loss.eval(x)).collect();
            let want = distortion_value(h, &r, &p) + loss.lipschitz().unwrap() * h.sup_deriv() * delta;
            // Smooth h enters through a secant interpolation.
            let tol = if h.is_pwl() { 1e-7 } else { 1e-4 };
            assert!((got - want).abs() < tol, "{h}: {got} vs {want}");
        }
    }
}

#[test]
fn distortion_guards() {
    let n = MAX_EXPONENTIAL_N + 1;
    let p = vec![1.0 / n as f64; n];
    let set = build_ball(&p, 0.1).unwrap();
    let ys = scalar(&vec![0.0; n]);
    let dec = DecisionSet::fixed(vec![1.0]);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    let e = compile_distortion_q1_exponential(&Distortion::Square, &LossSpec::affine(1.0, 0.0), inst, 64).unwrap_err();
    assert!(matches!(e, Error::Unsupported(_)));
    let risk = RiskSpec::Distortion { h: Distortion::Square };
    assert!(matches!(compile(&risk, &LossSpec::affine(1.0, 0.0), inst, 2.0), Err(Error::Unsupported(_))));
}

#[test]
fn full_and_partial_sets_coincide_when_all_samples_are_outside() {
    // The full model's budget is scaled by eps = 1/omega; matching it at
    // the worst-case eps = 1/omega_1 means delta0_full = omega_1 delta0_partial.
    let mut rng = rng(22);
    for _ in 0..6 {
        let n = rng.gen_range(2..=6);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
        let part = Partition::from_distances(n, d).unwrap();
        let mass = random_mass(&mut rng);
        let rf = min_radius_full(&part, &mass).unwrap().delta_min;
        let rp = min_radius_partial(&part, &mass).unwrap().delta_min;
        let delta0 = (rf / mass.lo).max(rp) + rng.gen_range(0.05..1.0);
        let full = build_full(&part, mass.lo * delta0, &mass).unwrap();
        let partial = build_partial(&part, delta0, &mass).unwrap();
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let dec = DecisionSet::simplex(2);
        let loss = LossSpec::negative_return();
        let a = value(compile_expectation_q1(&loss, Instance::new(&ys, &full, &dec, Norm::L2).unwrap()));
        let b = value(compile_expectation_q1(&loss, Instance::new(&ys, &partial, &dec, Norm::L2).unwrap()));
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn enlarging_the_budget_never_lowers_the_optimum() {
    let mut rng = rng(23);
    for case in 0..10 {
        let n = rng.gen_range(2..=5);
        let part = random_partition(&mut rng, n);
        let mass = random_mass(&mut rng);
        let full = case % 2 == 0;
        let dmin = if full {
            min_radius_full(&part, &mass).unwrap().delta_min
        } else {
            min_radius_partial(&part, &mass).unwrap().delta_min
        };
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let dec = DecisionSet::simplex(2);
        let loss = LossSpec::negative_return();
        let mut prev = f64::NEG_INFINITY;
        for k in 1..=3 {
            let delta0 = dmin + 0.3 * k as f64;
            let set = if full {
                build_full(&part, delta0, &mass).unwrap()
            } else {
                build_partial(&part, delta0, &mass).unwrap()
            };
            let v = value(compile_expectation(&loss, Instance::new(&ys, &set, &dec, Norm::L2).unwrap(), 2.0));
            assert!(v >= prev - 1e-7, "case {case}: {v} < {prev}");
            prev = v;
        }
    }
}

#[test]
fn ball_value_is_midpoint_concave_in_weights_and_budget() {
    let mut rng = rng(24);
    let loss = abs(0.1, 0.0);
    for _ in 0..6 {
        let (xs, p1, d1) = ball_case(&mut rng, 3);
        let (_, p2, d2) = ball_case(&mut rng, 3);
        let pm: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.5 * (a + b)).collect();
        let g = |p: &[f64], d: f64| ball_value_q2(&loss, &xs, p, d);
        let mid = g(&pm, 0.5 * (d1 + d2));
        assert!(mid >= 0.5 * (g(&p1, d1) + g(&p2, d2)) - 1e-6);
    }
}

#[test]
fn mean_variance_and_mean_cvar_match_nested_grids() {
    let mut rng = rng(25);
    for _ in 0..2 {
        let n = 3;
        let set = random_set(&mut rng, n, true);
        let ys: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 2, 1.0)).collect();
        let alpha = vec![0.5, 0.5];
        let dec = DecisionSet::fixed(alpha.clone());
        let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
        let verts = pair_vertices(&set);
        let xs: Vec<f64> = ys.iter().map(|y| dot(y, &alpha)).collect();
        let a2 = dot(&alpha, &alpha);

        let theta = 0.7;
        let got = value(mean_variance_socp(theta, inst, 2.0));
        let want = mean_variance_grid(&verts, &xs, a2, theta);
        assert!((got - want).abs() < 1e-3, "mv {got} vs {want}");

        let kappa = 0.4;
        let got = value(mean_cvar_socp(theta, kappa, inst, 2.0));
        let want = mean_cvar_grid(&verts, &xs, a2, theta, kappa);
        assert!((got - want).abs() < 1e-3, "mcvar {got} vs {want}");
    }
}

#[test]
fn full_model_expectation_program_shape() {
    let part = Partition::from_distances(1, vec![0.4, 0.2, 0.3]).unwrap();
    let mass = MassInterval::new(0.5, 1.0).unwrap();
    let set = build_full(&part, min_radius_full(&part, &mass).unwrap().delta_min + 0.5, &mass).unwrap();
    let ys = vec![vec![1.0, -0.5], vec![0.2, 0.4], vec![-0.3, 0.9]];
    let dec = DecisionSet::simplex(2);
    let inst = Instance::new(&ys, &set, &dec, Norm::L2).unwrap();
    let c = compile_expectation_q1(&LossSpec::negative_return(), inst).unwrap();
    let n = 3;
    let z = c.program.vars_in("z");
    assert_eq!(z.len(), n + 6);
    let bounds = z.iter().filter(|&&j| c.program.vars[j].lower == Some(0.0)).count();
    assert_eq!(c.program.rows_in("z") + bounds, 2 * n + 8);
    let convex = c.program.socs.iter().filter(|s| s.group == "dual_norm").count();
    assert_eq!(convex, 1);

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/expectation_q1_full_n3.json");
    if std::env::var_os("OTCRM_BLESS").is_some() {
        std::fs::write(path, c.program.to_json() + "\n").unwrap();
    }
    let golden: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let got: serde_json::Value = serde_json::from_str(&c.program.to_json()).unwrap();
    assert_eq!(got, golden);
}
