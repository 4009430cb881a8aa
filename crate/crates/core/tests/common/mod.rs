#![allow(dead_code)]

use otcrm::ambiguity::{build_full, build_partial, min_radius_full, min_radius_partial, AdmissibleSet, MassInterval};
use otcrm::geometry::Partition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Partition {
    let m = rng.gen_range(0..=n);
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    Partition::from_distances(m, d).unwrap()
}

pub fn random_mass(rng: &mut ChaCha8Rng) -> MassInterval {
    let lo = rng.gen_range(0.1..1.0);
    let hi = rng.gen_range(lo..=1.0);
    MassInterval::new(lo, hi).unwrap()
}

/// A random full or partial set with `delta0 = delta_min + slack`.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, full: bool) -> AdmissibleSet {
    let part = random_partition(rng, n);
    let mass = random_mass(rng);
    let slack = rng.gen_range(0.05..1.0);
    if full {
        let r = min_radius_full(&part, &mass).unwrap();
        build_full(&part, r.delta_min + slack, &mass).unwrap()
    } else {
        let r = min_radius_partial(&part, &mass).unwrap();
        build_partial(&part, r.delta_min + slack, &mass).unwrap()
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Vertices of a set projected onto `(p, delta)`.
pub fn pair_vertices(set: &AdmissibleSet) -> Vec<Vec<f64>> {
    otcrm_oracles::vertices::enumerate(&set.poly.a, &set.poly.b)
        .into_iter()
        .map(|u| u[..set.dim()].to_vec())
        .collect()
}

/// Random convex max-of-affine pieces with distinct slopes.
pub fn random_pwl(rng: &mut ChaCha8Rng, k: usize) -> Vec<[f64; 2]> {
    let mut slopes: Vec<f64> = Vec::new();
    while slopes.len() < k {
        let a = (rng.gen_range(-3.0..3.0) * 100.0_f64).round() / 100.0;
        if slopes.iter().all(|s| (s - a).abs() > 0.05) {
            slopes.push(a);
        }
    }
    slopes.into_iter().map(|a| [a, rng.gen_range(-1.0..1.0)]).collect()
}

/// `max_v sum_i v_i vals_i + v_delta * penalty` over enumerated vertices.
pub fn vertex_max(verts: &[Vec<f64>], vals: &[f64], penalty: f64) -> f64 {
    let n = vals.len();
    verts
        .iter()
        .map(|v| v[..n].iter().zip(vals).map(|(p, x)| p * x).sum::<f64>() + v[n] * penalty)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Worst-case expectation over one squared-cost ball, from the primal
/// Lagrangian `inf_lambda lambda delta + sum_i p_i sup_z {l(z) - lambda (z - x_i)^2 / dn^2}`,
/// both levels by zooming grid search.
pub fn lambda_form(loss: impl Fn(f64) -> f64, xs: &[f64], p: &[f64], delta: f64, dn: f64, lambda_hi: f64) -> f64 {
    let width = 50.0 * (1.0 + dn);
    let inner = |lam: f64| -> f64 {
        xs.iter()
            .zip(p)
            .map(|(&x, &pi)| {
                if pi == 0.0 {
                    return 0.0;
                }
                let f = |z: f64| loss(z) - lam * (z - x).powi(2) / (dn * dn);
                pi * otcrm_oracles::grid::maximize_1d(f, x - width, x + width, 401, 12).1
            })
            .sum::<f64>()
    };
    otcrm_oracles::grid::minimize_1d(|lam| lam * delta + inner(lam), 0.0, lambda_hi, 201, 12).1
}

/// Worst-case expectation over one first-order transport ball when outcomes
/// move along a line. Each sample may spread its mass over displacements on a
/// grid (cost `|t| / dn` per unit mass); the best spread under the budget is
/// an LP. The grid reach is doubled until the excess over the nominal value
/// is stable.
pub fn knapsack_worst_q1(loss: impl Fn(f64) -> f64, xs: &[f64], p: &[f64], delta: f64, dn: f64) -> f64 {
    let nominal: f64 = xs.iter().zip(p).map(|(&x, &pi)| pi * loss(x)).sum();
    if delta == 0.0 || dn == 0.0 {
        return nominal;
    }
    const K: usize = 100;
    let n = xs.len();
    let solve = |reach: f64| -> f64 {
        let mut gain = Vec::new();
        let mut rows = vec![Vec::new(); n + 1];
        for (i, &x) in xs.iter().enumerate() {
            for k in 1..=K {
                let t = reach * (k as f64 / K as f64).powi(2);
                for s in [t, -t] {
                    gain.push(loss(x + s) - loss(x));
                    for (r, row) in rows.iter_mut().enumerate() {
                        row.push(if r == i { 1.0 } else if r == n { t / dn } else { 0.0 });
                    }
                }
            }
        }
        let mut b = p.to_vec();
        b.push(delta);
        nominal + otcrm_oracles::lp::maximize(&gain, &rows, &b, &[], &[]).value().unwrap()
    };
    // A plateau can hide a steeper piece further out, so stability must hold
    // over several successive doublings.
    let mut reach = 1.0;
    let mut prev = solve(reach);
    let mut stable = 0;
    loop {
        reach *= 2.0;
        let cur = solve(reach);
        if (cur - prev).abs() <= 1e-4 * (cur - nominal).abs().max(1e-12) {
            stable += 1;
        } else {
            stable = 0;
        }
        if stable == 4 || reach > 1e7 {
            return cur;
        }
        prev = cur;
    }
}

/// `min_{t, eta} max_vertex [sum p_i (x_i - theta/2 - t)^2/(1 - eta) + delta a2/eta] - theta^2/4 - t theta`.
pub fn mean_variance_grid(verts: &[Vec<f64>], xs: &[f64], a2: f64, theta: f64) -> f64 {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - theta - 1.0;
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + theta + 1.0;
    let f = |t: f64, eta: f64| {
        let vals: Vec<f64> = xs.iter().map(|&x| (x - theta / 2.0 - t).powi(2) / (1.0 - eta)).collect();
        let pen = if a2 == 0.0 { 0.0 } else { a2 / eta };
        vertex_max(verts, &vals, pen) - theta * theta / 4.0 - t * theta
    };
    otcrm_oracles::grid::minimize_2d(f, (lo, hi), (1e-9, 1.0 - 1e-9), 200, 10).1
}

/// `min_{t, v} max_vertex [sum p_i l(x_i, t) + delta v] + C a2 / v` with the
/// CVaR inner loss `t + (-x - t)_+/kappa - theta x`.
pub fn mean_cvar_grid(verts: &[Vec<f64>], xs: &[f64], a2: f64, theta: f64, kappa: f64) -> f64 {
    let c = ((1.0 + theta).powi(2) + (1.0 - kappa) / kappa) / 4.0;
    let lo = -xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0;
    let hi = -xs.iter().cloned().fold(f64::INFINITY, f64::min) + 1.0;
    let f = |t: f64, v: f64| {
        let vals: Vec<f64> = xs.iter().map(|&x| t + (-x - t).max(0.0) / kappa - theta * x).collect();
        vertex_max(verts, &vals, v) + c * a2 / v
    };
    otcrm_oracles::grid::minimize_2d(f, (lo, hi), (1e-9, 20.0), 200, 10).1
}
