//! Admissible sets of `(p, delta)` pairs as explicit polyhedra `{u >= 0 : A u <= b}`.

mod radius;
mod support;

pub use radius::{min_radius_full, min_radius_partial, Radius};
pub use support::{inline_support, inline_support_bounds, support, support_argmax, SparsePoly, SparseRow};

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::geometry::Partition;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassInterval {
    pub lo: f64,
    pub hi: f64,
}

impl MassInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return invalid(format!("mass interval [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"));
        }
        Ok(Self { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

/// `{u >= 0 : A u <= b}` with `A` stored row-major and dense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub var_layout: Vec<Slice>,
}

impl Polyhedron {
    fn new(n_vars: usize, var_layout: Vec<Slice>) -> Self {
        debug_assert_eq!(var_layout.iter().map(|s| s.len).sum::<usize>(), n_vars);
        Self {
            a: Vec::new(),
            b: Vec::new(),
            var_layout,
        }
    }

    fn push(&mut self, entries: &[(usize, f64)], rhs: f64) {
        let mut row = vec![0.0; self.n_vars()];
        for &(j, v) in entries {
            row[j] += v;
        }
        self.a.push(row);
        self.b.push(rhs);
    }

    fn push_eq(&mut self, entries: &[(usize, f64)], rhs: f64) {
        self.push(entries, rhs);
        let neg: Vec<(usize, f64)> = entries.iter().map(|&(j, v)| (j, -v)).collect();
        self.push(&neg, -rhs);
    }

    pub fn n_vars(&self) -> usize {
        self.var_layout.iter().map(|s| s.len).sum()
    }

    pub fn n_rows(&self) -> usize {
        self.a.len()
    }

    pub fn slice(&self, name: &str) -> Option<&Slice> {
        self.var_layout.iter().find(|s| s.name == name)
    }

    /// Largest scaled violation of `A u <= b, u >= 0`.
    pub fn violation(&self, u: &[f64]) -> f64 {
        let mut worst = u.iter().fold(0.0f64, |w, &x| w.max(-x));
        for (row, &bi) in self.a.iter().zip(&self.b) {
            let act: f64 = row.iter().zip(u).map(|(a, x)| a * x).sum();
            worst = worst.max((act - bi) / row_scale(row, bi));
        }
        worst
    }

    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        u.len() == self.n_vars() && self.violation(u) <= tol
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polyhedron serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetKind {
    FullOT,
    PartialOT,
    Envelope,
    /// The single pair `(p_hat, delta_hat)`.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Divergence {
    Tv,
    Linf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSet {
    pub kind: SetKind,
    pub poly: Polyhedron,
    pub n: usize,
    pub delta0: f64,
    pub mass: Option<MassInterval>,
    pub radius: Option<Radius>,
    /// Reference weights for `Ball` and `Envelope`.
    pub reference: Option<Vec<f64>>,
}

impl AdmissibleSet {
    /// Number of `(p, delta)` coordinates, `N + 1`.
    pub fn dim(&self) -> usize {
        self.n + 1
    }

    pub fn delta_index(&self) -> usize {
        self.n
    }

    /// Projection membership of `(p, delta)`: exists auxiliary columns with the
    /// full vector in the polyhedron. Decided by LP.
    pub fn contains_pair(&self, p: &[f64], delta: f64, tol: f64) -> Result<bool> {
        Ok(self.pair_violation(p, delta)? <= tol)
    }

    /// Smallest scaled violation over the auxiliary columns, plus any
    /// negativity of `(p, delta)`.
    pub fn pair_violation(&self, p: &[f64], delta: f64) -> Result<f64> {
        support::pair_violation(self, p, delta)
    }
}

/// Violation scale of a row: `1 + |b| + max_j |a_j|`.
pub(crate) fn row_scale(row: &[f64], b: f64) -> f64 {
    1.0 + b.abs() + row.iter().fold(0.0f64, |m, a| m.max(a.abs()))
}

fn layout(n: usize, extra: &[(&str, usize)]) -> Vec<Slice> {
    let mut v = vec![
        Slice {
            name: "p".into(),
            start: 0,
            len: n,
        },
        Slice {
            name: "delta".into(),
            start: n,
            len: 1,
        },
    ];
    let mut start = n + 1;
    for &(name, len) in extra {
        v.push(Slice {
            name: name.into(),
            start,
            len,
        });
        start += len;
    }
    v
}

fn check_radius(delta0: f64, r: &Radius) -> Result<()> {
    let ok = if r.strict {
        delta0 > r.delta_min
    } else {
        delta0 >= r.delta_min - 1e-12 * (1.0 + r.delta_min)
    };
    if !ok || !delta0.is_finite() {
        return Err(Error::InfeasibleRadius {
            delta0,
            delta_min: r.delta_min,
            strict: r.strict,
        });
    }
    Ok(())
}

/// Full model: columns `(p_1..p_N, delta, eps)` with `1/eps` in the mass
/// interval, `p_i <= eps/N` and the transport equality pinning `delta`.
pub fn build_full(part: &Partition, delta0: f64, mass: &MassInterval) -> Result<AdmissibleSet> {
    let r = min_radius_full(part, mass)?;
    check_radius(delta0, &r)?;
    let d = part.distances()?;
    let n = d.len();
    let nf = n as f64;
    let m = part.m;
    let (jd, je) = (n, n + 1);
    let mut poly = Polyhedron::new(n + 2, layout(n, &[("eps", 1)]));
    let ones: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    let neg_ones: Vec<(usize, f64)> = (0..n).map(|i| (i, -1.0)).collect();
    poly.push(&ones, 1.0);
    poly.push(&neg_ones, -1.0);
    poly.push(&[(je, 1.0)], 1.0 / mass.lo);
    poly.push(&[(je, -1.0)], -1.0 / mass.hi);
    for i in 0..n {
        poly.push(&[(i, 1.0), (je, -1.0 / nf)], 0.0);
    }
    let inside: f64 = d[m..].iter().sum();
    let mut a: Vec<(usize, f64)> = (0..n)
        .map(|i| (i, if i < m { -d[i] } else { d[i] }))
        .collect();
    a.push((jd, -1.0));
    a.push((je, delta0 - inside / nf));
    let neg_a: Vec<(usize, f64)> = a.iter().map(|&(j, v)| (j, -v)).collect();
    poly.push(&neg_a, 0.0);
    poly.push(&a, 0.0);
    Ok(AdmissibleSet {
        kind: SetKind::FullOT,
        poly,
        n,
        delta0,
        mass: Some(*mass),
        radius: Some(r),
        reference: None,
    })
}

/// Partial model: columns `(p_1..p_N, delta)` with `p_i <= 1/(N omega_1)` and
/// `delta + sum_{i<m} p_i d_i = delta0`.
pub fn build_partial(part: &Partition, delta0: f64, mass: &MassInterval) -> Result<AdmissibleSet> {
    let r = min_radius_partial(part, mass)?;
    check_radius(delta0, &r)?;
    let d = part.distances()?;
    let n = d.len();
    let m = part.m;
    let mut poly = Polyhedron::new(n + 1, layout(n, &[]));
    let ones: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    let neg_ones: Vec<(usize, f64)> = (0..n).map(|i| (i, -1.0)).collect();
    poly.push(&ones, 1.0);
    poly.push(&neg_ones, -1.0);
    let cap = 1.0 / (n as f64 * mass.lo);
    for i in 0..n {
        poly.push(&[(i, 1.0)], cap);
    }
    let mut a: Vec<(usize, f64)> = (0..m).map(|i| (i, d[i])).collect();
    a.push((n, 1.0));
    let neg_a: Vec<(usize, f64)> = a.iter().map(|&(j, v)| (j, -v)).collect();
    poly.push(&neg_a, -delta0);
    poly.push(&a, delta0);
    Ok(AdmissibleSet {
        kind: SetKind::PartialOT,
        poly,
        n,
        delta0,
        mass: Some(*mass),
        radius: Some(r),
        reference: None,
    })
}

fn check_weights(p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return invalid("reference weights must be a probability vector");
    }
    Ok(())
}

/// The single pair `(p_hat, delta_hat)`: an ordinary transport ball.
pub fn build_ball(p_hat: &[f64], delta_hat: f64) -> Result<AdmissibleSet> {
    check_weights(p_hat)?;
    if !(delta_hat >= 0.0) || !delta_hat.is_finite() {
        return invalid("ball radius must be finite and >= 0");
    }
    let n = p_hat.len();
    let mut poly = Polyhedron::new(n + 1, layout(n, &[]));
    for (i, &pi) in p_hat.iter().enumerate() {
        poly.push_eq(&[(i, 1.0)], pi);
    }
    poly.push_eq(&[(n, 1.0)], delta_hat);
    Ok(AdmissibleSet {
        kind: SetKind::Ball,
        poly,
        n,
        delta0: delta_hat,
        mass: None,
        radius: None,
        reference: Some(p_hat.to_vec()),
    })
}

/// `{(p, delta) : p in simplex, div(p, p_hat) <= gamma, 0 <= delta <= hbar(div)}`
/// with `hbar` piecewise linear through `breakpoints` `(t_k, hbar(t_k))`,
/// starting at `(0, delta_hat)` and ending at `(gamma, 0)`.
pub fn build_envelope(
    p_hat: &[f64],
    gamma: f64,
    delta_hat: f64,
    breakpoints: &[(f64, f64)],
    divergence: Divergence,
) -> Result<AdmissibleSet> {
    check_weights(p_hat)?;
    if !(gamma > 0.0) || !(delta_hat >= 0.0) {
        return invalid("envelope needs gamma > 0 and delta_hat >= 0");
    }
    if breakpoints.len() < 2 {
        return invalid("hbar needs at least two breakpoints");
    }
    let first = breakpoints[0];
    let last = breakpoints[breakpoints.len() - 1];
    let tol = 1e-12 * (1.0 + delta_hat + gamma);
    if first.0.abs() > tol || (first.1 - delta_hat).abs() > tol || (last.0 - gamma).abs() > tol || last.1.abs() > tol {
        return invalid("hbar must start at (0, delta_hat) and end at (gamma, 0)");
    }
    let mut pieces = Vec::new();
    let mut prev_slope = f64::INFINITY;
    for w in breakpoints.windows(2) {
        let (t0, h0) = w[0];
        let (t1, h1) = w[1];
        if !(t1 > t0) {
            return invalid("hbar breakpoints must be strictly increasing in t");
        }
        let s = (h1 - h0) / (t1 - t0);
        if s > 1e-12 {
            return invalid("hbar must be nonincreasing");
        }
        if s > prev_slope + 1e-12 {
            return invalid("hbar must be concave");
        }
        prev_slope = s;
        pieces.push((s, h0 - s * t0));
    }
    let n = p_hat.len();
    let (jd, naux) = match divergence {
        Divergence::Tv => (n, n),
        Divergence::Linf => (n, 0),
    };
    let extra: Vec<(&str, usize)> = if naux > 0 {
        vec![("abs_dev", naux), ("div", 1)]
    } else {
        vec![("div", 1)]
    };
    let nv = n + 1 + naux + 1;
    let jdiv = nv - 1;
    let mut poly = Polyhedron::new(nv, layout(n, &extra));
    let ones: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    poly.push_eq(&ones, 1.0);
    match divergence {
        Divergence::Tv => {
            for i in 0..n {
                let ui = n + 1 + i;
                poly.push(&[(i, 1.0), (ui, -1.0)], p_hat[i]);
                poly.push(&[(i, -1.0), (ui, -1.0)], -p_hat[i]);
            }
            let mut row: Vec<(usize, f64)> = (0..n).map(|i| (n + 1 + i, 0.5)).collect();
            row.push((jdiv, -1.0));
            poly.push(&row, 0.0);
        }
        Divergence::Linf => {
            for i in 0..n {
                poly.push(&[(i, 1.0), (jdiv, -1.0)], p_hat[i]);
                poly.push(&[(i, -1.0), (jdiv, -1.0)], -p_hat[i]);
            }
        }
    }
    poly.push(&[(jdiv, 1.0)], gamma);
    for (s, c) in pieces {
        poly.push(&[(jd, 1.0), (jdiv, -s)], c);
    }
    Ok(AdmissibleSet {
        kind: SetKind::Envelope,
        poly,
        n,
        delta0: delta_hat,
        mass: None,
        radius: None,
        reference: Some(p_hat.to_vec()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasiblePoint {
    pub p: Vec<f64>,
    pub delta: f64,
    /// The point in the polyhedron's coordinates.
    pub u: Vec<f64>,
}

/// Point used to seed the cutting-plane pool; `slack` is `delta0 - delta_min`.
pub fn feasible_point(set: &AdmissibleSet, slack: f64) -> Result<FeasiblePoint> {
    let n = set.n;
    let nf = n as f64;
    let (p, delta, u) = match set.kind {
        SetKind::FullOT | SetKind::PartialOT => {
            let r = set.radius.as_ref().expect("OT sets carry their radius");
            let sv: f64 = r.v.iter().sum();
            if !(sv > 0.0) {
                return invalid("radius minimizer is all zero; no feasible point can be formed");
            }
            if set.kind == SetKind::FullOT {
                let p: Vec<f64> = r.v.iter().map(|v| v / sv).collect();
                let delta = nf * slack / sv;
                let mut u = p.clone();
                u.push(delta);
                u.push(nf / sv);
                (p, delta, u)
            } else {
                let eps = set.mass.expect("partial sets carry their mass").lo;
                let p: Vec<f64> = r.v.iter().map(|v| v / (nf * eps)).collect();
                let mut u = p.clone();
                u.push(slack);
                (p, slack, u)
            }
        }
        SetKind::Ball | SetKind::Envelope => {
            let p = set.reference.clone().expect("reference weights");
            let mut u = vec![0.0; set.poly.n_vars()];
            u[..n].copy_from_slice(&p);
            u[n] = set.delta0;
            (p, set.delta0, u)
        }
    };
    if !set.poly.contains(&u, 1e-10) {
        return invalid(format!(
            "constructed point violates the admissible set by {:.3e}; slack {slack} does not match delta0 - delta_min",
            set.poly.violation(&u)
        ));
    }
    Ok(FeasiblePoint { p, delta, u })
}

impl AdmissibleSet {
    /// `delta0 - delta_min` for OT sets, zero otherwise.
    pub fn slack(&self) -> f64 {
        self.radius
            .as_ref()
            .map_or(0.0, |r| self.delta0 - r.delta_min)
    }
}
