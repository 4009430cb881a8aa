//! Cutting-plane solver for the order-1 distortion (RDEU) problem
//! `min_alpha max_{(p, delta) in V+} rho_h^p[l(Y'alpha)] + Lip(l) sup h' delta ||alpha||_*`.
//!
//! The master problem minimizes over `alpha` against a finite pool of
//! scenarios `(p, delta, pbar)`; pricing maximizes the concave objective over
//! `V+` with the loss ordering fixed by the current `alpha`.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{feasible_point, AdmissibleSet, SetKind};
use crate::conic::{default_tol, norm_epigraph, solve_robust, ConicProgram, LinExpr};
use crate::distortion::{distortion_value, distortion_weights, sorted_order, Distortion};
use crate::error::invalid;
use crate::loss::LossSpec;
use crate::norms::Norm;
use crate::reformulations::{DecisionSet, Instance};
use crate::{Error, Result};

/// Tolerance for the LPs inside pricing.
const PRICING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub p: Vec<f64>,
    pub delta: f64,
    pub pbar: Vec<f64>,
    /// Iteration that produced the scenario; 0 for the initial point.
    pub iter: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPool {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioPool {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Appends a scenario after checking that `pbar` is a probability vector
    /// and `(p, delta)` lies in the admissible set.
    pub fn push(&mut self, set: &AdmissibleSet, s: Scenario) -> Result<()> {
        if s.pbar.len() != set.n || s.p.len() != set.n {
            return Err(Error::Dimension("scenario length differs from the sample count".into()));
        }
        if s.pbar.iter().any(|&v| v < -1e-9) || (s.pbar.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return invalid("scenario weights are not a probability vector");
        }
        let v = set.pair_violation(&s.p, s.delta)?;
        if v > 1e-6 {
            return invalid(format!("scenario lies outside the admissible set (violation {v:.2e})"));
        }
        self.scenarios.push(s);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub alpha: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub records: Vec<IterRecord>,
}

impl IterationLog {
    /// CSV with columns `iter,lb,ub,gap,seconds`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iter", "lb", "ub", "gap", "seconds"])?;
        for r in &self.records {
            wr.write_record([
                r.iter.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                r.gap.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpOptions {
    /// Absolute gap `u - l` at which the loop stops.
    pub psi_tol: f64,
    pub max_iter: usize,
    /// Backend tolerance for master problems.
    pub solver_tol: f64,
    /// Relative tolerance of the Kelley pricing loop for smooth `h`.
    pub kelley_tol: f64,
    /// Cut-round cap of the Kelley loop.
    pub kelley_cap: usize,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self {
            psi_tol: 1e-4,
            max_iter: 200,
            solver_tol: default_tol(),
            kelley_tol: 1e-7,
            kelley_cap: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpStatus {
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdeuResult {
    pub alpha: Vec<f64>,
    /// Lower bound at termination.
    pub value: f64,
    /// Best upper bound seen.
    pub upper: f64,
    pub status: CpStatus,
    pub pool: ScenarioPool,
    pub log: IterationLog,
}

/// Penalty constant `Lip(l) sup h'`.
pub fn penalty_constant(h: &Distortion, loss: &LossSpec) -> Result<f64> {
    Ok(loss.lipschitz()? * h.sup_deriv())
}

/// `min_{alpha in A} max_s sum pbar_i l(y_i'alpha) + c delta_s ||alpha||_*`.
pub fn master_lower(
    pool: &ScenarioPool,
    loss: &LossSpec,
    outcomes: &[Vec<f64>],
    decision: &DecisionSet,
    y_norm: Norm,
    c: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    if pool.is_empty() {
        return invalid("master problem needs a nonempty scenario pool");
    }
    let pieces = loss.pieces()?;
    let mut prog = ConicProgram::new();
    let alpha = decision.add_to(&mut prog);
    let theta = prog.free_var("theta");
    let l: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let li = prog.free_var(format!("L[{i}]"));
            let x = LinExpr::dot(&alpha, y);
            for &(a, b) in &pieces {
                prog.add_ge(LinExpr::var(li), x.clone() * a + b, "loss");
            }
            li
        })
        .collect();
    let needs_norm = c > 0.0 && pool.scenarios.iter().any(|s| s.delta > 0.0);
    let e = needs_norm.then(|| {
        let e = prog.nonneg_var("e");
        let ax: Vec<LinExpr> = alpha.iter().map(|&j| LinExpr::var(j)).collect();
        norm_epigraph(&mut prog, &ax, y_norm.dual(), LinExpr::var(e), "dual_norm");
        e
    });
    for s in &pool.scenarios {
        let mut rhs = LinExpr::dot(&l, &s.pbar);
        if let Some(e) = e {
            rhs.add_term(e, c * s.delta);
        }
        prog.add_ge(LinExpr::var(theta), rhs, "scenario");
    }
    prog.set_objective(LinExpr::var(theta));
    let sol = solve_robust(&prog, tol).into_optimal()?;
    Ok((alpha.iter().map(|&j| sol.x[j]).collect(), sol.objective))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pricing {
    /// Valid upper bound on the inner maximum.
    pub upper: f64,
    /// Objective at the returned point.
    pub attained: f64,
    pub p: Vec<f64>,
    pub delta: f64,
    pub pbar: Vec<f64>,
    /// LP rounds used (1 for PWL `h`, 0 for a single-point set).
    pub rounds: usize,
}

/// `max_{(p, delta) in V+} sum_k h(P_k)(r_(k) - r_(k+1)) + r_(N) + c ||alpha||_* delta`
/// with the order of `r = l(y'alpha)` fixed.
pub fn pricing_upper(
    alpha: &[f64],
    h: &Distortion,
    loss: &LossSpec,
    inst: &Instance<'_>,
    c: f64,
    opts: &CpOptions,
) -> Result<Pricing> {
    let set = inst.set;
    let n = set.n;
    let r: Vec<f64> = inst
        .outcomes
        .iter()
        .map(|y| loss.eval(y.iter().zip(alpha).map(|(a, b)| a * b).sum()))
        .collect();
    let slope = c * inst.y_norm.dual().eval(alpha);
    let eval = |p: &[f64], delta: f64| distortion_value(h, &r, p) + slope * delta;

    if set.kind == SetKind::Ball {
        let fp = feasible_point(set, 0.0)?;
        let v = eval(&fp.p, fp.delta);
        return Ok(Pricing {
            upper: v,
            attained: v,
            pbar: distortion_weights(h, &fp.p, &r),
            p: fp.p,
            delta: fp.delta,
            rounds: 0,
        });
    }

    let order = sorted_order(&r);
    let w: Vec<f64> = (0..n.saturating_sub(1)).map(|k| r[order[k]] - r[order[k + 1]]).collect();
    let top = r[order[n - 1]];
    let active: Vec<usize> = (0..w.len()).filter(|&k| w[k] < 0.0).collect();

    // Cuts per active coordinate k: H_k >= s P_k + b.
    let mut cuts: Vec<Vec<(f64, f64)>> = vec![Vec::new(); w.len()];
    let exact = h.pieces();
    for &k in &active {
        cuts[k] = match &exact {
            Some(pc) => pc.clone(),
            None => [0.0, 0.5, 1.0].iter().map(|&x| tangent(h, x)).collect(),
        };
    }

    let mut best: Option<Pricing> = None;
    for round in 1..=opts.kelley_cap.max(1) {
        let (upper, u) = pricing_lp(set, &order, &w, &active, &cuts, top, slope)?;
        let p: Vec<f64> = u[..n].iter().map(|v| v.max(0.0)).collect();
        let delta = u[n].max(0.0);
        let attained = eval(&p, delta);
        let cand = Pricing {
            upper,
            attained,
            pbar: distortion_weights(h, &p, &r),
            p,
            delta,
            rounds: round,
        };
        let done = exact.is_some() || upper - attained <= opts.kelley_tol * upper.abs().max(1.0);
        let improved = best.as_ref().map_or(true, |b| cand.attained > b.attained);
        let upper_min = best.as_ref().map_or(upper, |b| b.upper.min(upper));
        if improved {
            best = Some(cand);
        }
        let b = best.as_mut().expect("set above");
        b.upper = upper_min;
        b.rounds = round;
        if done || b.upper - b.attained <= opts.kelley_tol * b.upper.abs().max(1.0) {
            return Ok(best.expect("set above"));
        }
        let mut cum = 0.0;
        for k in 0..w.len() {
            cum += u[order[k]];
            if w[k] < 0.0 {
                cuts[k].push(tangent(h, cum.clamp(0.0, 1.0)));
            }
        }
    }
    Err(Error::Unsupported(format!(
        "pricing did not reach relative gap {} within {} cut rounds",
        opts.kelley_tol, opts.kelley_cap
    )))
}

/// Supporting line of convex `h` at `x`.
fn tangent(h: &Distortion, x: f64) -> (f64, f64) {
    let s = if x <= 0.0 { h.left_deriv(1e-12) } else { h.left_deriv(x) };
    (s, h.eval(x) - s * x)
}

/// LP over the polyhedron with hypograph variables `H_k` bounded below by
/// the cuts; returns the optimum and the polyhedron point.
fn pricing_lp(
    set: &AdmissibleSet,
    order: &[usize],
    w: &[f64],
    active: &[usize],
    cuts: &[Vec<(f64, f64)>],
    top: f64,
    slope: f64,
) -> Result<(f64, Vec<f64>)> {
    let poly = &set.poly;
    let mut prog = ConicProgram::new();
    let u = prog.add_vars("u", poly.n_vars(), Some(0.0), None);
    for (row, &b) in poly.a.iter().zip(&poly.b) {
        let mut e = LinExpr::constant(-b);
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                e.add_term(u[j], a);
            }
        }
        prog.add_le(e, "poly");
    }
    let mut obj = LinExpr::constant(-top) + LinExpr::term(u[set.delta_index()], -slope);
    // Running sums P_k = P_{k-1} + u_(k) keep every cut row two entries long.
    let mut cum = LinExpr::zero();
    let mut k_next = 0;
    for &k in active {
        while k_next <= k {
            cum.add_term(u[order[k_next]], 1.0);
            k_next += 1;
        }
        let pk = prog.free_var(format!("P[{k}]"));
        prog.add_eq(LinExpr::var(pk) - cum, "cumsum");
        cum = LinExpr::var(pk);
        let hk = prog.free_var(format!("H[{k}]"));
        for &(s, b) in &cuts[k] {
            prog.add_ge(LinExpr::var(hk), LinExpr::term(pk, s) + b, "hypograph");
        }
        obj.add_term(hk, -w[k]);
    }
    prog.set_objective(obj);
    let sol = solve_robust(&prog, PRICING_TOL).into_optimal()?;
    Ok((-sol.objective, u.iter().map(|&j| sol.x[j]).collect()))
}

fn stage(e: Error, what: &str, iter: usize) -> Error {
    match e {
        Error::Solver { status, detail } => Error::Solver {
            status,
            detail: format!("{what} at iteration {iter}: {detail}"),
        },
        other => other,
    }
}

/// Algorithm loop: seed the pool with a feasible point (`pbar = p`), then
/// alternate master and pricing until `u_j - l_j <= psi_tol`.
pub fn solve_rdeu(h: &Distortion, loss: &LossSpec, inst: &Instance<'_>, opts: &CpOptions) -> Result<RdeuResult> {
    h.validate()?;
    if !h.is_convex() {
        return invalid("distortion must be convex");
    }
    let c = penalty_constant(h, loss)?;
    let set = inst.set;
    let fp = feasible_point(set, set.slack())?;
    let mut pool = ScenarioPool::default();
    pool.push(
        set,
        Scenario {
            pbar: fp.p.clone(),
            p: fp.p,
            delta: fp.delta,
            iter: 0,
        },
    )?;
    let mut log = IterationLog::default();
    let start = Instant::now();
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut alpha = Vec::new();
    for j in 1..=opts.max_iter {
        let (a, l) = master_lower(&pool, loss, inst.outcomes, inst.decision, inst.y_norm, c, opts.solver_tol)
            .map_err(|e| stage(e, "master", j))?;
        // Every master value is a valid bound; keep the sequence monotone
        // against solver noise.
        lower = lower.max(l);
        let pr = pricing_upper(&a, h, loss, inst, c, opts).map_err(|e| stage(e, "pricing", j))?;
        if pr.upper < upper {
            upper = pr.upper;
        }
        alpha = a;
        let gap = pr.upper - lower;
        log.records.push(IterRecord {
            iter: j,
            lower,
            upper: pr.upper,
            gap,
            alpha: alpha.clone(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if gap <= opts.psi_tol {
            return Ok(RdeuResult {
                alpha,
                value: lower,
                upper,
                status: CpStatus::Converged,
                pool,
                log,
            });
        }
        pool.push(
            set,
            Scenario {
                p: pr.p,
                delta: pr.delta,
                pbar: pr.pbar,
                iter: j,
            },
        )?;
    }
    Ok(RdeuResult {
        alpha,
        value: lower,
        upper,
        status: CpStatus::MaxIter,
        pool,
        log,
    })
}
