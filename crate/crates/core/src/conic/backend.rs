use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use super::{ConicProgram, Sense};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericFailure,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub objective: f64,
    pub solver_tol: f64,
    /// Largest scaled constraint violation found by the audit.
    pub residual: f64,
    pub iterations: u32,
    pub detail: String,
}

impl Solution {
    pub fn into_optimal(self) -> Result<Solution> {
        match self.status {
            Status::Optimal => Ok(self),
            status => Err(Error::Solver {
                status,
                detail: self.detail,
            }),
        }
    }
}

/// Backend tolerance: `OTCRM_SOLVER_TOL` if set and valid, else `1e-8`.
pub fn default_tol() -> f64 {
    static TOL: OnceLock<f64> = OnceLock::new();
    *TOL.get_or_init(|| {
        std::env::var("OTCRM_SOLVER_TOL")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t > 0.0)
            .unwrap_or(1e-8)
    })
}

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    fn push_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let r = self.b.len();
        for (j, a) in coeffs {
            if a != 0.0 {
                self.rows.push(r);
                self.cols.push(j);
                self.vals.push(a);
            }
        }
        self.b.push(rhs);
    }
}

pub fn solve(prog: &ConicProgram, tol: f64) -> Solution {
    let n = prog.n_vars();
    let fail = |detail: String| Solution {
        status: Status::NumericFailure,
        x: vec![0.0; n],
        objective: f64::NAN,
        solver_tol: tol,
        residual: f64::INFINITY,
        iterations: 0,
        detail,
    };
    if let Err(e) = prog.validate() {
        return fail(e.to_string());
    }

    // A x + s = b with s ordered as zero cone, nonnegative cone, then SOCs.
    let mut t = Triplets {
        rows: Vec::new(),
        cols: Vec::new(),
        vals: Vec::new(),
        b: Vec::new(),
    };
    let mut cones = Vec::new();
    let eq: Vec<_> = prog.rows.iter().filter(|r| r.sense == Sense::Eq).collect();
    for r in &eq {
        t.push_row(r.coeffs.iter().copied(), r.rhs);
    }
    if !eq.is_empty() {
        cones.push(SupportedConeT::ZeroConeT(eq.len()));
    }
    let start = t.b.len();
    for r in prog.rows.iter().filter(|r| r.sense == Sense::Le) {
        t.push_row(r.coeffs.iter().copied(), r.rhs);
    }
    for (j, v) in prog.vars.iter().enumerate() {
        if let Some(l) = v.lower.filter(|l| l.is_finite()) {
            t.push_row([(j, -1.0)], -l);
        }
        if let Some(u) = v.upper.filter(|u| u.is_finite()) {
            t.push_row([(j, 1.0)], u);
        }
    }
    for c in prog.socs.iter().filter(|c| c.t.is_empty()) {
        t.push_row(c.s.terms.iter().map(|&(j, a)| (j, -a)), c.s.constant);
    }
    if t.b.len() > start {
        cones.push(SupportedConeT::NonnegativeConeT(t.b.len() - start));
    }
    for c in prog.socs.iter().filter(|c| !c.t.is_empty()) {
        t.push_row(c.s.terms.iter().map(|&(j, a)| (j, -a)), c.s.constant);
        for e in &c.t {
            t.push_row(e.terms.iter().map(|&(j, a)| (j, -a)), e.constant);
        }
        cones.push(SupportedConeT::SecondOrderConeT(1 + c.t.len()));
    }

    let m = t.b.len();
    let a = CscMatrix::new_from_triplets(m, n, t.rows, t.cols, t.vals);
    let p = CscMatrix::zeros((n, n));
    let mut q = vec![0.0; n];
    for &(j, c) in &prog.objective.terms {
        q[j] += c;
    }
    let settings = match DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .max_iter(400)
        .build()
    {
        Ok(s) => s,
        Err(e) => return fail(format!("settings: {e:?}")),
    };
    let mut solver = match DefaultSolver::new(&p, &q, &a, &t.b, &cones, settings) {
        Ok(s) => s,
        Err(e) => return fail(format!("setup: {e:?}")),
    };
    solver.solve();
    let sol = &solver.solution;
    let x = sol.x.clone();
    let iterations = sol.iterations;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
        _ => Status::NumericFailure,
    };
    let detail = format!("{:?} after {} iterations", sol.status, iterations);
    if status != Status::Optimal {
        return Solution {
            status,
            x,
            objective: f64::NAN,
            solver_tol: tol,
            residual: f64::INFINITY,
            iterations,
            detail,
        };
    }
    let residual = audit(prog, &x);
    let objective = prog.objective.eval(&x);
    if residual > 10.0 * tol || !objective.is_finite() {
        return Solution {
            status: Status::NumericFailure,
            x,
            objective,
            solver_tol: tol,
            residual,
            iterations,
            detail: format!("{detail}; audit residual {residual:.3e} exceeds {:.1e}", 10.0 * tol),
        };
    }
    Solution {
        status,
        x,
        objective,
        solver_tol: tol,
        residual,
        iterations,
        detail,
    }
}

/// [`solve`], retried once at a tighter and once at a looser tolerance when
/// the backend stalls or the audit rejects the point. Infeasible and
/// unbounded verdicts are returned as is.
pub fn solve_robust(prog: &ConicProgram, tol: f64) -> Solution {
    let first = solve(prog, tol);
    if first.status != Status::NumericFailure {
        return first;
    }
    for t in [tol * 1e-2, tol * 1e2] {
        let s = solve(prog, t);
        if s.status == Status::Optimal {
            return s;
        }
    }
    first
}

/// Largest constraint violation of `x`, scaled by `1 + M` with `M` the
/// largest magnitude among all compared quantities. This matches the
/// backend's infinity-norm stopping rule; a per-row scale would hold small
/// rows next to large ones to a tighter standard than the solver offers.
pub(crate) fn audit(prog: &ConicProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for r in &prog.rows {
        let act = r.activity(x);
        scale = r
            .coeffs
            .iter()
            .fold(scale.max(r.rhs.abs()), |m, &(j, a)| m.max((a * x[j]).abs()));
        let v = match r.sense {
            Sense::Le => (act - r.rhs).max(0.0),
            Sense::Eq => (act - r.rhs).abs(),
        };
        worst = worst.max(v);
    }
    for (j, v) in prog.vars.iter().enumerate() {
        if let Some(l) = v.lower {
            scale = scale.max(l.abs());
            worst = worst.max(l - x[j]);
        }
        if let Some(u) = v.upper {
            scale = scale.max(u.abs());
            worst = worst.max(x[j] - u);
        }
    }
    for c in &prog.socs {
        let s = c.s.eval(x);
        let nt = c.t.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
        scale = scale.max(s.abs()).max(nt);
        worst = worst.max(nt - s);
    }
    worst.max(0.0) / (1.0 + scale)
}
