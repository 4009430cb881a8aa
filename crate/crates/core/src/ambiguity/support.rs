use super::AdmissibleSet;
use super::Polyhedron;
use crate::conic::{solve_robust, ConicProgram, LinExpr};
use crate::{Error, Result};

/// Backend tolerance for the small support LPs.
const SUPPORT_TOL: f64 = 1e-10;

fn primal(poly: &Polyhedron, v: &[f64]) -> (ConicProgram, Vec<usize>) {
    let mut prog = ConicProgram::new();
    let u = prog.add_vars("u", poly.n_vars(), Some(0.0), None);
    for (row, &bi) in poly.a.iter().zip(&poly.b) {
        let mut e = LinExpr::constant(-bi);
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                e.add_term(u[j], a);
            }
        }
        prog.add_le(e, "poly");
    }
    let obj = v
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .fold(LinExpr::zero(), |acc, (j, &c)| acc + LinExpr::term(u[j], -c));
    prog.set_objective(obj);
    (prog, u)
}

fn check_len(set: &AdmissibleSet, v: &[f64]) -> Result<()> {
    if v.len() != set.dim() {
        return Err(Error::Dimension(format!(
            "support direction has length {} but the set has {} (p, delta) coordinates",
            v.len(),
            set.dim()
        )));
    }
    Ok(())
}

/// `sup { v'(p, delta) : (p, delta) in V+ }` and a maximizer in the
/// polyhedron's coordinates.
pub fn support_argmax(set: &AdmissibleSet, v: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len(set, v)?;
    let (prog, _) = primal(&set.poly, v);
    let sol = solve_robust(&prog, SUPPORT_TOL).into_optimal().map_err(|e| match (&e, &set.radius) {
        (Error::Solver { status, .. }, Some(r)) if *status == crate::conic::Status::Infeasible => {
            Error::InfeasibleRadius {
                delta0: set.delta0,
                delta_min: r.delta_min,
                strict: r.strict,
            }
        }
        _ => e,
    })?;
    Ok((-sol.objective, sol.x))
}

pub fn support(set: &AdmissibleSet, v: &[f64]) -> Result<f64> {
    support_argmax(set, v).map(|r| r.0)
}

/// Row of a sparse polyhedron: `coeffs . u <= rhs`, or `=` when `eq`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub eq: bool,
}

/// `{u >= 0 : rows}` kept sparse; used when the dense form would be too big.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparsePoly {
    pub n_cols: usize,
    pub rows: Vec<SparseRow>,
}

impl SparsePoly {
    pub fn new(n_cols: usize) -> Self {
        Self { n_cols, rows: Vec::new() }
    }

    pub fn push_le(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(SparseRow { coeffs, rhs, eq: false });
    }

    pub fn push_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(SparseRow { coeffs, rhs, eq: true });
    }
}

impl From<&Polyhedron> for SparsePoly {
    fn from(poly: &Polyhedron) -> Self {
        let rows = poly
            .a
            .iter()
            .zip(&poly.b)
            .map(|(row, &rhs)| SparseRow {
                coeffs: row.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, &a)| (j, a)).collect(),
                rhs,
                eq: false,
            })
            .collect();
        Self { n_cols: poly.n_vars(), rows }
    }
}

/// Adds the dual of the support LP to `prog`:
/// `z >= 0`, `[A'z]_j >= v_j` for each column, and returns `b'z`.
///
/// `v` has one entry per polyhedron column; entries may depend on other
/// program variables.
pub fn inline_support(prog: &mut ConicProgram, poly: &Polyhedron, v: &[LinExpr], prefix: &str) -> LinExpr {
    let lower: Vec<Vec<LinExpr>> = v.iter().map(|e| vec![e.clone()]).collect();
    inline_support_bounds(prog, &SparsePoly::from(poly), &lower, prefix)
}

/// Dual of `sup { v'u : u in poly }` when each `v_j` is only bounded below:
/// the column row `[A'z]_j >= e` is emitted for every `e` in `lower[j]`
/// (an empty list means `v_j = 0`). Equality rows get free multipliers.
pub fn inline_support_bounds(prog: &mut ConicProgram, poly: &SparsePoly, lower: &[Vec<LinExpr>], prefix: &str) -> LinExpr {
    assert_eq!(lower.len(), poly.n_cols, "support direction must cover every column");
    let z: Vec<usize> = poly
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let lo = if r.eq { None } else { Some(0.0) };
            prog.add_var(format!("{prefix}[{k}]"), lo, None)
        })
        .collect();
    let mut cols: Vec<LinExpr> = vec![LinExpr::zero(); poly.n_cols];
    for (k, r) in poly.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            cols[j].add_term(z[k], a);
        }
    }
    for (col, lows) in cols.into_iter().zip(lower) {
        if lows.is_empty() {
            prog.add_ge(col, LinExpr::zero(), prefix);
        } else {
            for e in lows {
                prog.add_ge(col.clone(), e.clone(), prefix);
            }
        }
    }
    let rhs: Vec<f64> = poly.rows.iter().map(|r| r.rhs).collect();
    LinExpr::dot(&z, &rhs)
}

pub(super) fn pair_violation(set: &AdmissibleSet, p: &[f64], delta: f64) -> Result<f64> {
    if p.len() != set.n {
        return Err(Error::Dimension("membership point has the wrong length".into()));
    }
    let neg = p.iter().fold((-delta).max(0.0), |m, &x| m.max(-x));
    let poly = &set.poly;
    let mut prog = ConicProgram::new();
    let aux = prog.add_vars("aux", poly.n_vars() - set.dim(), Some(0.0), None);
    let t = prog.nonneg_var("t");
    for (row, &bi) in poly.a.iter().zip(&poly.b) {
        let fixed: f64 = row[..set.n].iter().zip(p).map(|(a, x)| a * x).sum::<f64>() + row[set.n] * delta;
        let mut e = LinExpr::constant(fixed - bi) + LinExpr::term(t, -super::row_scale(row, bi));
        for (k, &j) in aux.iter().enumerate() {
            let a = row[set.dim() + k];
            if a != 0.0 {
                e.add_term(j, a);
            }
        }
        prog.add_le(e, "poly");
    }
    prog.set_objective(LinExpr::var(t));
    let sol = solve_robust(&prog, 1e-10).into_optimal()?;
    Ok(neg.max(sol.objective))
}
