//! Intermediate representation for LP/SOCP problems.
//!
//! Every reformulation compiles into a [`ConicProgram`]: a linear objective to
//! minimize, linear rows (`<=` or `=`), second-order cone blocks `||t|| <= s`
//! and per-variable bounds. [`solve`] hands the program to Clarabel and audits
//! the returned point against the IR before reporting it optimal.

mod backend;
mod expr;
mod helpers;

pub use backend::{default_tol, solve, solve_robust, Solution, Status};
pub use expr::LinExpr;
pub use helpers::{dual_norm_power, norm_epigraph, quad_over_linear};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarInfo {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub group: String,
}

impl LinearRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }
}

/// `||t||_2 <= s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocBlock {
    pub t: Vec<LinExpr>,
    pub s: LinExpr,
    pub group: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub vars: Vec<VarInfo>,
    pub objective: LinExpr,
    pub rows: Vec<LinearRow>,
    pub socs: Vec<SocBlock>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> usize {
        self.vars.push(VarInfo {
            name: name.into(),
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    pub fn free_var(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, None, None)
    }

    pub fn nonneg_var(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, Some(0.0), None)
    }

    /// Adds `n` variables named `prefix[0]..prefix[n-1]` with common bounds.
    pub fn add_vars(&mut self, prefix: &str, n: usize, lower: Option<f64>, upper: Option<f64>) -> Vec<usize> {
        (0..n)
            .map(|i| self.add_var(format!("{prefix}[{i}]"), lower, upper))
            .collect()
    }

    /// `expr <= 0`.
    pub fn add_le(&mut self, expr: LinExpr, group: &str) {
        self.push_row(expr, Sense::Le, group);
    }

    /// `lhs >= rhs`.
    pub fn add_ge(&mut self, lhs: LinExpr, rhs: LinExpr, group: &str) {
        self.push_row(rhs - lhs, Sense::Le, group);
    }

    /// `expr = 0`.
    pub fn add_eq(&mut self, expr: LinExpr, group: &str) {
        self.push_row(expr, Sense::Eq, group);
    }

    fn push_row(&mut self, expr: LinExpr, sense: Sense, group: &str) {
        let expr = expr.compact();
        self.rows.push(LinearRow {
            coeffs: expr.terms,
            sense,
            rhs: -expr.constant,
            group: group.to_string(),
        });
    }

    pub fn add_soc(&mut self, t: Vec<LinExpr>, s: LinExpr, group: &str) {
        self.socs.push(SocBlock {
            t: t.into_iter().map(LinExpr::compact).collect(),
            s: s.compact(),
            group: group.to_string(),
        });
    }

    pub fn set_objective(&mut self, objective: LinExpr) {
        self.objective = objective.compact();
    }

    /// Variables whose name starts with `prefix[`.
    pub fn vars_in(&self, prefix: &str) -> Vec<usize> {
        let tag = format!("{prefix}[");
        (0..self.vars.len())
            .filter(|&j| self.vars[j].name.starts_with(&tag) || self.vars[j].name == prefix)
            .collect()
    }

    pub fn rows_in(&self, group: &str) -> usize {
        self.rows.iter().filter(|r| r.group == group).count()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let n = self.vars.len();
        let bad = |e: &LinExpr| e.terms.iter().any(|&(j, _)| j >= n);
        if bad(&self.objective)
            || self.rows.iter().any(|r| r.coeffs.iter().any(|&(j, _)| j >= n))
            || self.socs.iter().any(|c| bad(&c.s) || c.t.iter().any(|e| bad(e)))
        {
            return crate::error::invalid("variable index out of range in program");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }
}
