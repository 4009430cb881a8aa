//! Compilation of robust conditional risk problems into conic programs.
//!
//! Every compiler takes an [`Instance`] (outcomes aligned with the admissible
//! set's columns, the set itself, the decision set and the outcome norm) and
//! emits a [`Compiled`] program whose optimum, passed through its
//! [`ValueMap`], is the worst-case risk. The support function of the
//! admissible polyhedron is always inlined through LP duality, so each
//! program is a single LP/SOCP over `(alpha, auxiliaries, z)`.

mod distortion;
mod expectation;
mod risk;
mod special;

pub use distortion::{compile_distortion_q1_exponential, MAX_EXPONENTIAL_N};
pub use expectation::{
    compile_expectation, compile_expectation_general_q2, compile_expectation_q1, compile_expectation_special_q,
};
pub use risk::{compile_min_expectation, compile_qnorm, compile_shortfall, compile_shortfall_linear};
pub use special::{mean_cvar_constant, mean_cvar_socp, mean_variance_socp};

use serde::{Deserialize, Serialize};

use crate::ambiguity::{inline_support_bounds, support, AdmissibleSet, SparsePoly};
use crate::conic::{solve, ConicProgram, LinExpr, Sense, Solution};
use crate::distortion::Distortion;
use crate::error::invalid;
use crate::loss::{InnerLoss, LossSpec};
use crate::norms::Norm;
use crate::{Error, Result};

/// `C_q = C^{q/(q-1)} (q^{1/(1-q)} - q^{q/(1-q)})`; `C_q^1` is the case `C = 1`.
pub fn c_q(c: f64, q: f64) -> f64 {
    assert!(q > 1.0, "C_q is defined for q > 1");
    c.powf(q / (q - 1.0)) * (q.powf(1.0 / (1.0 - q)) - q.powf(q / (1.0 - q)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Polyhedral decision set `{alpha : G alpha (<=|=) g}` with optional simplex,
/// sign or fixed-point restrictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub dim: usize,
    #[serde(default)]
    pub simplex: bool,
    #[serde(default)]
    pub nonneg: bool,
    #[serde(default)]
    pub rows: Vec<DecisionRow>,
    #[serde(default)]
    pub fixed: Option<Vec<f64>>,
}

impl DecisionSet {
    pub fn free(dim: usize) -> Self {
        Self {
            dim,
            simplex: false,
            nonneg: false,
            rows: Vec::new(),
            fixed: None,
        }
    }

    pub fn simplex(dim: usize) -> Self {
        Self {
            simplex: true,
            ..Self::free(dim)
        }
    }

    pub fn fixed(alpha: Vec<f64>) -> Self {
        Self {
            fixed: Some(alpha.clone()),
            ..Self::free(alpha.len())
        }
    }

    pub fn with_row(mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        self.rows.push(DecisionRow { coeffs, sense, rhs });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("decision dimension must be >= 1");
        }
        if let Some(f) = &self.fixed {
            if f.len() != self.dim || f.iter().any(|v| !v.is_finite()) {
                return invalid("fixed decision has the wrong length or non-finite entries");
            }
        }
        if self.rows.iter().any(|r| r.coeffs.len() != self.dim) {
            return invalid("decision row length differs from the decision dimension");
        }
        Ok(())
    }

    /// Adds the decision variables and their constraints.
    pub fn add_to(&self, prog: &mut ConicProgram) -> Vec<usize> {
        let lo = if self.simplex || self.nonneg { Some(0.0) } else { None };
        let alpha = prog.add_vars("alpha", self.dim, lo, None);
        if self.simplex {
            prog.add_eq(LinExpr::sum_of(&alpha) - 1.0, "decision");
        }
        for r in &self.rows {
            let e = LinExpr::dot(&alpha, &r.coeffs) - r.rhs;
            match r.sense {
                Sense::Le => prog.add_le(e, "decision"),
                Sense::Eq => prog.add_eq(e, "decision"),
            }
        }
        if let Some(f) = &self.fixed {
            for (&j, &v) in alpha.iter().zip(f) {
                prog.add_eq(LinExpr::var(j) - v, "decision");
            }
        }
        alpha
    }
}

/// Data shared by every compiler.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    /// Outcomes in the admissible set's column order.
    pub outcomes: &'a [Vec<f64>],
    pub set: &'a AdmissibleSet,
    pub decision: &'a DecisionSet,
    /// Base norm of the outcome cost; programs use its dual.
    pub y_norm: Norm,
}

impl<'a> Instance<'a> {
    pub fn new(outcomes: &'a [Vec<f64>], set: &'a AdmissibleSet, decision: &'a DecisionSet, y_norm: Norm) -> Result<Self> {
        decision.validate()?;
        if outcomes.len() != set.n {
            return Err(Error::Dimension(format!(
                "{} outcomes for an admissible set over {} samples",
                outcomes.len(),
                set.n
            )));
        }
        if outcomes.iter().any(|y| y.len() != decision.dim) {
            return Err(Error::Dimension("outcome length differs from the decision dimension".into()));
        }
        Ok(Self {
            outcomes,
            set,
            decision,
            y_norm,
        })
    }

    pub fn n(&self) -> usize {
        self.set.n
    }

    /// Number of auxiliary polyhedron columns after `(p, delta)`.
    fn n_aux(&self) -> usize {
        self.set.poly.n_vars() - self.set.dim()
    }
}

/// How the program optimum maps to the risk value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValueMap {
    Identity,
    /// `max(objective, 0)^q`.
    Power(f64),
}

impl ValueMap {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            ValueMap::Identity => v,
            ValueMap::Power(q) => v.max(0.0).powf(q),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Compiled {
    pub program: ConicProgram,
    pub alpha: Vec<usize>,
    pub value_map: ValueMap,
    pub method: String,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub value: f64,
    pub alpha: Vec<f64>,
    pub solution: Solution,
    pub method: String,
}

impl Compiled {
    pub fn solve(&self, tol: f64) -> Result<Solved> {
        let sol = solve(&self.program, tol).into_optimal()?;
        Ok(Solved {
            value: self.value_map.apply(sol.objective),
            alpha: self.alpha.iter().map(|&j| sol.x[j]).collect(),
            solution: sol,
            method: self.method.clone(),
        })
    }

    /// Value of a named scalar variable in a solution.
    pub fn var_value(&self, sol: &Solution, name: &str) -> Option<f64> {
        self.program.vars.iter().position(|v| v.name == name).map(|j| sol.x[j])
    }
}

/// Program skeleton: decision variables and projected outcomes `y_i' alpha`.
pub(crate) struct Builder<'a> {
    pub inst: Instance<'a>,
    pub prog: ConicProgram,
    pub alpha: Vec<usize>,
    pub x: Vec<LinExpr>,
    /// `delta = 0` on all of `V+`: perspective terms vanish and are dropped
    /// (otherwise their infimum is only approached as the multiplier grows).
    zero_budget: bool,
}

impl<'a> Builder<'a> {
    pub fn new(inst: Instance<'a>) -> Self {
        let mut prog = ConicProgram::new();
        let alpha = inst.decision.add_to(&mut prog);
        let x = inst.outcomes.iter().map(|y| LinExpr::dot(&alpha, y)).collect();
        let mut e = vec![0.0; inst.set.dim()];
        e[inst.set.delta_index()] = 1.0;
        let zero_budget = matches!(support(inst.set, &e), Ok(v) if v <= 1e-12);
        Self {
            inst,
            prog,
            alpha,
            x,
            zero_budget,
        }
    }

    pub fn alpha_exprs(&self) -> Vec<LinExpr> {
        self.alpha.iter().map(|&j| LinExpr::var(j)).collect()
    }

    /// `e >= scale * ||alpha||_*`; `scale = 0` leaves `e >= 0`.
    pub fn dual_norm_bound(&mut self, e: LinExpr, scale: f64) {
        if scale <= 0.0 {
            self.prog.add_ge(e, LinExpr::zero(), "dual_norm");
            return;
        }
        let alpha = self.alpha_exprs();
        crate::conic::norm_epigraph(&mut self.prog, &alpha, self.inst.y_norm.dual(), e * (1.0 / scale), "dual_norm");
    }

    /// `e >= c * ||alpha||_*^2 / den` (perspective of the squared dual norm).
    /// Only used where `e` is paid for through the `delta` column.
    pub fn perspective_bound(&mut self, e: LinExpr, c: f64, den: LinExpr) -> Result<()> {
        if c <= 0.0 || self.zero_budget {
            self.prog.add_ge(e, LinExpr::zero(), "perspective");
            return Ok(());
        }
        let alpha = self.alpha_exprs();
        crate::conic::dual_norm_power(&mut self.prog, &alpha, self.inst.y_norm, 2.0, e * (1.0 / c), Some(den), "perspective")
    }

    /// Inlines `sigma*(v | V+)` with `v_i` bounded below by `sample[i]` and
    /// `v_{N+1}` by `delta`; auxiliary columns get zero. Returns `b'z`.
    pub fn support(&mut self, sample: Vec<Vec<LinExpr>>, delta: Vec<LinExpr>) -> LinExpr {
        let mut lower = sample;
        lower.push(delta);
        lower.extend(std::iter::repeat_with(Vec::new).take(self.inst.n_aux()));
        let poly = SparsePoly::from(&self.inst.set.poly);
        inline_support_bounds(&mut self.prog, &poly, &lower, "z")
    }

    pub fn finish(mut self, objective: LinExpr, value_map: ValueMap, method: &str) -> Compiled {
        self.prog.set_objective(objective);
        Compiled {
            program: self.prog,
            alpha: self.alpha,
            value_map,
            method: method.to_string(),
        }
    }
}

/// Risk functional selector for config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskSpec {
    /// Conditional expectation of the problem loss.
    Expectation,
    /// `inf_t E[l(Z, t)]`.
    MinExpectation { inner: InnerLoss },
    /// `inf_t t + (E[l(Z, t)^q])^{1/q}`.
    Qnorm { inner: InnerLoss },
    /// `inf { kappa : E[u(-Z - kappa)] <= level }`.
    Shortfall { utility: LossSpec, level: f64 },
    /// Distortion risk of the problem loss.
    Distortion { h: Distortion },
    MeanVariance { theta: f64 },
    MeanCvar { theta: f64, kappa: f64 },
}

impl RiskSpec {
    pub const KINDS: &'static str = "expectation, min_expectation, qnorm, shortfall, distortion, mean_variance, mean_cvar";

    pub fn validate(&self) -> Result<()> {
        match self {
            RiskSpec::MinExpectation { inner } | RiskSpec::Qnorm { inner } => inner.validate(),
            RiskSpec::Shortfall { utility, level } => {
                utility.clone().validated()?;
                if !level.is_finite() {
                    return invalid("shortfall level must be finite");
                }
                Ok(())
            }
            RiskSpec::Distortion { h } => {
                h.validate()?;
                if !h.is_convex() {
                    return invalid("distortion must be convex");
                }
                Ok(())
            }
            RiskSpec::MeanVariance { theta } if !(*theta >= 0.0) => invalid("theta must be >= 0"),
            RiskSpec::MeanCvar { theta, kappa } if !(*theta >= 0.0) || !(*kappa > 0.0 && *kappa <= 1.0) => {
                invalid("mean-cvar needs theta >= 0 and kappa in (0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// Compiles any non-distortion risk. Distortion risk goes through
/// [`compile_distortion_q1_exponential`] or the cutting-plane solver.
pub fn compile(risk: &RiskSpec, loss: &LossSpec, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    risk.validate()?;
    match risk {
        RiskSpec::Expectation => compile_expectation(loss, inst, q),
        RiskSpec::MinExpectation { inner } => compile_min_expectation(inner, inst, q),
        RiskSpec::Qnorm { inner } => compile_qnorm(inner, inst, q),
        RiskSpec::Shortfall { utility, level } => compile_shortfall(utility, *level, inst, q),
        RiskSpec::MeanVariance { theta } => mean_variance_socp(*theta, inst, q),
        RiskSpec::MeanCvar { theta, kappa } => mean_cvar_socp(*theta, *kappa, inst, q),
        RiskSpec::Distortion { h } => {
            if q != 1.0 {
                return Err(Error::Unsupported(
                    "distortion risk with a general loss at order q > 1 has no reformulation".into(),
                ));
            }
            compile_distortion_q1_exponential(h, loss, inst, distortion::DEFAULT_SECANT_CELLS)
        }
    }
}

pub(crate) fn require_q(q: f64, allowed: &[f64], what: &str) -> Result<()> {
    if allowed.contains(&q) {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{what} is compiled for q in {allowed:?}, got q = {q}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_q_at_two() {
        assert!((c_q(1.0, 2.0) - 0.25).abs() < 1e-15);
        assert!((c_q(3.0, 2.0) - 2.25).abs() < 1e-15);
    }
}
