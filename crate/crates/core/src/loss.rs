//! Scalar loss catalog `l(x)` applied to the projected outcome `x = y'alpha`,
//! and the two-argument inner losses `l(z, t)` used by the min-expectation
//! and q-norm risk measures.

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `a x + b`.
    Affine { a: f64, b: f64 },
    /// `|x - b1| + b2`.
    Abs { b1: f64, b2: f64 },
    /// `(x - b)_+`.
    HingePlus { b: f64 },
    /// `(x - b)_- = (b - x)_+`.
    HingeMinus { b: f64 },
    /// `(|x - b1| - b2)_+`.
    AbsHinge { b1: f64, b2: f64 },
    /// `max_j a_j x + b_j`, pieces `[a_j, b_j]`.
    PwlMax { pieces: Vec<[f64; 2]> },
    /// `max_j a_j x^2 + b_j x + c_j` with `a_j > 0`, pieces `[a_j, b_j, c_j]`.
    PwqMax { pieces: Vec<[f64; 3]> },
    /// `|x|^q / q`.
    Power { q: f64 },
}

fn one() -> f64 {
    1.0
}

/// `(scale * base(x))^power`, or `scale * base(x)` when no power is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    #[serde(flatten)]
    pub kind: LossKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub power: Option<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Result<Self> {
        Self {
            kind,
            scale: 1.0,
            power: None,
        }
        .validated()
    }

    pub fn affine(a: f64, b: f64) -> Self {
        Self::new(LossKind::Affine { a, b }).expect("finite affine loss")
    }

    /// `-x`, the portfolio loss.
    pub fn negative_return() -> Self {
        Self::affine(-1.0, 0.0)
    }

    pub fn with_scale(mut self, c: f64) -> Result<Self> {
        self.scale = c;
        self.validated()
    }

    pub fn with_power(mut self, q: f64) -> Result<Self> {
        self.power = Some(q);
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return invalid("loss scale must be finite and > 0");
        }
        if let Some(q) = self.power {
            if !(q >= 1.0) || !q.is_finite() {
                return invalid("loss power must be finite and >= 1");
            }
            if !self.is_nonneg() {
                return invalid("a power-wrapped loss needs a nonnegative base form");
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.kind {
            LossKind::Affine { a, b } if !finite(&[*a, *b]) => invalid("affine loss needs finite a, b"),
            LossKind::Abs { b1, b2 } if !finite(&[*b1, *b2]) => invalid("abs loss needs finite b1, b2"),
            LossKind::HingePlus { b } | LossKind::HingeMinus { b } if !b.is_finite() => {
                invalid("hinge loss needs a finite b")
            }
            LossKind::AbsHinge { b1, b2 } if !finite(&[*b1, *b2]) || *b2 < 0.0 => {
                invalid("abs-hinge loss needs finite b1 and b2 >= 0")
            }
            LossKind::PwlMax { pieces } => {
                if pieces.is_empty() || pieces.iter().any(|p| !finite(p)) {
                    return invalid("piecewise-linear loss needs at least one finite piece");
                }
                for (i, p) in pieces.iter().enumerate() {
                    if pieces[..i].iter().any(|r| r[0] == p[0]) {
                        return invalid("piecewise-linear loss pieces must have distinct slopes");
                    }
                }
                Ok(self)
            }
            LossKind::PwqMax { pieces } => {
                if pieces.is_empty() || pieces.iter().any(|p| !finite(p) || !(p[0] > 0.0)) {
                    return invalid("piecewise-quadratic loss needs finite pieces with a_j > 0");
                }
                Ok(self)
            }
            LossKind::Power { q } if !(*q > 1.0) || !q.is_finite() => invalid("power loss needs q > 1"),
            _ => Ok(self),
        }
    }

    fn base(&self, x: f64) -> f64 {
        match &self.kind {
            LossKind::Affine { a, b } => a * x + b,
            LossKind::Abs { b1, b2 } => (x - b1).abs() + b2,
            LossKind::HingePlus { b } => (x - b).max(0.0),
            LossKind::HingeMinus { b } => (b - x).max(0.0),
            LossKind::AbsHinge { b1, b2 } => ((x - b1).abs() - b2).max(0.0),
            LossKind::PwlMax { pieces } => pieces.iter().map(|p| p[0] * x + p[1]).fold(f64::NEG_INFINITY, f64::max),
            LossKind::PwqMax { pieces } => pieces
                .iter()
                .map(|p| p[0] * x * x + p[1] * x + p[2])
                .fold(f64::NEG_INFINITY, f64::max),
            LossKind::Power { q } => x.abs().powf(*q) / q,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let v = self.scale * self.base(x);
        match self.power {
            Some(q) => v.max(0.0).powf(q),
            None => v,
        }
    }

    /// Whether `base >= 0` everywhere.
    fn is_nonneg(&self) -> bool {
        match &self.kind {
            LossKind::Abs { b2, .. } => *b2 >= 0.0,
            LossKind::HingePlus { .. } | LossKind::HingeMinus { .. } | LossKind::AbsHinge { .. } => true,
            LossKind::Power { .. } => true,
            _ => false,
        }
    }

    /// Affine pieces `(a_j, b_j)` of `scale * base` when it is piecewise
    /// linear; `None` for quadratic and power kinds.
    pub fn base_pieces(&self) -> Option<Vec<(f64, f64)>> {
        let c = self.scale;
        let raw: Vec<(f64, f64)> = match &self.kind {
            LossKind::Affine { a, b } => vec![(*a, *b)],
            LossKind::Abs { b1, b2 } => vec![(1.0, b2 - b1), (-1.0, b1 + b2)],
            LossKind::HingePlus { b } => vec![(1.0, -b), (0.0, 0.0)],
            LossKind::HingeMinus { b } => vec![(-1.0, *b), (0.0, 0.0)],
            LossKind::AbsHinge { b1, b2 } => vec![(1.0, -b1 - b2), (-1.0, b1 - b2), (0.0, 0.0)],
            LossKind::PwlMax { pieces } => pieces.iter().map(|p| (p[0], p[1])).collect(),
            LossKind::PwqMax { .. } | LossKind::Power { .. } => return None,
        };
        Some(raw.into_iter().map(|(a, b)| (c * a, c * b)).collect())
    }

    /// Pieces of the loss itself; requires no power wrap.
    pub fn pieces(&self) -> Result<Vec<(f64, f64)>> {
        if self.power.is_some() {
            return Err(Error::Unsupported("power-wrapped loss is not piecewise linear".into()));
        }
        self.base_pieces()
            .ok_or_else(|| Error::Unsupported(format!("{} loss is not piecewise linear", self.kind_name())))
    }

    /// Exact Lipschitz constant, `max |a_j|` over the pieces.
    pub fn lipschitz(&self) -> Result<f64> {
        Ok(self.pieces()?.iter().map(|p| p.0.abs()).fold(0.0, f64::max))
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LossKind::Affine { .. } => "affine",
            LossKind::Abs { .. } => "abs",
            LossKind::HingePlus { .. } => "hinge_plus",
            LossKind::HingeMinus { .. } => "hinge_minus",
            LossKind::AbsHinge { .. } => "abs_hinge",
            LossKind::PwlMax { .. } => "pwl_max",
            LossKind::PwqMax { .. } => "pwq_max",
            LossKind::Power { .. } => "power",
        }
    }

    /// Quadratic pieces `(a, b, c)` of the loss for the order-2 closed forms:
    /// piecewise-quadratic losses directly, `|x|^2/2` as `a = scale/2`.
    pub fn quadratic_pieces(&self) -> Option<Vec<(f64, f64, f64)>> {
        if self.power.is_some() {
            return None;
        }
        let c = self.scale;
        match &self.kind {
            LossKind::PwqMax { pieces } => Some(pieces.iter().map(|p| (c * p[0], c * p[1], c * p[2])).collect()),
            LossKind::Power { q } if *q == 2.0 => Some(vec![(c / 2.0, 0.0, 0.0)]),
            _ => None,
        }
    }

    /// `sup_z { z t - l*(z) + eta z^2 / 4 }`, the order-2 smoothing of the loss,
    /// for the piecewise-linear and quadratic catalogs. Infinite outside the
    /// admissible `eta` range.
    pub fn smoothed_q2(&self, t: f64, eta: f64) -> Result<f64> {
        if let Ok(pieces) = self.pieces() {
            return Ok(pieces
                .iter()
                .map(|&(a, b)| a * t + b + eta * a * a / 4.0)
                .fold(f64::NEG_INFINITY, f64::max));
        }
        let q = self
            .quadratic_pieces()
            .ok_or_else(|| Error::Unsupported(format!("no order-2 closed form for {} loss", self.kind_name())))?;
        Ok(q.iter()
            .map(|&(a, b, c)| {
                let den = 1.0 - a * eta;
                if den <= 0.0 {
                    f64::INFINITY
                } else {
                    let u = t + b / (2.0 * a);
                    a * u * u / den - b * b / (4.0 * a) + c
                }
            })
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// Largest `eta` keeping [`Self::smoothed_q2`] finite.
    pub fn eta_bound_q2(&self) -> Option<f64> {
        self.quadratic_pieces()
            .map(|q| q.iter().map(|p| 1.0 / p.0).fold(f64::INFINITY, f64::min))
    }
}

/// Two-argument losses `l(z, t)` with a scalar auxiliary `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerLoss {
    /// `max_j a_j z + c_j t + b_j`, pieces `[a_j, c_j, b_j]`.
    Pwl { pieces: Vec<[f64; 3]> },
    /// `t + (1/kappa)(-z - t)_+ - theta z`.
    Cvar { theta: f64, kappa: f64 },
    /// `(z - t)^2 - theta z`.
    MeanVariance { theta: f64 },
    /// `l(z - t)` for a catalog loss, power wrap included.
    Shifted { loss: LossSpec },
    /// `scale (|z| - t)_+`.
    AbsExcess { scale: f64 },
}

impl InnerLoss {
    pub fn eval(&self, z: f64, t: f64) -> f64 {
        match self {
            InnerLoss::Pwl { pieces } => pieces
                .iter()
                .map(|p| p[0] * z + p[1] * t + p[2])
                .fold(f64::NEG_INFINITY, f64::max),
            InnerLoss::Cvar { theta, kappa } => t + (-z - t).max(0.0) / kappa - theta * z,
            InnerLoss::MeanVariance { theta } => (z - t) * (z - t) - theta * z,
            InnerLoss::Shifted { loss } => loss.eval(z - t),
            InnerLoss::AbsExcess { scale } => scale * (z.abs() - t).max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InnerLoss::Pwl { pieces } if pieces.is_empty() || pieces.iter().flatten().any(|v| !v.is_finite()) => {
                invalid("inner piecewise-linear loss needs finite pieces")
            }
            InnerLoss::Cvar { theta, kappa } if !(*kappa > 0.0 && *kappa <= 1.0) || !(*theta >= 0.0) => {
                invalid("cvar inner loss needs kappa in (0, 1] and theta >= 0")
            }
            InnerLoss::MeanVariance { theta } if !(*theta >= 0.0) => invalid("mean-variance needs theta >= 0"),
            InnerLoss::AbsExcess { scale } if !(*scale > 0.0) => invalid("abs-excess scale must be > 0"),
            _ => Ok(()),
        }
    }

    /// Pieces `(a, c, b)` meaning `a z + c t + b` when the loss is jointly
    /// piecewise linear in `(z, t)`.
    pub fn pwl_pieces(&self) -> Option<Vec<(f64, f64, f64)>> {
        match self {
            InnerLoss::Pwl { pieces } => Some(pieces.iter().map(|p| (p[0], p[1], p[2])).collect()),
            InnerLoss::Cvar { theta, kappa } => Some(vec![(-theta, 1.0, 0.0), (-theta - 1.0 / kappa, 1.0 - 1.0 / kappa, 0.0)]),
            InnerLoss::Shifted { loss } => loss
                .pieces()
                .ok()
                .map(|ps| ps.into_iter().map(|(a, b)| (a, -a, b)).collect()),
            InnerLoss::AbsExcess { scale } => Some(vec![(*scale, -scale, 0.0), (-scale, -scale, 0.0), (0.0, 0.0, 0.0)]),
            InnerLoss::MeanVariance { .. } => None,
        }
    }

    /// Uniform Lipschitz constant in `z`.
    pub fn lipschitz_z(&self) -> Result<f64> {
        self.pwl_pieces()
            .map(|ps| ps.iter().map(|p| p.0.abs()).fold(0.0, f64::max))
            .ok_or_else(|| Error::Unsupported("inner loss is not Lipschitz in z".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        let l = LossSpec::new(LossKind::Abs { b1: 1.0, b2: 0.5 }).unwrap().with_scale(2.0).unwrap();
        assert_eq!(l.eval(3.0), 5.0);
        assert_eq!(l.lipschitz().unwrap(), 2.0);
        let h = LossSpec::new(LossKind::AbsHinge { b1: 0.0, b2: 1.0 }).unwrap().with_power(2.0).unwrap();
        assert_eq!(h.eval(3.0), 4.0);
        assert_eq!(h.eval(0.5), 0.0);
        assert!(h.pieces().is_err());
        assert_eq!(LossSpec::negative_return().eval(2.0), -2.0);
    }

    #[test]
    fn pieces_reproduce_values() {
        let specs = [
            LossKind::Affine { a: -2.0, b: 1.0 },
            LossKind::Abs { b1: 0.3, b2: 0.1 },
            LossKind::HingePlus { b: 0.2 },
            LossKind::HingeMinus { b: -0.4 },
            LossKind::AbsHinge { b1: 0.5, b2: 0.25 },
            LossKind::PwlMax {
                pieces: vec![[1.0, 0.0], [-1.0, 0.5], [3.0, -2.0]],
            },
        ];
        for kind in specs {
            let l = LossSpec::new(kind).unwrap().with_scale(1.7).unwrap();
            let ps = l.pieces().unwrap();
            for k in -40..=40 {
                let x = k as f64 * 0.1;
                let m = ps.iter().map(|p| p.0 * x + p.1).fold(f64::NEG_INFINITY, f64::max);
                assert!((m - l.eval(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(LossSpec::new(LossKind::PwlMax {
            pieces: vec![[1.0, 0.0], [1.0, 2.0]]
        })
        .is_err());
        assert!(LossSpec::new(LossKind::PwqMax {
            pieces: vec![[0.0, 1.0, 0.0]]
        })
        .is_err());
        assert!(LossSpec::affine(1.0, 0.0).with_power(2.0).is_err());
        assert!(LossSpec::affine(1.0, 0.0).with_scale(0.0).is_err());
    }

    fn grid_sup(f: impl Fn(f64) -> f64) -> f64 {
        oracle_sup(&f, -50.0, 50.0)
    }

    fn oracle_sup(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        let mut best = (f64::NEG_INFINITY, 0.0);
        for _ in 0..60 {
            let n = 400;
            for k in 0..=n {
                let z = lo + (hi - lo) * k as f64 / n as f64;
                let v = f(z);
                if v > best.0 {
                    best = (v, z);
                }
            }
            let w = (hi - lo) / 20.0;
            lo = best.1 - w;
            hi = best.1 + w;
        }
        best.0
    }

    #[test]
    fn quadratic_smoothing_matches_scalar_maximization() {
        // sup_z z t - l*(z) + eta z^2/4 equals sup_d l(t + d) - d^2 / eta.
        let l = LossSpec::new(LossKind::PwqMax {
            pieces: vec![[1.0, 0.0, 0.0]],
        })
        .unwrap();
        assert!((l.smoothed_q2(1.0, 0.5).unwrap() - 2.0).abs() < 1e-12);
        let l = LossSpec::new(LossKind::PwqMax {
            pieces: vec![[2.0, 1.0, -0.5], [0.5, -3.0, 1.0]],
        })
        .unwrap();
        for &(t, eta) in &[(0.3, 0.1), (-1.2, 0.4), (2.0, 0.25)] {
            let direct = grid_sup(|d| l.eval(t + d) - d * d / eta);
            assert!((l.smoothed_q2(t, eta).unwrap() - direct).abs() < 1e-6, "t={t} eta={eta}");
        }
        let p = LossSpec::new(LossKind::Power { q: 2.0 }).unwrap();
        let t: f64 = 1.3;
        assert!((p.smoothed_q2(t, 0.5).unwrap() - t * t / (2.0 - 0.5)).abs() < 1e-12);
        assert_eq!(p.eta_bound_q2(), Some(2.0));
    }

    #[test]
    fn cvar_inner_pieces() {
        let l = InnerLoss::Cvar { theta: 0.3, kappa: 0.25 };
        let ps = l.pwl_pieces().unwrap();
        for &(z, t) in &[(0.1, 0.2), (-2.0, 0.5), (1.0, -3.0)] {
            let m = ps.iter().map(|p| p.0 * z + p.1 * t + p.2).fold(f64::NEG_INFINITY, f64::max);
            assert!((m - l.eval(z, t)).abs() < 1e-12);
        }
        assert!((l.lipschitz_z().unwrap() - 4.3).abs() < 1e-12);
    }
}
