//! Convex distortion functions `h` on `[0, 1]` and the distortion risk
//! functional on discrete distributions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

/// Largest `N` for exhaustive subset checks.
pub const MAX_ENVELOPE_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distortion {
    /// Piecewise linear through `(x_k, h(x_k))` from `(0, 0)` to `(1, 1)`.
    Pwl { breakpoints: Vec<(f64, f64)> },
    /// `x^2`.
    Square,
    /// `(e^x - 1) / (e - 1)`.
    Exp,
    /// `x^k`, `k >= 1`.
    Power { k: f64 },
}

impl Distortion {
    pub fn identity() -> Self {
        Distortion::Pwl {
            breakpoints: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    pub fn pwl(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let h = Distortion::Pwl { breakpoints };
        h.validate()?;
        Ok(h)
    }

    /// Mean-CVaR mix: slope `theta/(1+theta)` up to `1 - kappa`, then
    /// `(1 + theta kappa) / (kappa (1 + theta))`.
    pub fn cvar_mix(theta: f64, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) || !(theta >= 0.0) || !theta.is_finite() {
            return invalid("cvar mix needs kappa in (0, 1] and theta >= 0");
        }
        if kappa == 1.0 {
            return Ok(Self::identity());
        }
        let x = 1.0 - kappa;
        Self::pwl(vec![(0.0, 0.0), (x, theta / (1.0 + theta) * x), (1.0, 1.0)])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distortion::Pwl { breakpoints: bp } => {
                if bp.len() < 2 || bp[0] != (0.0, 0.0) {
                    return invalid("distortion breakpoints must start at (0, 0)");
                }
                let last = bp[bp.len() - 1];
                if (last.0 - 1.0).abs() > 1e-12 || (last.1 - 1.0).abs() > 1e-12 {
                    return invalid("distortion breakpoints must end at (1, 1)");
                }
                for w in bp.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return invalid("distortion breakpoints must be strictly increasing in x");
                    }
                    if w[1].1 < w[0].1 {
                        return invalid("distortion must be nondecreasing");
                    }
                }
                Ok(())
            }
            Distortion::Power { k } if !(*k >= 1.0) || !k.is_finite() => invalid("power distortion needs k >= 1"),
            _ => Ok(()),
        }
    }

    /// Whether the breakpoint slopes are nondecreasing (always true for the
    /// smooth family).
    pub fn is_convex(&self) -> bool {
        match self {
            Distortion::Pwl { breakpoints } => {
                let s = slopes(breakpoints);
                s.windows(2).all(|w| w[1] >= w[0] - 1e-12)
            }
            _ => true,
        }
    }

    pub fn is_pwl(&self) -> bool {
        matches!(self, Distortion::Pwl { .. })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Distortion::Pwl { breakpoints: bp } => {
                let k = bp.partition_point(|b| b.0 < x).clamp(1, bp.len() - 1);
                let (x0, y0) = bp[k - 1];
                let (x1, y1) = bp[k];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            Distortion::Square => x * x,
            Distortion::Exp => x.exp_m1() / (std::f64::consts::E - 1.0),
            Distortion::Power { k } => x.powf(*k),
        }
    }

    /// Left derivative on `(0, 1]`; the right derivative at 0.
    pub fn left_deriv(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            Distortion::Pwl { breakpoints: bp } => {
                let s = slopes(bp);
                if x <= 0.0 {
                    return s[0];
                }
                let k = bp.partition_point(|b| b.0 < x).clamp(1, bp.len() - 1);
                s[k - 1]
            }
            Distortion::Square => 2.0 * x,
            Distortion::Exp => x.exp() / (std::f64::consts::E - 1.0),
            Distortion::Power { k } => k * x.powf(k - 1.0),
        }
    }

    /// `sup_{x in (0,1]} h'_-(x)`; attained at 1 for convex `h`.
    pub fn sup_deriv(&self) -> f64 {
        match self {
            Distortion::Pwl { breakpoints } => slopes(breakpoints).into_iter().fold(0.0, f64::max),
            _ => self.left_deriv(1.0),
        }
    }

    /// `(int_0^1 |h'|^r dx)^{1/r}` for `r >= 1`.
    pub fn deriv_norm(&self, r: f64) -> f64 {
        if r.is_infinite() {
            return self.sup_deriv();
        }
        match self {
            Distortion::Pwl { breakpoints: bp } => {
                let s = slopes(bp);
                let total: f64 = bp.windows(2).zip(&s).map(|(w, sk)| (w[1].0 - w[0].0) * sk.abs().powf(r)).sum();
                total.powf(1.0 / r)
            }
            Distortion::Square => (2f64.powf(r) / (r + 1.0)).powf(1.0 / r),
            Distortion::Power { k } => (k.powf(r) / (r * (k - 1.0) + 1.0)).powf(1.0 / r),
            Distortion::Exp => {
                let c = std::f64::consts::E - 1.0;
                ((r.exp_m1() / r) / c.powf(r)).powf(1.0 / r)
            }
        }
    }

    /// Affine pieces `(slope, intercept)` of a convex PWL `h`, so that
    /// `h = max_k` of them on `[0, 1]`.
    pub fn pieces(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Distortion::Pwl { breakpoints: bp } if self.is_convex() => Some(
                bp.windows(2)
                    .zip(slopes(bp))
                    .map(|(w, s)| (s, w[0].1 - s * w[0].0))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Secant interpolation on `k` uniform cells; exact for PWL `h`.
    pub fn secant_pwl(&self, k: usize) -> Distortion {
        if self.is_pwl() {
            return self.clone();
        }
        let k = k.max(1);
        let bp = (0..=k)
            .map(|j| {
                let x = j as f64 / k as f64;
                (x, if j == k { 1.0 } else { self.eval(x) })
            })
            .collect();
        Distortion::Pwl { breakpoints: bp }
    }

    /// Convex PWL pieces usable by the exponential oracle: exact for PWL `h`,
    /// the `k`-cell secant otherwise.
    pub fn oracle_pieces(&self, k: usize) -> Vec<(f64, f64)> {
        self.secant_pwl(k).pieces().expect("convex distortion")
    }
}

fn slopes(bp: &[(f64, f64)]) -> Vec<f64> {
    bp.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
}

impl fmt::Display for Distortion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distortion::Square => write!(f, "square"),
            Distortion::Exp => write!(f, "exp"),
            Distortion::Power { k } => write!(f, "power:{k}"),
            Distortion::Pwl { breakpoints } => {
                write!(f, "pwl")?;
                for (x, y) in breakpoints {
                    write!(f, ":{x},{y}")?;
                }
                Ok(())
            }
        }
    }
}

/// `square`, `exp`, `identity`, `power:k`, `cvar:theta,kappa` or
/// `pwl:x1,y1:x2,y2:...`.
impl FromStr for Distortion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (head, rest) = s.split_once(':').unwrap_or((s.as_str(), ""));
        let nums = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("bad number '{v}' in distortion"))))
                .collect()
        };
        let h = match head {
            "square" | "x2" => Distortion::Square,
            "exp" => Distortion::Exp,
            "identity" | "id" => Distortion::identity(),
            "power" => Distortion::Power { k: nums(rest)?[0] },
            "cvar" => {
                let v = nums(rest)?;
                if v.len() != 2 {
                    return invalid("cvar distortion needs theta,kappa");
                }
                Distortion::cvar_mix(v[0], v[1])?
            }
            "pwl" => {
                let mut bp = Vec::new();
                for pair in rest.split(':') {
                    let v = nums(pair)?;
                    if v.len() != 2 {
                        return invalid("pwl breakpoints are x,y pairs separated by ':'");
                    }
                    bp.push((v[0], v[1]));
                }
                Distortion::pwl(bp)?
            }
            _ => {
                return invalid(format!(
                    "unknown distortion '{s}'; expected square, exp, identity, power:k, cvar:theta,kappa or pwl:..."
                ))
            }
        };
        h.validate()?;
        Ok(h)
    }
}

/// Indices sorted ascending by `(r_i, i)`.
pub fn sorted_order(r: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b)));
    idx
}

/// `sum_{k<N} h(P_k) (r_(k) - r_(k+1)) + r_(N)` with `r` sorted ascending and
/// `P_k` the cumulative weight of the `k` smallest losses.
pub fn distortion_value(h: &Distortion, r: &[f64], p: &[f64]) -> f64 {
    assert_eq!(r.len(), p.len(), "losses and weights must have equal length");
    let n = r.len();
    if n == 0 {
        return 0.0;
    }
    let order = sorted_order(r);
    let mut cum = 0.0;
    let mut total = r[order[n - 1]];
    for k in 0..n - 1 {
        cum += p[order[k]];
        total += h.eval(cum) * (r[order[k]] - r[order[k + 1]]);
    }
    total
}

/// `pbar_(i) = h(P_i) - h(P_{i-1})` in the order given by `r`, returned in
/// the original indexing.
pub fn distortion_weights(h: &Distortion, p: &[f64], r: &[f64]) -> Vec<f64> {
    assert_eq!(r.len(), p.len(), "losses and weights must have equal length");
    let order = sorted_order(r);
    let mut out = vec![0.0; p.len()];
    let mut cum = 0.0;
    let mut prev = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cum += p[i];
        let hk = if k + 1 == p.len() { 1.0 } else { h.eval(cum) };
        out[i] = hk - prev;
        prev = hk;
    }
    out
}

/// The set `{pbar : pbar in simplex, h(sum_J p) <= sum_J pbar for all J}`.
#[derive(Debug, Clone)]
pub struct RiskEnvelope<'a> {
    pub h: &'a Distortion,
    pub p: &'a [f64],
}

impl RiskEnvelope<'_> {
    pub fn contains(&self, pbar: &[f64], tol: f64) -> Result<bool> {
        envelope_membership(pbar, self.p, self.h, tol)
    }
}

/// Exhaustive check over every proper subset; `N <= 20`.
pub fn envelope_membership(pbar: &[f64], p: &[f64], h: &Distortion, tol: f64) -> Result<bool> {
    let n = p.len();
    if pbar.len() != n {
        return Err(Error::Dimension("pbar and p must have equal length".into()));
    }
    if n > MAX_ENVELOPE_N {
        return Err(Error::Unsupported(format!(
            "exhaustive envelope check is limited to N <= {MAX_ENVELOPE_N}, got {n}"
        )));
    }
    if pbar.iter().any(|&v| v < -tol) || (pbar.iter().sum::<f64>() - 1.0).abs() > tol {
        return Ok(false);
    }
    for mask in 1u32..(1u32 << n) - 1 {
        let (mut sp, mut sb) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                sp += p[i];
                sb += pbar[i];
            }
        }
        if h.eval(sp) > sb + tol {
            return Ok(false);
        }
    }
    Ok(true)
}
