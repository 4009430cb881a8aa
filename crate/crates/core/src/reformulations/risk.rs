use super::expectation::{powered_rows, smoothed_rows};
use super::special::mean_variance_socp;
use super::{c_q, require_q, Builder, Compiled, Instance, ValueMap};
use crate::error::invalid;
use crate::loss::{InnerLoss, LossKind, LossSpec};
use crate::conic::LinExpr;
use crate::{Error, Result};

fn pwl_rows(b: &Builder<'_>, pieces: &[(f64, f64, f64)], t: usize) -> Vec<Vec<LinExpr>> {
    b.x.iter()
        .map(|x| {
            pieces
                .iter()
                .map(|&(a, c, k)| x.clone() * a + LinExpr::term(t, c) + k)
                .collect()
        })
        .collect()
}

/// `l(z, t) = (C lbar(z - t))^2` with `lbar` an abs-hinge or shifted abs.
fn powered_inner(inner: &InnerLoss) -> Option<&LossSpec> {
    match inner {
        InnerLoss::Shifted { loss } => match (&loss.kind, loss.power) {
            (LossKind::AbsHinge { .. }, Some(_)) => Some(loss),
            (LossKind::Abs { b2, .. }, Some(_)) if *b2 > 0.0 => Some(loss),
            _ => None,
        },
        _ => None,
    }
}

/// `inf_t E[l(Z, t)]` over the union ball.
pub fn compile_min_expectation(inner: &InnerLoss, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    inner.validate()?;
    require_q(q, &[1.0, 2.0], "min-expectation risk")?;
    if let InnerLoss::MeanVariance { theta } = inner {
        return mean_variance_socp(*theta, inst, q);
    }
    if q == 1.0 {
        let pieces = inner.pwl_pieces().ok_or_else(|| {
            Error::Unsupported("min-expectation at q = 1 needs an inner loss piecewise linear in (z, t)".into())
        })?;
        let lip = inner.lipschitz_z()?;
        let mut b = Builder::new(inst);
        let t = b.prog.free_var("t");
        let w = b.prog.nonneg_var("w");
        b.dual_norm_bound(LinExpr::var(w), lip);
        let sample = pwl_rows(&b, &pieces, t);
        let obj = b.support(sample, vec![LinExpr::var(w)]);
        return Ok(b.finish(obj, ValueMap::Identity, "min_expectation_q1"));
    }
    if let Some(loss) = powered_inner(inner) {
        if loss.power != Some(q) {
            return invalid("power-wrapped inner loss needs exponent equal to the cost order");
        }
        let pieces = loss.base_pieces().expect("catalog forms are piecewise linear");
        let mut b = Builder::new(inst);
        let t = b.prog.free_var("t");
        let y = b.prog.nonneg_var("y");
        let v = b.prog.nonneg_var("v_delta");
        let s = b.prog.nonneg_var("s");
        b.perspective_bound(LinExpr::var(s), c_q(loss.scale, q), LinExpr::var(v))?;
        let sample = powered_rows(&mut b, &pieces, y, |x| x.clone() - LinExpr::var(t));
        let obj = b.support(sample, vec![LinExpr::var(v)]) + LinExpr::term(y, c_q(1.0, q)) + LinExpr::var(s);
        return Ok(b.finish(obj, ValueMap::Power(q), "min_expectation_special_q"));
    }
    let pieces = inner.pwl_pieces().ok_or_else(|| {
        Error::Unsupported("min-expectation at q = 2 needs a piecewise linear or catalog inner loss".into())
    })?;
    let mut b = Builder::new(inst);
    let t = b.prog.free_var("t");
    let eta = b.prog.nonneg_var("eta");
    let sample = b
        .x
        .iter()
        .map(|x| {
            pieces
                .iter()
                .map(|&(a, c, k)| x.clone() * a + LinExpr::term(t, c) + k + LinExpr::term(eta, a * a / 4.0))
                .collect()
        })
        .collect();
    let w = b.prog.nonneg_var("w");
    b.perspective_bound(LinExpr::var(w), 1.0, LinExpr::var(eta))?;
    let obj = b.support(sample, vec![LinExpr::var(w)]);
    Ok(b.finish(obj, ValueMap::Identity, "min_expectation_general_q2"))
}

/// `C` and the pieces of `lbar` for the order-2 q-norm catalog.
fn qnorm_catalog(inner: &InnerLoss) -> Result<(f64, Vec<(f64, f64, f64)>)> {
    let (c, ok) = match inner {
        InnerLoss::Shifted { loss } => {
            let ok = loss.power.is_none()
                && match &loss.kind {
                    LossKind::HingePlus { .. } | LossKind::AbsHinge { .. } => true,
                    LossKind::Abs { b2, .. } => *b2 > 0.0,
                    _ => false,
                };
            (loss.scale, ok)
        }
        InnerLoss::AbsExcess { scale } => (*scale, true),
        _ => (0.0, false),
    };
    if !ok {
        return Err(Error::Unsupported(
            "q-norm risk at q = 2 needs C * lbar(z - t) with lbar a hinge, abs-hinge or abs form, or C (|z| - t)_+".into(),
        ));
    }
    if !(c > 1.0) {
        return invalid(format!("q-norm catalog needs C > 1, got {c}"));
    }
    Ok((c, inner.pwl_pieces().expect("catalog forms are piecewise linear")))
}

/// `inf_t t + (E[l(Z, t)^q])^{1/q}` over the union ball.
pub fn compile_qnorm(inner: &InnerLoss, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    inner.validate()?;
    require_q(q, &[1.0, 2.0], "q-norm risk")?;
    if q == 1.0 {
        let pieces = inner
            .pwl_pieces()
            .ok_or_else(|| Error::Unsupported("q-norm risk at q = 1 needs a piecewise linear inner loss".into()))?;
        let lip = inner.lipschitz_z()?;
        let mut b = Builder::new(inst);
        let t = b.prog.free_var("t");
        let w = b.prog.nonneg_var("w");
        b.dual_norm_bound(LinExpr::var(w), lip);
        let sample = pwl_rows(&b, &pieces, t);
        let obj = LinExpr::var(t) + b.support(sample, vec![LinExpr::var(w)]);
        return Ok(b.finish(obj, ValueMap::Identity, "qnorm_q1"));
    }
    let (c, pieces) = qnorm_catalog(inner)?;
    let mut b = Builder::new(inst);
    let t = b.prog.free_var("t");
    let y = b.prog.nonneg_var("y");
    let v = b.prog.nonneg_var("v_delta");
    let s = b.prog.nonneg_var("s");
    b.perspective_bound(LinExpr::var(s), c_q(c, q), LinExpr::var(v))?;
    let xs = b.x.clone();
    let sample = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let a = b.prog.nonneg_var(format!("a[{i}]"));
            let vi = b.prog.free_var(format!("v[{i}]"));
            for &(sl, ct, k) in &pieces {
                b.prog.add_ge(LinExpr::var(a), x.clone() * sl + LinExpr::term(t, ct) + k, "loss");
            }
            crate::conic::quad_over_linear(&mut b.prog, LinExpr::var(a), LinExpr::var(y), LinExpr::var(vi), "loss");
            vec![LinExpr::var(vi)]
        })
        .collect();
    let obj = LinExpr::var(t)
        + b.support(sample, vec![LinExpr::var(v)])
        + LinExpr::term(y, c_q(1.0, q))
        + LinExpr::var(s);
    Ok(b.finish(obj, ValueMap::Identity, "qnorm_special_q"))
}

/// Checks that `u` is convex increasing piecewise linear and `level` lies
/// strictly above its infimum. Returns the pieces.
fn shortfall_pieces(u: &LossSpec, level: f64) -> Result<Vec<(f64, f64)>> {
    let pieces = u.pieces()?;
    if pieces.iter().any(|p| p.0 < 0.0) || pieces.iter().all(|p| p.0 == 0.0) {
        return invalid("shortfall utility must be increasing (all slopes >= 0, one > 0)");
    }
    let floor = pieces
        .iter()
        .filter(|p| p.0 == 0.0)
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(level > floor) {
        return invalid(format!("shortfall level {level} is not inside the range of u (infimum {floor})"));
    }
    Ok(pieces)
}

/// `inf { kappa : sup E[u(-Z - kappa)] <= level }` over the union ball.
pub fn compile_shortfall(u: &LossSpec, level: f64, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    require_q(q, &[1.0, 2.0], "shortfall risk")?;
    let pieces = shortfall_pieces(u, level)?;
    if q == 2.0 && pieces.len() == 1 {
        return compile_shortfall_linear(u, level, inst, q);
    }
    let mut b = Builder::new(inst);
    let kappa = b.prog.free_var("kappa");
    let w = b.prog.nonneg_var("w");
    let arg = |x: &LinExpr| -x.clone() - LinExpr::var(kappa);
    let (sample, method) = if q == 1.0 {
        b.dual_norm_bound(LinExpr::var(w), u.lipschitz()?);
        let rows = b
            .x
            .iter()
            .map(|x| pieces.iter().map(|&(a, k)| arg(x) * a + k).collect())
            .collect();
        (rows, "shortfall_q1")
    } else {
        let eta = b.prog.nonneg_var("eta");
        let rows = smoothed_rows(&mut b, u, eta, arg)?;
        b.perspective_bound(LinExpr::var(w), 1.0, LinExpr::var(eta))?;
        (rows, "shortfall_general_q2")
    };
    let sigma = b.support(sample, vec![LinExpr::var(w)]);
    b.prog.add_le(sigma - level, "shortfall_level");
    Ok(b.finish(LinExpr::var(kappa), ValueMap::Identity, method))
}

/// The order-q path restricted to linear `u(x) = C x + b`.
pub fn compile_shortfall_linear(u: &LossSpec, level: f64, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    let pieces = shortfall_pieces(u, level)?;
    if pieces.len() != 1 {
        return Err(Error::Unsupported(
            "the order-q shortfall path applies only to a linear utility u(x) = C x + b".into(),
        ));
    }
    if q == 1.0 {
        return compile_shortfall(u, level, inst, q);
    }
    require_q(q, &[2.0], "shortfall risk")?;
    let (c, k) = pieces[0];
    let mut b = Builder::new(inst);
    let kappa = b.prog.free_var("kappa");
    let v = b.prog.nonneg_var("v_delta");
    let s = b.prog.nonneg_var("s");
    b.perspective_bound(LinExpr::var(s), c_q(c, q), LinExpr::var(v))?;
    let sample = b
        .x
        .iter()
        .map(|x| vec![(-x.clone() - LinExpr::var(kappa)) * c + k])
        .collect();
    let sigma = b.support(sample, vec![LinExpr::var(v)]);
    b.prog.add_le(sigma + LinExpr::var(s) - level, "shortfall_level");
    Ok(b.finish(LinExpr::var(kappa), ValueMap::Identity, "shortfall_linear_q2"))
}
