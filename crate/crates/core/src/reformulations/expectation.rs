use super::{c_q, require_q, Builder, Compiled, Instance, ValueMap};
use crate::conic::{quad_over_linear, LinExpr};
use crate::loss::{LossKind, LossSpec};
use crate::{Error, Result};

/// Picks the expectation reformulation matching the loss and cost order.
pub fn compile_expectation(loss: &LossSpec, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    if q == 1.0 {
        return compile_expectation_q1(loss, inst);
    }
    require_q(q, &[1.0, 2.0], "the conditional expectation")?;
    if special_form(loss).is_some() {
        return compile_expectation_special_q(loss, inst, q);
    }
    compile_expectation_general_q2(loss, inst)
}

/// `min sigma*(v)` with `v_i >= l(y_i'alpha)` and `v_{N+1} >= Lip(l) ||alpha||_*`.
pub fn compile_expectation_q1(loss: &LossSpec, inst: Instance<'_>) -> Result<Compiled> {
    let pieces = loss.pieces()?;
    let lip = loss.lipschitz()?;
    let mut b = Builder::new(inst);
    let w = b.prog.nonneg_var("w");
    b.dual_norm_bound(LinExpr::var(w), lip);
    let sample = b
        .x
        .iter()
        .map(|x| pieces.iter().map(|&(a, c)| x.clone() * a + c).collect())
        .collect();
    let obj = b.support(sample, vec![LinExpr::var(w)]);
    Ok(b.finish(obj, ValueMap::Identity, "expectation_q1"))
}

enum Special {
    /// `C (+-x + b)` or `C (|x - b1| + b2)`: value `sum p l + C delta^{1/q} ||alpha||_*`.
    Lipschitz(f64),
    /// `(C l_i)^q` for the four nonnegative forms.
    Powered(f64),
}

fn special_form(loss: &LossSpec) -> Option<Special> {
    match (&loss.kind, loss.power) {
        (LossKind::Affine { a, .. }, None) => Some(Special::Lipschitz(loss.scale * a.abs())),
        (LossKind::Abs { .. }, None) => Some(Special::Lipschitz(loss.scale)),
        (LossKind::HingePlus { .. } | LossKind::HingeMinus { .. } | LossKind::AbsHinge { .. }, Some(_)) => {
            Some(Special::Powered(loss.scale))
        }
        (LossKind::Abs { b2, .. }, Some(_)) if *b2 > 0.0 => Some(Special::Powered(loss.scale)),
        _ => None,
    }
}

/// Order-q reformulation for affine/abs losses and the power-wrapped
/// catalog `(C l_i)^q`.
pub fn compile_expectation_special_q(loss: &LossSpec, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    if q == 1.0 {
        return compile_expectation_q1(loss, inst);
    }
    require_q(q, &[2.0], "the order-q expectation catalog")?;
    let form = special_form(loss).ok_or_else(|| {
        Error::Unsupported(format!(
            "{} loss is outside the order-q catalog (affine, abs, or a power-wrapped hinge/abs form)",
            loss.kind_name()
        ))
    })?;
    match form {
        Special::Lipschitz(c) => {
            let pieces = loss.pieces()?;
            let mut b = Builder::new(inst);
            let v = b.prog.nonneg_var("v_delta");
            let s = b.prog.nonneg_var("s");
            b.perspective_bound(LinExpr::var(s), c_q(c, q), LinExpr::var(v))?;
            let sample = b
                .x
                .iter()
                .map(|x| pieces.iter().map(|&(a, k)| x.clone() * a + k).collect())
                .collect();
            let obj = b.support(sample, vec![LinExpr::var(v)]) + LinExpr::var(s);
            Ok(b.finish(obj, ValueMap::Identity, "expectation_special_q_lipschitz"))
        }
        Special::Powered(c) => {
            if loss.power != Some(q) {
                return Err(Error::Unsupported(format!(
                    "power-wrapped loss needs exponent equal to the cost order {q}"
                )));
            }
            let pieces = loss.base_pieces().expect("catalog forms are piecewise linear");
            let mut b = Builder::new(inst);
            let y = b.prog.nonneg_var("y");
            let v = b.prog.nonneg_var("v_delta");
            let s = b.prog.nonneg_var("s");
            b.perspective_bound(LinExpr::var(s), c_q(c, q), LinExpr::var(v))?;
            let sample = powered_rows(&mut b, &pieces, y, |x| x.clone());
            let obj = b.support(sample, vec![LinExpr::var(v)]) + LinExpr::term(y, c_q(1.0, q)) + LinExpr::var(s);
            Ok(b.finish(obj, ValueMap::Power(q), "expectation_special_q_powered"))
        }
    }
}

/// Per-sample `v_i >= a_i^2 / y` with `a_i >= 0` above every piece of the
/// inner form evaluated at `arg(x_i)`.
pub(crate) fn powered_rows(
    b: &mut Builder<'_>,
    pieces: &[(f64, f64)],
    y: usize,
    arg: impl Fn(&LinExpr) -> LinExpr,
) -> Vec<Vec<LinExpr>> {
    let xs = b.x.clone();
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let a = b.prog.nonneg_var(format!("a[{i}]"));
            let vi = b.prog.free_var(format!("v[{i}]"));
            let u = arg(x);
            for &(sl, k) in pieces {
                b.prog.add_ge(LinExpr::var(a), u.clone() * sl + k, "loss");
            }
            quad_over_linear(&mut b.prog, LinExpr::var(a), LinExpr::var(y), LinExpr::var(vi), "loss");
            vec![LinExpr::var(vi)]
        })
        .collect()
}

/// Order-2 program with the `eta` smoothing of the loss:
/// `v_i >= sup_z {z x_i - l*(z) + eta z^2/4}`, `v_{N+1} >= ||alpha||_*^2 / eta`.
pub fn compile_expectation_general_q2(loss: &LossSpec, inst: Instance<'_>) -> Result<Compiled> {
    let mut b = Builder::new(inst);
    let eta_ub = loss.eta_bound_q2();
    let eta = b.prog.add_var("eta", Some(0.0), eta_ub);
    let sample = smoothed_rows(&mut b, loss, eta, |x| x.clone())?;
    let w = b.prog.nonneg_var("w");
    b.perspective_bound(LinExpr::var(w), 1.0, LinExpr::var(eta))?;
    let obj = b.support(sample, vec![LinExpr::var(w)]);
    Ok(b.finish(obj, ValueMap::Identity, "expectation_general_q2"))
}

/// Lower bounds for `v_i >= sup_z {z u_i - l*(z) + eta z^2/4}` with
/// `u_i = arg(x_i)`.
pub(crate) fn smoothed_rows(
    b: &mut Builder<'_>,
    loss: &LossSpec,
    eta: usize,
    arg: impl Fn(&LinExpr) -> LinExpr,
) -> Result<Vec<Vec<LinExpr>>> {
    let xs = b.x.clone();
    if let Ok(pieces) = loss.pieces() {
        return Ok(xs
            .iter()
            .map(|x| {
                let u = arg(x);
                pieces
                    .iter()
                    .map(|&(a, k)| u.clone() * a + k + LinExpr::term(eta, a * a / 4.0))
                    .collect()
            })
            .collect());
    }
    let quads = loss.quadratic_pieces().ok_or_else(|| {
        Error::Unsupported(format!(
            "{} loss has no closed-form order-2 smoothing; use a piecewise linear, piecewise quadratic or |x|^2/2 loss",
            loss.kind_name()
        ))
    })?;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let u = arg(x);
            quads
                .iter()
                .enumerate()
                .map(|(j, &(a, bq, c))| {
                    // a (u + b/2a)^2 / (1 - a eta) = (u + b/2a)^2 / (1/a - eta).
                    let w = b.prog.nonneg_var(format!("quad[{i},{j}]"));
                    quad_over_linear(
                        &mut b.prog,
                        u.clone() + bq / (2.0 * a),
                        LinExpr::constant(1.0 / a) - LinExpr::var(eta),
                        LinExpr::var(w),
                        "loss",
                    );
                    LinExpr::var(w) + (c - bq * bq / (4.0 * a))
                })
                .collect()
        })
        .collect())
}
