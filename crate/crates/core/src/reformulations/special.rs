use super::{require_q, Builder, Compiled, Instance, ValueMap};
use crate::conic::{quad_over_linear, LinExpr};
use crate::error::invalid;
use crate::loss::InnerLoss;
use crate::norms::Norm;
use crate::{Error, Result};

fn require_squared_l2(inst: &Instance<'_>, q: f64, what: &str) -> Result<()> {
    require_q(q, &[2.0], what)?;
    if inst.y_norm != Norm::L2 {
        return Err(Error::Unsupported(format!("{what} needs the squared L2 outcome cost")));
    }
    Ok(())
}

/// Worst-case `Var - theta E` as an SOCP:
/// `min b'z - theta^2/4 - t theta` with
/// `s_i >= (y_i'alpha - theta/2 - t)^2 / (1 - eta)`, `s_{N+1} >= ||alpha||^2 / eta`.
pub fn mean_variance_socp(theta: f64, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return invalid("mean-variance needs theta >= 0");
    }
    require_squared_l2(&inst, q, "mean-variance")?;
    let mut b = Builder::new(inst);
    let t = b.prog.free_var("t");
    let eta = b.prog.add_var("eta", Some(0.0), Some(1.0));
    let xs = b.x.clone();
    let sample = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let s = b.prog.nonneg_var(format!("s[{i}]"));
            quad_over_linear(
                &mut b.prog,
                x.clone() - theta / 2.0 - LinExpr::var(t),
                LinExpr::constant(1.0) - LinExpr::var(eta),
                LinExpr::var(s),
                "variance",
            );
            vec![LinExpr::var(s)]
        })
        .collect();
    let sd = b.prog.nonneg_var("s_delta");
    b.perspective_bound(LinExpr::var(sd), 1.0, LinExpr::var(eta))?;
    let obj = b.support(sample, vec![LinExpr::var(sd)]) - theta * theta / 4.0 - LinExpr::term(t, theta);
    Ok(b.finish(obj, ValueMap::Identity, "mean_variance_socp"))
}

/// `C_{theta,kappa} = ((1 + theta)^2 + (1 - kappa)/kappa) / 4`.
pub fn mean_cvar_constant(theta: f64, kappa: f64) -> f64 {
    ((1.0 + theta).powi(2) + (1.0 - kappa) / kappa) / 4.0
}

/// Worst-case `CVaR - theta E` as an SOCP:
/// `min b'z + s` with `[A'z] >= (l(y_i'alpha, t), v_{N+1}, 0)` and
/// `s >= C_{theta,kappa} ||alpha||^2 / v_{N+1}`.
pub fn mean_cvar_socp(theta: f64, kappa: f64, inst: Instance<'_>, q: f64) -> Result<Compiled> {
    let inner = InnerLoss::Cvar { theta, kappa };
    inner.validate()?;
    require_squared_l2(&inst, q, "mean-CVaR")?;
    let pieces = inner.pwl_pieces().expect("cvar inner loss is piecewise linear");
    let mut b = Builder::new(inst);
    let t = b.prog.free_var("t");
    let v = b.prog.nonneg_var("v_delta");
    let s = b.prog.nonneg_var("s");
    b.perspective_bound(LinExpr::var(s), mean_cvar_constant(theta, kappa), LinExpr::var(v))?;
    let sample = b
        .x
        .iter()
        .map(|x| {
            pieces
                .iter()
                .map(|&(a, c, k)| x.clone() * a + LinExpr::term(t, c) + k)
                .collect()
        })
        .collect();
    let obj = b.support(sample, vec![LinExpr::var(v)]) + LinExpr::var(s);
    Ok(b.finish(obj, ValueMap::Identity, "mean_cvar_socp"))
}
