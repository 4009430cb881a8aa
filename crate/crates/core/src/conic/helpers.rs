use super::{ConicProgram, LinExpr};
use crate::norms::Norm;
use crate::{Error, Result};

/// `s >= a^2 / b` with `s, b >= 0`, as `||(2a, s - b)|| <= s + b`.
pub fn quad_over_linear(prog: &mut ConicProgram, a: LinExpr, b: LinExpr, s: LinExpr, group: &str) {
    prog.add_soc(vec![a * 2.0, s.clone() - b.clone()], s + b, group);
}

/// `e >= ||x||` for the given norm.
pub fn norm_epigraph(prog: &mut ConicProgram, x: &[LinExpr], norm: Norm, e: LinExpr, group: &str) {
    match norm {
        Norm::L2 => prog.add_soc(x.to_vec(), e, group),
        Norm::L1 => {
            let mut total = LinExpr::zero();
            for xi in x {
                let u = prog.nonneg_var(format!("{group}_abs[{}]", prog.n_vars()));
                prog.add_ge(LinExpr::var(u), xi.clone(), group);
                prog.add_ge(LinExpr::var(u), -xi.clone(), group);
                total += LinExpr::var(u);
            }
            prog.add_ge(e, total, group);
        }
        Norm::Linf => {
            for xi in x {
                prog.add_ge(e.clone(), xi.clone(), group);
                prog.add_ge(e.clone(), -xi.clone(), group);
            }
        }
    }
}

/// Epigraph of the dual-norm term for an outcome cost of order `q`.
///
/// `q = 1`: `epigraph >= ||alpha||_*`.
/// `q = 2`: `epigraph >= ||alpha||_*^2 / denominator`, the perspective term.
pub fn dual_norm_power(
    prog: &mut ConicProgram,
    alpha: &[LinExpr],
    base: Norm,
    q: f64,
    epigraph: LinExpr,
    denominator: Option<LinExpr>,
    group: &str,
) -> Result<()> {
    let dual = base.dual();
    if q == 1.0 {
        norm_epigraph(prog, alpha, dual, epigraph, group);
        return Ok(());
    }
    if q != 2.0 {
        return Err(Error::Unsupported(format!(
            "cost order q = {q}; only q = 1 and q = 2 have conic forms"
        )));
    }
    let den = denominator
        .ok_or_else(|| Error::Invalid("q = 2 perspective needs a denominator".into()))?;
    if dual == Norm::L2 {
        let mut t: Vec<LinExpr> = alpha.iter().map(|a| a.clone() * 2.0).collect();
        t.push(epigraph.clone() - den.clone());
        prog.add_soc(t, epigraph + den, group);
    } else {
        let w = prog.nonneg_var(format!("{group}_dualnorm"));
        norm_epigraph(prog, alpha, dual, LinExpr::var(w), group);
        quad_over_linear(prog, LinExpr::var(w), den, epigraph, group);
    }
    Ok(())
}
