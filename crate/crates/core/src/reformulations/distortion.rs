use super::{Builder, Compiled, Instance, ValueMap};
use crate::ambiguity::{inline_support_bounds, SparsePoly};
use crate::conic::LinExpr;
use crate::distortion::Distortion;
use crate::loss::LossSpec;
use crate::{Error, Result};

/// Largest sample count for the subset-enumerating oracle.
pub const MAX_EXPONENTIAL_N: usize = 12;

/// Secant cells used for smooth `h` when no count is given.
pub const DEFAULT_SECANT_CELLS: usize = 64;

/// Exact q = 1 distortion program over `V+^h`, enumerating all `2^N - 2`
/// proper subsets `J` with `h(sum_J p) <= sum_J pbar`.
///
/// Smooth `h` enters through its `cells`-piece secant interpolation (an
/// inner approximation of the envelope); the penalty constant uses the exact
/// `sup h'`.
pub fn compile_distortion_q1_exponential(
    h: &Distortion,
    loss: &LossSpec,
    inst: Instance<'_>,
    cells: usize,
) -> Result<Compiled> {
    let n = inst.n();
    if n > MAX_EXPONENTIAL_N {
        return Err(Error::Unsupported(format!(
            "the exponential distortion program is limited to N <= {MAX_EXPONENTIAL_N} (got {n}); use the cutting-plane solver"
        )));
    }
    h.validate()?;
    if !h.is_convex() {
        return Err(Error::Invalid("distortion must be convex".into()));
    }
    let pieces = loss.pieces()?;
    let lip = loss.lipschitz()?;
    let hp: Vec<(f64, f64)> = h
        .oracle_pieces(cells)
        .into_iter()
        .filter(|&(s, c)| !(s == 0.0 && c <= 0.0))
        .collect();

    let base = SparsePoly::from(&inst.set.poly);
    let n_base = base.n_cols;
    let pbar0 = n_base;
    let n_sub = (1usize << n) - 2;
    let sj = |k: usize| pbar0 + n + 2 * k;
    let tj = |k: usize| pbar0 + n + 2 * k + 1;
    let mut poly = SparsePoly::new(n_base + n + 2 * n_sub);
    poly.rows = base.rows;
    poly.push_eq((0..n).map(|i| (pbar0 + i, 1.0)).collect(), 1.0);
    for (k, mask) in (1..(1u32 << n) - 1).enumerate() {
        let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let mut row_s: Vec<(usize, f64)> = members.iter().map(|&i| (i, 1.0)).collect();
        row_s.push((sj(k), -1.0));
        poly.push_eq(row_s, 0.0);
        let mut row_t: Vec<(usize, f64)> = members.iter().map(|&i| (pbar0 + i, 1.0)).collect();
        row_t.push((tj(k), -1.0));
        poly.push_eq(row_t, 0.0);
        for &(s, c) in &hp {
            poly.push_le(vec![(sj(k), s), (tj(k), -1.0)], -c);
        }
    }

    let mut b = Builder::new(inst);
    let w = b.prog.nonneg_var("w");
    b.dual_norm_bound(LinExpr::var(w), lip * h.sup_deriv());
    let mut lower: Vec<Vec<LinExpr>> = vec![Vec::new(); poly.n_cols];
    lower[n] = vec![LinExpr::var(w)];
    for (i, x) in b.x.iter().enumerate() {
        lower[pbar0 + i] = pieces.iter().map(|&(a, k)| x.clone() * a + k).collect();
    }
    let obj = inline_support_bounds(&mut b.prog, &poly, &lower, "z");
    Ok(b.finish(obj, ValueMap::Identity, "distortion_q1_exponential"))
}
