//! Dense two-phase tableau simplex with Bland's rule.

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpResult {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpResult::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

const EPS: f64 = 1e-11;

/// maximize `c'x` s.t. `a_le x <= b_le`, `a_eq x = b_eq`, `x >= 0`.
pub fn maximize(
    c: &[f64],
    a_le: &[Vec<f64>],
    b_le: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
) -> LpResult {
    let n = c.len();
    let m_le = a_le.len();
    let m = m_le + a_eq.len();
    // Columns: x (n), slacks (m_le), artificials (m), rhs.
    let n_slack = m_le;
    let art0 = n + n_slack;
    let width = art0 + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    let mut basis = vec![0usize; m];
    for i in 0..m {
        let (row, rhs, slack) = if i < m_le {
            (&a_le[i], b_le[i], Some(n + i))
        } else {
            (&a_eq[i - m_le], b_eq[i - m_le], None)
        };
        let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * row[j];
        }
        if let Some(s) = slack {
            t[i][s] = sign;
        }
        t[i][art0 + i] = 1.0;
        t[i][width - 1] = sign * rhs;
        basis[i] = art0 + i;
    }

    // Phase 1: minimize the sum of artificials.
    let mut obj = vec![0.0; width];
    for j in art0..art0 + m {
        obj[j] = -1.0;
    }
    price_out(&mut obj, &t, &basis);
    if !run(&mut t, &mut basis, &mut obj, art0 + m) {
        return LpResult::Unbounded;
    }
    if obj[width - 1].abs() > 1e-9 * (1.0 + max_abs_rhs(&t)) {
        return LpResult::Infeasible;
    }
    // Drive any remaining artificials out of the basis.
    for i in 0..m {
        if basis[i] >= art0 {
            if let Some(j) = (0..art0).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut obj, i, j);
                basis[i] = j;
            }
        }
    }

    // Phase 2.
    let mut obj = vec![0.0; width];
    obj[..n].copy_from_slice(c);
    price_out(&mut obj, &t, &basis);
    // Forbid artificials from re-entering.
    if !run(&mut t, &mut basis, &mut obj, art0) {
        return LpResult::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][width - 1];
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    LpResult::Optimal { x, value }
}

/// minimize `c'x` under the same constraint form.
pub fn minimize(
    c: &[f64],
    a_le: &[Vec<f64>],
    b_le: &[f64],
    a_eq: &[Vec<f64>],
    b_eq: &[f64],
) -> LpResult {
    let neg: Vec<f64> = c.iter().map(|v| -v).collect();
    match maximize(&neg, a_le, b_le, a_eq, b_eq) {
        LpResult::Optimal { x, value } => LpResult::Optimal { x, value: -value },
        other => other,
    }
}

fn max_abs_rhs(t: &[Vec<f64>]) -> f64 {
    t.iter().map(|r| r[r.len() - 1].abs()).fold(0.0, f64::max)
}

/// Objective row holds reduced costs `c_j - c_B B^-1 A_j` with the current
/// objective value (negated) in the last column.
fn price_out(obj: &mut [f64], t: &[Vec<f64>], basis: &[usize]) {
    for (i, &bv) in basis.iter().enumerate() {
        let cb = obj[bv];
        if cb != 0.0 {
            for j in 0..obj.len() {
                obj[j] -= cb * t[i][j];
            }
        }
    }
}

fn pivot(t: &mut [Vec<f64>], obj: &mut [f64], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let prow = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&prow) {
                    *v -= f * pv;
                }
            }
        }
    }
    let f = obj[c];
    if f != 0.0 {
        for (v, pv) in obj.iter_mut().zip(&prow) {
            *v -= f * pv;
        }
    }
}

/// Maximizes with entering columns restricted to `0..limit`. Returns false
/// when unbounded.
fn run(t: &mut [Vec<f64>], basis: &mut [usize], obj: &mut [f64], limit: usize) -> bool {
    let w = obj.len() - 1;
    loop {
        let Some(enter) = (0..limit).find(|&j| obj[j] > EPS) else {
            return true;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..t.len() {
            let a = t[i][enter];
            if a > EPS {
                let ratio = t[i][w] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-13 || (ratio <= lr + 1e-13 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return false;
        };
        pivot(t, obj, r, enter);
        basis[r] = enter;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let r = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
            &[],
            &[],
        );
        assert!((r.value().unwrap() - 36.0).abs() < 1e-10);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y s.t. x + y = 2, -x <= -0.5
        let r = minimize(&[1.0, 2.0], &[vec![-1.0, 0.0]], &[-0.5], &[vec![1.0, 1.0]], &[2.0]);
        assert!((r.value().unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        assert_eq!(
            maximize(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -2.0], &[], &[]),
            LpResult::Infeasible
        );
        assert_eq!(maximize(&[1.0], &[vec![-1.0]], &[0.0], &[], &[]), LpResult::Unbounded);
    }
}
