//! Vertex enumeration of `{u >= 0 : A u <= b}` by trying every basis.

use nalgebra::{DMatrix, DVector};

/// All vertices of `{u >= 0 : A u <= b}`, deduplicated.
pub fn enumerate(a: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    let n = a.first().map_or(0, |r| r.len());
    let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e, 0.0));
    }
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<Vec<f64>> = Vec::new();
    for_each_subset(rows.len(), n, |idx| {
        let m = DMatrix::from_fn(n, n, |r, c| rows[idx[r]].0[c]);
        let rhs = DVector::from_fn(n, |r, _| rows[idx[r]].1);
        let lu = m.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        let Some(x) = lu.solve(&rhs) else { return };
        let feasible = rows.iter().all(|(r, bi)| {
            let act: f64 = r.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            act <= bi + 1e-9 * scale
        });
        if feasible {
            let v: Vec<f64> = x.iter().copied().collect();
            if !out
                .iter()
                .any(|w| w.iter().zip(&v).all(|(p, q)| (p - q).abs() < 1e-9 * scale))
            {
                out.push(v);
            }
        }
    });
    out
}

pub fn max_linear(vertices: &[Vec<f64>], v: &[f64]) -> f64 {
    vertices
        .iter()
        .map(|u| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square() {
        let v = enumerate(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]);
        assert_eq!(v.len(), 4);
        assert_eq!(max_linear(&v, &[1.0, 2.0]), 3.0);
    }

    #[test]
    fn simplex_with_equality_pair() {
        let v = enumerate(
            &[vec![1.0, 1.0, 1.0], vec![-1.0, -1.0, -1.0]],
            &[1.0, -1.0],
        );
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn subsets_count() {
        let mut c = 0;
        for_each_subset(6, 3, |_| c += 1);
        assert_eq!(c, 20);
    }
}
