use serde::{Deserialize, Serialize};

use super::MassInterval;
use crate::geometry::Partition;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Radius {
    pub delta_min: f64,
    /// Feasibility needs `delta0 > delta_min` rather than `>=`.
    pub strict: bool,
    /// Minimizer of the radius LP, in relabeled order.
    pub v: Vec<f64>,
}

/// minimize `sum c_i v_i` over `v in [0,1]^N`, `lo <= sum v <= hi` by
/// filling cheapest coordinates first.
fn fill_cheapest(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[a].total_cmp(&c[b]).then(a.cmp(&b)));
    let mut v = vec![0.0; c.len()];
    let mut total = 0.0;
    for &i in &order {
        let cap = if c[i] < 0.0 { hi } else { lo };
        if total >= cap {
            break;
        }
        let take = (cap - total).min(1.0);
        v[i] = take;
        total += take;
    }
    v
}

/// Smallest radius for which the full model is feasible.
pub fn min_radius_full(part: &Partition, mass: &MassInterval) -> Result<Radius> {
    let d = part.distances()?;
    let n = d.len() as f64;
    let m = part.m;
    let c: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(i, &di)| if i < m { di } else { -di })
        .collect();
    let v = fill_cheapest(&c, n * mass.lo, n * mass.hi);
    let inside: f64 = d[m..].iter().sum();
    let obj: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + inside;
    let frac_inside = (d.len() - m) as f64 / n;
    Ok(Radius {
        delta_min: (obj / n).max(0.0),
        strict: frac_inside > mass.hi,
        v,
    })
}

/// Smallest radius for which the partial model (with `eps = omega_1`) is feasible.
pub fn min_radius_partial(part: &Partition, mass: &MassInterval) -> Result<Radius> {
    let d = part.distances()?;
    let n = d.len() as f64;
    let eps = mass.lo;
    let c: Vec<f64> = d
        .iter()
        .enumerate()
        .map(|(i, &di)| if i < part.m { di } else { 0.0 })
        .collect();
    let target = n * eps;
    let v = fill_cheapest(&c, target, target);
    let obj: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
    Ok(Radius {
        delta_min: obj / target,
        strict: false,
        v,
    })
}
