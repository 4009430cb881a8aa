//! Synthetic portfolio law: `X` with independent normal marginals and
//! `Y | X = x ~ N(m(x), L D(x_2)^2 L')`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::Dataset;
use crate::norms::Norm;

pub const MU: [f64; 6] = [86.8625, 71.6059, 75.3759, 97.6258, 52.7854, 84.8973];

pub const L: [[f64; 6]; 6] = [
    [136.687, 0.0, 0.0, 0.0, 0.0, 0.0],
    [8.79766, 142.279, 0.0, 0.0, 0.0, 0.0],
    [16.1504, 15.0637, 122.613, 0.0, 0.0, 0.0],
    [18.4944, 15.6961, 26.344, 139.148, 0.0, 0.0],
    [3.41394, 16.5922, 14.8795, 13.9914, 151.732, 0.0],
    [24.8156, 18.7292, 17.1574, 6.36536, 24.7703, 144.672],
];

pub const V1: [f64; 6] = [30.0, -40.0, 0.0, 15.0, -10.0, 5.0];
pub const V2: [f64; 6] = [-400.0, 60.0, 70.0, 80.0, 90.0, 100.0];
pub const V3: [f64; 6] = [0.0, 20.0, -25.0, 0.0, 15.0, -12.0];

pub fn gate(x2: f64) -> f64 {
    1.0 / (1.0 + (-4.0 * (x2 - 0.5)).exp())
}

/// Diagonal of `D(x_2)`.
pub fn scales(x2: f64) -> [f64; 6] {
    let g = gate(x2);
    [1.0, 1.0 - 0.5 * g, 1.0 + 6.0 * g, 1.0, 1.0 + 6.0 * g, 1.0]
}

/// `m(x) = mu + x_1 v_1 + x_2 v_2 + tanh(x_3) v_3`.
pub fn mean(x: &[f64]) -> [f64; 6] {
    let t = x[2].tanh();
    std::array::from_fn(|k| MU[k] + x[0] * V1[k] + x[1] * V2[k] + t * V3[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    /// Variance of `X_1` (read as a variance; its mean is 0.1).
    pub x1_variance: f64,
}

impl Default for GenerativeModel {
    fn default() -> Self {
        Self { x1_variance: 10.0 }
    }
}

impl GenerativeModel {
    pub fn sample_x<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        let x1 = Normal::new(0.1, self.x1_variance.sqrt()).expect("finite variance");
        [x1.sample(rng), rng.sample(StandardNormal), rng.sample(StandardNormal)]
    }

    /// `m(x) + L D(x_2) z` with `z` standard normal.
    pub fn sample_y_given_x<R: Rng>(&self, x: &[f64], rng: &mut R) -> [f64; 6] {
        let s = scales(x[1]);
        let z: [f64; 6] = std::array::from_fn(|k| s[k] * rng.sample::<f64, _>(StandardNormal));
        let m = mean(x);
        std::array::from_fn(|i| m[i] + (0..=i).map(|k| L[i][k] * z[k]).sum::<f64>())
    }

    pub fn sample_joint<R: Rng>(&self, n: usize, rng: &mut R) -> Dataset {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.sample_x(rng);
            ys.push(self.sample_y_given_x(&x, rng).to_vec());
            xs.push(x.to_vec());
        }
        Dataset::new(xs, ys).expect("generated data is well formed")
    }

    /// `count` draws of `Y | X in N` by rejection on `X`. Returns `None` if
    /// the acceptance rate falls below `1e-4`.
    pub fn sample_conditional<R: Rng>(
        &self,
        count: usize,
        center: &[f64],
        radius: f64,
        ball: Norm,
        rng: &mut R,
    ) -> Option<Vec<[f64; 6]>> {
        let mut out = Vec::with_capacity(count);
        let mut tries: u64 = 0;
        while out.len() < count {
            let x = self.sample_x(rng);
            tries += 1;
            let diff: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
            if ball.eval(&diff) <= radius {
                out.push(self.sample_y_given_x(&x, rng));
            } else if tries >= 100_000 && (out.len() as f64) < 1e-4 * tries as f64 {
                return None;
            }
        }
        Some(out)
    }
}
