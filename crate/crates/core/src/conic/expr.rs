use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Affine expression `sum_j a_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn var(j: usize) -> Self {
        Self {
            terms: vec![(j, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(j: usize, a: f64) -> Self {
        Self {
            terms: vec![(j, a)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn sum_of(vars: &[usize]) -> Self {
        Self {
            terms: vars.iter().map(|&j| (j, 1.0)).collect(),
            constant: 0.0,
        }
    }

    /// `sum_k w_k x_{vars[k]}`.
    pub fn dot(vars: &[usize], w: &[f64]) -> Self {
        Self {
            terms: vars.iter().zip(w).map(|(&j, &a)| (j, a)).collect(),
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, j: usize, a: f64) {
        self.terms.push((j, a));
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
    }

    /// Merges duplicate indices and drops exact zeros.
    pub fn compact(self) -> Self {
        if self.terms.len() < 2 && self.terms.iter().all(|t| t.1 != 0.0) {
            return self;
        }
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (j, a) in self.terms {
            *acc.entry(j).or_insert(0.0) += a;
        }
        Self {
            terms: acc.into_iter().filter(|t| t.1 != 0.0).collect(),
            constant: self.constant,
        }
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl AddAssign for LinExpr {
    fn add_assign(&mut self, rhs: LinExpr) {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(self, rhs: LinExpr) -> LinExpr {
        self + (-rhs)
    }
}

impl Sub<f64> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: f64) -> LinExpr {
        self.constant -= rhs;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, k: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }
}
