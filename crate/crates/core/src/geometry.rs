//! Samples, the covariate neighborhood, and boundary transport costs.

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::invalid;
use crate::norms::Norm;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub covariates: Vec<Vec<f64>>,
    pub outcomes: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(covariates: Vec<Vec<f64>>, outcomes: Vec<Vec<f64>>) -> Result<Self> {
        if covariates.is_empty() {
            return invalid("dataset needs at least one sample");
        }
        if covariates.len() != outcomes.len() {
            return Err(Error::Dimension(format!(
                "{} covariate rows but {} outcome rows",
                covariates.len(),
                outcomes.len()
            )));
        }
        let (nx, ny) = (covariates[0].len(), outcomes[0].len());
        if ny == 0 {
            return invalid("outcomes must have at least one column");
        }
        for (x, y) in covariates.iter().zip(&outcomes) {
            if x.len() != nx || y.len() != ny {
                return Err(Error::Dimension("ragged sample rows".into()));
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return invalid("dataset entries must be finite");
            }
        }
        Ok(Self {
            covariates,
            outcomes,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.len()
    }

    pub fn n_x(&self) -> usize {
        self.covariates[0].len()
    }

    pub fn n_y(&self) -> usize {
        self.outcomes[0].len()
    }

    /// Reads the `x1..xn,y1..yn` CSV layout.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut xcols = Vec::new();
        let mut ycols = Vec::new();
        for (k, h) in headers.iter().enumerate() {
            let h = h.to_ascii_lowercase();
            if h.starts_with('x') {
                xcols.push(k);
            } else if h.starts_with('y') {
                ycols.push(k);
            } else {
                return invalid(format!("unexpected column '{h}' (expected x1.., y1..)"));
            }
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k]
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad number '{}'", &rec[k])))
            };
            xs.push(xcols.iter().map(|&k| parse(k)).collect::<Result<Vec<_>>>()?);
            ys.push(ycols.iter().map(|&k| parse(k)).collect::<Result<Vec<_>>>()?);
        }
        Dataset::new(xs, ys)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.n_x())
            .map(|i| format!("x{i}"))
            .chain((1..=self.n_y()).map(|i| format!("y{i}")))
            .collect();
        w.write_record(&header)?;
        for (x, y) in self.covariates.iter().zip(&self.outcomes) {
            w.write_record(x.iter().chain(y).map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub center: Vec<f64>,
    pub radius: f64,
    pub ball_norm: Norm,
}

impl Neighborhood {
    pub fn new(center: Vec<f64>, radius: f64, ball_norm: Norm) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return invalid("neighborhood radius must be finite and nonnegative");
        }
        Ok(Self {
            center,
            radius,
            ball_norm,
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.ball_norm.dist(x, &self.center) <= self.radius
    }
}

/// Separable transport cost `||dx||^x_power + ||dy||^q`.
///
/// `q` is the order on the outcome side that every reformulation dispatches
/// on. `x_power` defaults to `q`; the portfolio study uses a squared covariate
/// cost together with `q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub x_base_norm: Norm,
    pub y_base_norm: Norm,
    pub q: f64,
    #[serde(default)]
    pub x_power: Option<f64>,
}

impl CostSpec {
    pub fn new(x_base_norm: Norm, y_base_norm: Norm, q: f64) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return invalid(format!("cost order q = {q} must be finite and >= 1"));
        }
        Ok(Self {
            x_base_norm,
            y_base_norm,
            q,
            x_power: None,
        })
    }

    pub fn with_x_power(mut self, p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return invalid("covariate cost power must be finite and >= 1");
        }
        self.x_power = Some(p);
        Ok(self)
    }

    pub fn x_power(&self) -> f64 {
        self.x_power.unwrap_or(self.q)
    }

    /// Norm used for `||alpha||_*`.
    pub fn dual_norm(&self) -> Norm {
        self.y_base_norm.dual()
    }
}

/// Samples relabeled so that the `m` outside samples come first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub outside_idx: Vec<usize>,
    pub inside_idx: Vec<usize>,
    /// Boundary costs in relabeled order.
    pub d: Option<Vec<f64>>,
    pub m: usize,
    /// `permutation[k]` is the original index of relabeled sample `k`.
    pub permutation: Vec<usize>,
}

impl Partition {
    pub fn n(&self) -> usize {
        self.permutation.len()
    }

    /// A partition given directly by `m` and `d` (already relabeled).
    pub fn from_distances(m: usize, d: Vec<f64>) -> Result<Self> {
        let n = d.len();
        if m > n {
            return invalid("m exceeds the number of samples");
        }
        let p = Partition {
            outside_idx: (0..m).collect(),
            inside_idx: (m..n).collect(),
            d: None,
            m,
            permutation: (0..n).collect(),
        };
        override_distances(p, d)
    }

    pub fn distances(&self) -> Result<&[f64]> {
        self.d
            .as_deref()
            .ok_or_else(|| Error::Invalid("partition has no boundary distances yet".into()))
    }

    /// Outcomes in relabeled order.
    pub fn outcomes(&self, data: &Dataset) -> Vec<Vec<f64>> {
        self.permutation.iter().map(|&i| data.outcomes[i].clone()).collect()
    }

    pub fn covariates(&self, data: &Dataset) -> Vec<Vec<f64>> {
        self.permutation.iter().map(|&i| data.covariates[i].clone()).collect()
    }
}

pub fn partition(data: &Dataset, nbhd: &Neighborhood) -> Result<Partition> {
    if nbhd.center.len() != data.n_x() {
        return Err(Error::Dimension(format!(
            "neighborhood center has length {} but covariates have {}",
            nbhd.center.len(),
            data.n_x()
        )));
    }
    let (outside_idx, inside_idx): (Vec<usize>, Vec<usize>) =
        (0..data.n()).partition(|&i| !nbhd.contains(&data.covariates[i]));
    let m = outside_idx.len();
    let permutation = outside_idx.iter().chain(&inside_idx).copied().collect();
    Ok(Partition {
        outside_idx,
        inside_idx,
        d: None,
        m,
        permutation,
    })
}

/// Base-norm distance from `x` to the boundary of the neighborhood, for the
/// supported (ball norm, base norm) pairs.
pub fn boundary_distance(x: &[f64], nbhd: &Neighborhood, base: Norm) -> Result<f64> {
    let diff: Vec<f64> = x.iter().zip(&nbhd.center).map(|(a, c)| a - c).collect();
    let r = nbhd.ball_norm.eval(&diff);
    let g = nbhd.radius;
    if nbhd.ball_norm == base {
        return Ok((r - g).abs());
    }
    match (nbhd.ball_norm, base) {
        (Norm::L1, Norm::L2) => {
            if r > g {
                let proj = project_l1_ball(&diff, g);
                Ok(Norm::L2.dist(&diff, &proj))
            } else {
                Ok((g - r) / (diff.len() as f64).sqrt())
            }
        }
        (ball, base) => Err(Error::Unsupported(format!(
            "boundary distance for a {ball} ball under a {base} cost; supply distances directly"
        ))),
    }
}

/// Fills `d_i = dist(x_i, boundary)^x_power` in relabeled order.
pub fn boundary_distances(
    mut part: Partition,
    data: &Dataset,
    nbhd: &Neighborhood,
    cost: &CostSpec,
) -> Result<Partition> {
    let pw = cost.x_power();
    let d = part
        .permutation
        .iter()
        .map(|&i| boundary_distance(&data.covariates[i], nbhd, cost.x_base_norm).map(|r| r.powf(pw)))
        .collect::<Result<Vec<_>>>()?;
    part.d = Some(d);
    Ok(part)
}

pub fn override_distances(mut part: Partition, d: Vec<f64>) -> Result<Partition> {
    if d.len() != part.n() {
        return Err(Error::Dimension(format!(
            "{} distances for {} samples",
            d.len(),
            part.n()
        )));
    }
    if let Some(bad) = d.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return invalid(format!("boundary distance {bad} must be finite and >= 0"));
    }
    part.d = Some(d);
    Ok(part)
}

/// Euclidean projection of `v` onto `{w : ||w||_1 <= radius}` (sort-based).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    if Norm::L1.eval(v) <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj > t {
            theta = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|&x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}
