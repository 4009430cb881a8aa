//! Single-problem configuration for `otcrm solve`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use otcrm::ambiguity::{build_ball, build_full, build_partial, min_radius_full, min_radius_partial, AdmissibleSet, MassInterval};
use otcrm::geometry::{boundary_distances, partition, CostSpec, Dataset, Neighborhood};
use otcrm::loss::LossSpec;
use otcrm::reformulations::{DecisionSet, RiskSpec};
use otcrm::{Error, Norm, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SetModel {
    #[default]
    Full,
    Partial,
    /// One ball around the uniform weights on every sample.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Conic compilation, or the cutting plane for distortion risk.
    #[default]
    Auto,
    Conic,
    CuttingPlane,
    /// Exponential-size distortion LP (small N only).
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    #[serde(default)]
    pub model: SetModel,
    /// Absolute budget.
    #[serde(default)]
    pub delta0: Option<f64>,
    /// Budget above the minimal feasible radius; used when `delta0` is absent.
    #[serde(default)]
    pub delta0_offset: Option<f64>,
    #[serde(default = "full_mass")]
    pub mass: [f64; 2],
}

fn full_mass() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_tol() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Sample CSV (`x1.., y1..`), relative to the config file.
    pub data: PathBuf,
    pub neighborhood: Neighborhood,
    pub cost: CostSpec,
    pub set: SetConfig,
    pub loss: LossSpec,
    pub risk: RiskSpec,
    pub decision: DecisionSet,
    #[serde(default)]
    pub method: Method,
    /// Cutting-plane gap tolerance.
    #[serde(default = "default_tol")]
    pub psi_tol: f64,
}

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ProblemConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        if cfg.data.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.data = dir.join(&cfg.data);
            }
        }
        Ok(cfg)
    }
}

/// Admissible set and aligned outcomes.
pub struct Prepared {
    pub set: AdmissibleSet,
    pub outcomes: Vec<Vec<f64>>,
    pub y_norm: Norm,
}

pub fn prepare(cfg: &ProblemConfig) -> Result<Prepared> {
    let data = Dataset::read_csv(&cfg.data)?;
    let y_norm = cfg.cost.y_base_norm;
    if cfg.set.model == SetModel::Ball {
        let delta = cfg
            .set
            .delta0
            .or(cfg.set.delta0_offset)
            .ok_or_else(|| Error::Invalid("ball sets need delta0".into()))?;
        let n = data.n();
        return Ok(Prepared {
            set: build_ball(&vec![1.0 / n as f64; n], delta)?,
            outcomes: data.outcomes,
            y_norm,
        });
    }
    let mass = MassInterval::new(cfg.set.mass[0], cfg.set.mass[1])?;
    let part = boundary_distances(partition(&data, &cfg.neighborhood)?, &data, &cfg.neighborhood, &cfg.cost)?;
    let full = cfg.set.model == SetModel::Full;
    let delta0 = match (cfg.set.delta0, cfg.set.delta0_offset) {
        (Some(d), _) => d,
        (None, Some(off)) => {
            let r = if full { min_radius_full(&part, &mass)? } else { min_radius_partial(&part, &mass)? };
            r.delta_min + off
        }
        (None, None) => return Err(Error::Invalid("set needs delta0 or delta0_offset".into())),
    };
    let set = if full {
        build_full(&part, delta0, &mass)?
    } else {
        build_partial(&part, delta0, &mass)?
    };
    Ok(Prepared {
        set,
        outcomes: part.outcomes(&data),
        y_norm,
    })
}
