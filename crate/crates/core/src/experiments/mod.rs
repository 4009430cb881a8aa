//! Portfolio study: synthetic data, the five decision models, Monte Carlo
//! out-of-sample evaluation and replication.

mod model;
mod report;

pub use model::{gate, mean, scales, GenerativeModel, L, MU, V1, V2, V3};
pub use report::{read_results_csv, summarize, write_results_csv, write_summary_csv, write_svg, SummaryRow};

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{build_ball, build_full, min_radius_full, MassInterval};
use crate::cutting_plane::{solve_rdeu, CpOptions, CpStatus};
use crate::distortion::Distortion;
use crate::error::invalid;
use crate::geometry::{boundary_distances, partition, CostSpec, Dataset, Neighborhood};
use crate::loss::LossSpec;
use crate::norms::Norm;
use crate::par::{self, Exec};
use crate::reformulations::{DecisionSet, Instance};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "UB-CDRO")]
    UbCdro,
    #[serde(rename = "SAA")]
    Saa,
    #[serde(rename = "UDRO")]
    Udro,
    #[serde(rename = "CSAA")]
    Csaa,
    #[serde(rename = "CDRO")]
    Cdro,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [ModelKind::UbCdro, ModelKind::Saa, ModelKind::Udro, ModelKind::Csaa, ModelKind::Cdro];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::UbCdro => "UB-CDRO",
            ModelKind::Saa => "SAA",
            ModelKind::Udro => "UDRO",
            ModelKind::Csaa => "CSAA",
            ModelKind::Cdro => "CDRO",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown model {s:?}; expected UB-CDRO, SAA, UDRO, CSAA or CDRO")))
    }
}

fn default_ns() -> Vec<usize> {
    vec![50, 100, 200]
}
fn default_reps() -> usize {
    10
}
fn default_seed() -> u64 {
    20240607
}
fn default_distortions() -> Vec<Distortion> {
    vec![Distortion::Square, Distortion::Exp]
}
fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}
fn default_mc() -> usize {
    20_000
}
fn default_omega() -> [f64; 2] {
    [0.05, 1.0]
}
fn default_delta_scale() -> f64 {
    0.1
}
fn default_delta0_numerator() -> f64 {
    100.0
}
fn default_center() -> Vec<f64> {
    vec![0.1, 0.1, 0.0]
}
fn default_radius() -> f64 {
    1.2
}
fn default_ball() -> Norm {
    Norm::L1
}
fn default_x_norm() -> Norm {
    Norm::L2
}
fn default_x_power() -> f64 {
    2.0
}
fn default_y_norm() -> Norm {
    Norm::L2
}
fn default_loss() -> LossSpec {
    LossSpec::negative_return()
}
fn default_psi() -> f64 {
    1e-2
}
fn default_max_iter() -> usize {
    200
}
fn default_resolution() -> usize {
    8
}
fn default_eval_seed() -> u64 {
    7
}
fn yes() -> bool {
    true
}

/// Experiment configuration (TOML or JSON). Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_distortions")]
    pub distortions: Vec<Distortion>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    /// Size of the shared Monte Carlo evaluation sample.
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_eval_seed")]
    pub eval_seed: u64,
    /// Mass interval `[omega_1, 1]` of the conditioning region for UB-CDRO;
    /// `omega_1` is a lower bound on the true region probability (about 0.08).
    #[serde(default = "default_omega")]
    pub omega: [f64; 2],
    /// UB-CDRO radius `delta_min + scale sqrt(ln 100) / N`.
    #[serde(default = "default_delta_scale")]
    pub delta_scale: f64,
    /// UDRO/CDRO radius `numerator / N`.
    #[serde(default = "default_delta0_numerator")]
    pub delta0_numerator: f64,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_ball")]
    pub ball_norm: Norm,
    #[serde(default = "default_x_norm")]
    pub x_norm: Norm,
    #[serde(default = "default_x_power")]
    pub x_power: f64,
    #[serde(default = "default_y_norm")]
    pub y_norm: Norm,
    #[serde(default)]
    pub generator: GenerativeModel,
    #[serde(default = "default_loss")]
    pub loss: LossSpec,
    /// Cutting-plane gap tolerance; risks here are O(10..100).
    #[serde(default = "default_psi")]
    pub psi_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Simplex grid resolution for the oracle optimum.
    #[serde(default = "default_resolution")]
    pub oracle_resolution: usize,
    #[serde(default)]
    pub exec: Exec,
    /// Write wall-clock seconds; off gives byte-identical results files.
    #[serde(default = "yes")]
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl RunConfig {
    /// Larger study: 50 replications and N up to 400.
    pub fn full_scale() -> Self {
        Self {
            ns: vec![50, 100, 200, 300, 400],
            reps: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ns.iter().any(|&n| n == 0) {
            return invalid("ns must be a nonempty list of positive sizes");
        }
        if self.reps == 0 {
            return invalid("reps must be >= 1");
        }
        if self.mc_samples < 10_000 {
            return invalid("mc_samples must be >= 10000");
        }
        if self.distortions.is_empty() || self.models.is_empty() {
            return invalid("need at least one distortion and one model");
        }
        for h in &self.distortions {
            h.validate()?;
            if !h.is_convex() {
                return invalid(format!("distortion {h} is not convex"));
            }
        }
        MassInterval::new(self.omega[0], self.omega[1])?;
        if self.center.len() != 3 {
            return invalid("center must have 3 coordinates");
        }
        self.loss.clone().validated()?;
        self.loss.lipschitz()?;
        Ok(())
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn neighborhood(&self) -> Result<Neighborhood> {
        Neighborhood::new(self.center.clone(), self.radius, self.ball_norm)
    }

    fn cost(&self) -> Result<CostSpec> {
        CostSpec::new(self.x_norm, self.y_norm, 1.0)?.with_x_power(self.x_power)
    }

    fn cp_options(&self) -> CpOptions {
        CpOptions {
            psi_tol: self.psi_tol,
            max_iter: self.max_iter,
            ..CpOptions::default()
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the data set for sample size `n` and replication `rep`.
pub fn data_seed(base: u64, n: usize, rep: usize) -> u64 {
    mix(base ^ mix((n as u64) << 32 ^ rep as u64))
}

pub fn sample_joint(cfg: &RunConfig, n: usize, seed: u64) -> Dataset {
    cfg.generator.sample_joint(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub alpha: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits one model on one data set with distortion `h`.
pub fn run_model(kind: ModelKind, h: &Distortion, data: &Dataset, cfg: &RunConfig) -> Result<ModelFit> {
    let nbhd = cfg.neighborhood()?;
    let n = data.n();
    let nf = n as f64;
    let dec = DecisionSet::simplex(data.n_y());
    let opts = cfg.cp_options();
    let fit = |outcomes: &[Vec<f64>], set| -> Result<ModelFit> {
        let inst = Instance::new(outcomes, set, &dec, cfg.y_norm)?;
        let r = solve_rdeu(h, &cfg.loss, &inst, &opts)?;
        Ok(ModelFit {
            alpha: r.alpha,
            value: r.value,
            iterations: r.log.records.len(),
            converged: r.status == CpStatus::Converged,
        })
    };
    let conditional = || -> Result<Vec<Vec<f64>>> {
        let ys: Vec<Vec<f64>> = (0..n)
            .filter(|&i| nbhd.contains(&data.covariates[i]))
            .map(|i| data.outcomes[i].clone())
            .collect();
        if ys.is_empty() {
            return Err(Error::EmptyNeighborhood);
        }
        Ok(ys)
    };
    match kind {
        ModelKind::UbCdro => {
            let part = partition(data, &nbhd)?;
            let part = boundary_distances(part, data, &nbhd, &cfg.cost()?)?;
            let mass = MassInterval::new(cfg.omega[0], cfg.omega[1])?;
            let r = min_radius_full(&part, &mass)?;
            let delta0 = r.delta_min + cfg.delta_scale * 100f64.ln().sqrt() / nf;
            let set = build_full(&part, delta0, &mass)?;
            fit(&part.outcomes(data), &set)
        }
        ModelKind::Saa | ModelKind::Udro => {
            let delta = if kind == ModelKind::Saa { 0.0 } else { cfg.delta0_numerator / nf };
            let set = build_ball(&vec![1.0 / nf; n], delta)?;
            fit(&data.outcomes, &set)
        }
        ModelKind::Csaa | ModelKind::Cdro => {
            let ys = conditional()?;
            let k = ys.len();
            let delta = if kind == ModelKind::Csaa { 0.0 } else { cfg.delta0_numerator / nf };
            let set = build_ball(&vec![1.0 / k as f64; k], delta)?;
            fit(&ys, &set)
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// Distortion risk of `l(Y'alpha)` under the empirical law of `ys`, with the
/// influence-function standard error of the L-statistic.
pub fn evaluate_risk(alpha: &[f64], h: &Distortion, loss: &LossSpec, ys: &[[f64; 6]]) -> Estimate {
    let m = ys.len();
    let mut r: Vec<f64> = ys
        .iter()
        .map(|y| loss.eval(y.iter().zip(alpha).map(|(a, b)| a * b).sum()))
        .collect();
    r.sort_by(f64::total_cmp);
    let mf = m as f64;
    let mut value = 0.0;
    let mut prev = 0.0;
    for (k, &rk) in r.iter().enumerate() {
        let hk = if k + 1 == m { 1.0 } else { h.eval((k + 1) as f64 / mf) };
        value += (hk - prev) * rk;
        prev = hk;
    }
    // IF(r_(j)) = sum_k h'(F_k) F_k gap_k - sum_{k >= j} h'(F_k) gap_k with
    // F_k = k/M and gap_k = r_(k+1) - r_(k).
    let terms: Vec<f64> = (0..m.saturating_sub(1))
        .map(|k| {
            let f = (k + 1) as f64 / mf;
            h.left_deriv(f) * (r[k + 1] - r[k])
        })
        .collect();
    let base: f64 = terms.iter().enumerate().map(|(k, t)| t * (k + 1) as f64 / mf).sum();
    let mut tail = vec![0.0; m + 1];
    for k in (0..terms.len()).rev() {
        tail[k] = tail[k + 1] + terms[k];
    }
    let inf: Vec<f64> = (0..m).map(|j| base - tail[j]).collect();
    let mean_if = inf.iter().sum::<f64>() / mf;
    let var = inf.iter().map(|v| (v - mean_if).powi(2)).sum::<f64>() / (mf - 1.0).max(1.0);
    Estimate {
        value,
        se: (var / mf).sqrt(),
    }
}

/// Draws `mc_samples` outcomes from `Y | X in N`.
pub fn conditional_sample(cfg: &RunConfig, mc_samples: usize, seed: u64) -> Result<Vec<[f64; 6]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cfg.generator
        .sample_conditional(mc_samples, &cfg.center, cfg.radius, cfg.ball_norm, &mut rng)
        .ok_or_else(|| Error::Invalid("rejection sampling acceptance below 1e-4".into()))
}

/// Out-of-sample conditional risk of `alpha` from a fresh sample.
pub fn oracle_conditional_risk(
    alpha: &[f64],
    h: &Distortion,
    loss: &LossSpec,
    cfg: &RunConfig,
    mc_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if mc_samples < 10_000 {
        return invalid("mc_samples must be >= 10000");
    }
    Ok(evaluate_risk(alpha, h, loss, &conditional_sample(cfg, mc_samples, seed)?))
}

/// All points of the simplex in `dim` coordinates with denominator `res`.
pub fn simplex_grid(dim: usize, res: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(left - k, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(res, dim, &mut Vec::new(), &mut out);
    out.into_iter()
        .map(|c| c.into_iter().map(|k| k as f64 / res as f64).collect())
        .collect()
}

/// Minimum of the estimated risk over the simplex grid.
pub fn oracle_optimum(h: &Distortion, loss: &LossSpec, ys: &[[f64; 6]], res: usize, exec: Exec) -> (Vec<f64>, Estimate) {
    let grid = simplex_grid(6, res);
    let vals = par::map(exec, &grid, |a| evaluate_risk(a, h, loss, ys));
    let best = (0..grid.len())
        .min_by(|&a, &b| vals[a].value.total_cmp(&vals[b].value))
        .expect("grid is nonempty");
    (grid[best].clone(), vals[best])
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub model: ModelKind,
    pub n: usize,
    pub rep: usize,
    pub distortion: String,
    /// Out-of-sample risk; `None` for failed replications.
    pub risk: Option<f64>,
    pub se: Option<f64>,
    pub seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub alpha: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub distortion: String,
    pub alpha: Vec<f64>,
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub rows: Vec<RunRow>,
    pub oracle: Vec<OracleRow>,
}

impl RunResult {
    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.rows)
    }

    pub fn oracle_value(&self, h: &str) -> Option<f64> {
        self.oracle.iter().find(|o| o.distortion == h).map(|o| o.value)
    }
}

/// Runs every (distortion, N, replication) job; replications are parallel
/// under `cfg.exec`. Data for a given (N, rep) is shared by all models and
/// distortions; evaluation uses one shared conditional sample.
pub fn replicate(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let ys = conditional_sample(cfg, cfg.mc_samples, cfg.eval_seed)?;
    let oracle = cfg
        .distortions
        .iter()
        .map(|h| {
            let (alpha, est) = oracle_optimum(h, &cfg.loss, &ys, cfg.oracle_resolution, cfg.exec);
            OracleRow {
                distortion: h.to_string(),
                alpha,
                value: est.value,
                se: est.se,
            }
        })
        .collect();
    let mut jobs = Vec::new();
    for (hi, _) in cfg.distortions.iter().enumerate() {
        for &n in &cfg.ns {
            for rep in 0..cfg.reps {
                for &model in &cfg.models {
                    jobs.push((hi, n, rep, model));
                }
            }
        }
    }
    let rows = par::map(cfg.exec, &jobs, |&(hi, n, rep, model)| {
        let h = &cfg.distortions[hi];
        let data = sample_joint(cfg, n, data_seed(cfg.seed, n, rep));
        let start = Instant::now();
        let fit = run_model(model, h, &data, cfg);
        let seconds = if cfg.timings { start.elapsed().as_secs_f64() } else { 0.0 };
        match fit {
            Ok(f) => {
                let est = evaluate_risk(&f.alpha, h, &cfg.loss, &ys);
                RunRow {
                    model,
                    n,
                    rep,
                    distortion: h.to_string(),
                    risk: Some(est.value),
                    se: Some(est.se),
                    seconds,
                    iterations: f.iterations,
                    converged: f.converged,
                    alpha: f.alpha,
                    error: None,
                }
            }
            Err(e) => RunRow {
                model,
                n,
                rep,
                distortion: h.to_string(),
                risk: None,
                se: None,
                seconds,
                iterations: 0,
                converged: false,
                alpha: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    });
    Ok(RunResult { rows, oracle })
}
