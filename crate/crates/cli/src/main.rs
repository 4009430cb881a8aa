//! `otcrm`: feasibility diagnostics, single solves, support queries and the
//! portfolio benchmark.
//!
//! Exit codes: 0 success, 2 bad input, 3 infeasible radius, 4 solver failure.

mod problem;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use otcrm::ambiguity::{build_full, build_partial, min_radius_full, min_radius_partial, support_argmax, MassInterval};
use otcrm::cutting_plane::{solve_rdeu, CpOptions, CpStatus};
use otcrm::experiments::{
    read_results_csv, replicate, summarize, write_results_csv, write_summary_csv, write_svg, OracleRow, RunConfig,
    RunResult,
};
use otcrm::geometry::{boundary_distances, partition, CostSpec, Dataset, Neighborhood, Partition};
use otcrm::par::{self, Exec};
use otcrm::reformulations::{compile, compile_distortion_q1_exponential, Instance, RiskSpec};
use otcrm::{conic, Error, Norm};

use problem::{prepare, Method, ProblemConfig};

#[derive(Parser)]
#[command(name = "otcrm", version, about = "Union-ball distributionally robust conditional risk minimization")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimal feasible radius of the conditional model.
    Feasibility(SetArgs),
    /// Solve one problem from a config file.
    Solve(SolveArgs),
    /// Support function of the admissible set in a direction.
    Support(SupportArgs),
    /// Replicated portfolio benchmark.
    Bench(BenchArgs),
    /// Rebuild summary and plot from a results CSV.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Full,
    Partial,
}

#[derive(Args)]
struct SetArgs {
    /// Sample CSV with columns x1.., y1..
    #[arg(long)]
    data: PathBuf,
    /// Neighborhood as `c1,..,ck,radius,norm`, e.g. `0.1,0.1,0,1.2,l1`.
    #[arg(long)]
    nbhd: NbhdArg,
    /// Cost as `x_norm,y_norm,q[,x_power]`.
    #[arg(long, default_value = "l2,l2,1")]
    cost: CostArg,
    /// Mass interval `lo,hi` of the conditioning region.
    #[arg(long)]
    mass: MassArg,
    #[arg(long, value_enum, default_value = "full")]
    model: Model,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem config (TOML, or JSON by extension).
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Iteration CSV for cutting-plane runs.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Cross-check distortion runs against the exponential-size LP.
    #[arg(long)]
    certify: bool,
}

#[derive(Args)]
struct SupportArgs {
    #[command(flatten)]
    set: SetArgs,
    /// Budget; defaults to the minimal radius plus `--offset`.
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    offset: f64,
    /// Direction `v_1,..,v_N,v_delta` in relabeled order.
    #[arg(long, allow_hyphen_values = true)]
    direction: String,
}

#[derive(Args)]
struct BenchArgs {
    /// Run config (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// 50 replications and N up to 400.
    #[arg(long)]
    full_scale: bool,
    /// Worker threads for replications.
    #[arg(long)]
    jobs: Option<usize>,
    /// Run replications on one thread.
    #[arg(long)]
    sequential: bool,
    /// Write zero seconds so outputs are byte-identical across runs.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// results.csv from `bench`.
    #[arg(long)]
    results: PathBuf,
    /// oracle.json from `bench`, for the reference line.
    #[arg(long)]
    oracle: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone)]
struct NbhdArg(Neighborhood);

impl FromStr for NbhdArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() < 3 {
            return Err("expected c1,..,ck,radius,norm".into());
        }
        let norm = Norm::from_str(parts[parts.len() - 1]).map_err(|e| e.to_string())?;
        let nums = parts[..parts.len() - 1]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| format!("bad number '{v}'")))
            .collect::<Result<Vec<_>, _>>()?;
        let (center, radius) = nums.split_at(nums.len() - 1);
        Neighborhood::new(center.to_vec(), radius[0], norm)
            .map(NbhdArg)
            .map_err(|e| e.to_string())
    }
}

#[derive(Clone)]
struct CostArg(CostSpec);

impl FromStr for CostArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if !(3..=4).contains(&parts.len()) {
            return Err("expected x_norm,y_norm,q[,x_power]".into());
        }
        let xn = Norm::from_str(parts[0]).map_err(|e| e.to_string())?;
        let yn = Norm::from_str(parts[1]).map_err(|e| e.to_string())?;
        let q: f64 = parts[2].parse().map_err(|_| format!("bad q '{}'", parts[2]))?;
        let mut c = CostSpec::new(xn, yn, q).map_err(|e| e.to_string())?;
        if let Some(p) = parts.get(3) {
            let p: f64 = p.parse().map_err(|_| format!("bad x_power '{p}'"))?;
            c = c.with_x_power(p).map_err(|e| e.to_string())?;
        }
        Ok(CostArg(c))
    }
}

#[derive(Clone)]
struct MassArg(MassInterval);

impl FromStr for MassArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'")))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != 2 {
            return Err("expected lo,hi".into());
        }
        MassInterval::new(v[0], v[1]).map(MassArg).map_err(|e| e.to_string())
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InfeasibleRadius { .. } => 3,
        Error::Solver { status, .. } if *status == conic::Status::Infeasible => 3,
        Error::Solver { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Feasibility(a) => cmd_feasibility(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Support(a) => cmd_support(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Report(a) => cmd_report(&a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn load_partition(a: &SetArgs) -> otcrm::Result<Partition> {
    let data = Dataset::read_csv(&a.data)?;
    boundary_distances(partition(&data, &a.nbhd.0)?, &data, &a.nbhd.0, &a.cost.0)
}

fn cmd_feasibility(a: &SetArgs) -> otcrm::Result<()> {
    let part = load_partition(a)?;
    let mass = &a.mass.0;
    let r = match a.model {
        Model::Full => min_radius_full(&part, mass)?,
        Model::Partial => min_radius_partial(&part, mass)?,
    };
    let d = part.distances()?;
    let n = d.len() as f64;
    print_json(&json!({
        "delta_min": r.delta_min,
        "strict": r.strict,
        "m": part.m,
        "n": d.len(),
        "d_summary": {
            "min": d.iter().copied().fold(f64::INFINITY, f64::min),
            "max": d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "mean": d.iter().sum::<f64>() / n,
        },
    }));
    Ok(())
}

fn cmd_support(a: &SupportArgs) -> otcrm::Result<()> {
    let part = load_partition(&a.set)?;
    let mass = &a.set.mass.0;
    let set = match a.set.model {
        Model::Full => {
            let d0 = a.delta0.unwrap_or(min_radius_full(&part, mass)?.delta_min + a.offset);
            build_full(&part, d0, mass)?
        }
        Model::Partial => {
            let d0 = a.delta0.unwrap_or(min_radius_partial(&part, mass)?.delta_min + a.offset);
            build_partial(&part, d0, mass)?
        }
    };
    let v = a
        .direction
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("bad direction entry '{t}'"))))
        .collect::<otcrm::Result<Vec<_>>>()?;
    let (value, u) = support_argmax(&set, &v)?;
    print_json(&json!({
        "value": value,
        "delta0": set.delta0,
        "p": &u[..set.n],
        "delta": u[set.n],
        "permutation": part.permutation,
    }));
    Ok(())
}

/// Contents of results.json from `solve`.
#[derive(Debug, Serialize, Deserialize)]
struct SolveReport {
    value: f64,
    alpha: Vec<f64>,
    method: String,
    /// Cutting-plane gap; `None` for direct conic solves.
    gap: Option<f64>,
    seconds: f64,
    #[serde(default)]
    iterations: Option<usize>,
    #[serde(default)]
    certificate: Option<f64>,
}

fn cmd_solve(a: &SolveArgs) -> otcrm::Result<()> {
    let cfg = ProblemConfig::load(&a.problem)?;
    cfg.risk.validate()?;
    let prep = prepare(&cfg)?;
    let inst = Instance::new(&prep.outcomes, &prep.set, &cfg.decision, prep.y_norm)?;
    let tol = conic::default_tol();
    let q = cfg.cost.q;
    let start = Instant::now();
    let distortion = match &cfg.risk {
        RiskSpec::Distortion { h } => Some(h),
        _ => None,
    };
    let mut report = match (distortion, cfg.method) {
        (Some(h), Method::Auto | Method::CuttingPlane) => {
            if q != 1.0 {
                return Err(Error::Unsupported("the cutting plane handles q = 1 only".into()));
            }
            let opts = CpOptions {
                psi_tol: cfg.psi_tol,
                solver_tol: tol,
                ..CpOptions::default()
            };
            let r = solve_rdeu(h, &cfg.loss, &inst, &opts)?;
            if let Some(path) = &a.log {
                r.log.write_csv(fs::File::create(path)?)?;
            }
            if r.status != CpStatus::Converged {
                return Err(Error::Solver {
                    status: conic::Status::NumericFailure,
                    detail: format!("cutting plane stopped at the iteration cap with gap {}", r.upper - r.value),
                });
            }
            SolveReport {
                value: r.value,
                gap: Some(r.upper - r.value),
                alpha: r.alpha,
                method: "cutting_plane".into(),
                seconds: 0.0,
                iterations: Some(r.log.records.len()),
                certificate: None,
            }
        }
        (Some(h), Method::Exponential) => {
            let s = compile_distortion_q1_exponential(h, &cfg.loss, inst, 512)?.solve(tol)?;
            SolveReport {
                value: s.value,
                alpha: s.alpha,
                method: s.method,
                gap: None,
                seconds: 0.0,
                iterations: None,
                certificate: None,
            }
        }
        (None, Method::CuttingPlane | Method::Exponential) => {
            return Err(Error::Invalid("cutting_plane and exponential methods need a distortion risk".into()))
        }
        _ => {
            let s = compile(&cfg.risk, &cfg.loss, inst, q)?.solve(tol)?;
            SolveReport {
                value: s.value,
                alpha: s.alpha,
                method: s.method,
                gap: None,
                seconds: 0.0,
                iterations: None,
                certificate: None,
            }
        }
    };
    report.seconds = start.elapsed().as_secs_f64();
    if a.certify {
        let Some(h) = distortion else {
            return Err(Error::Invalid("--certify applies to distortion risk".into()));
        };
        let inst = Instance::new(&prep.outcomes, &prep.set, &cfg.decision, prep.y_norm)?;
        let cert = compile_distortion_q1_exponential(h, &cfg.loss, inst, 512)?.solve(tol)?;
        report.certificate = Some(cert.value);
        eprintln!("certificate {} (difference {:.2e})", cert.value, (cert.value - report.value).abs());
    }
    fs::write(&a.out, serde_json::to_string_pretty(&report)? + "\n")?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn write_outputs(dir: &Path, res: &RunResult) -> otcrm::Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&res.rows, fs::File::create(dir.join("results.csv"))?)?;
    let summary = summarize(&res.rows);
    write_summary_csv(&summary, fs::File::create(dir.join("summary.csv"))?)?;
    fs::write(dir.join("oracle.json"), serde_json::to_string_pretty(&res.oracle)? + "\n")?;
    fs::write(dir.join("bands.svg"), write_svg(&summary, &res.oracle))?;
    Ok(())
}

fn cmd_bench(a: &BenchArgs) -> otcrm::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if a.full_scale {
        let ps = RunConfig::full_scale();
        cfg.ns = ps.ns;
        cfg.reps = ps.reps;
    }
    if a.sequential {
        cfg.exec = Exec::Sequential;
    }
    if a.no_timings {
        cfg.timings = false;
    }
    let res = par::with_jobs(a.jobs, || replicate(&cfg))?;
    write_outputs(&a.out, &res)?;
    let failed = res.rows.iter().filter(|r| r.risk.is_none()).count();
    eprintln!("{} runs, {} failed; outputs in {}", res.rows.len(), failed, a.out.display());
    if failed == res.rows.len() {
        return Err(Error::Solver {
            status: conic::Status::NumericFailure,
            detail: "every replication failed".into(),
        });
    }
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> otcrm::Result<()> {
    let rows = read_results_csv(fs::File::open(&a.results)?)?;
    let oracle: Vec<OracleRow> = match &a.oracle {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => Vec::new(),
    };
    write_outputs(&a.out, &RunResult { rows, oracle })
}
