//! Command-line front end. Every command is a pure function of its flags and
//! input files; wall-clock timings go to `*.timings.json` sidecars so the
//! main outputs are reproducible byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::adn::{make_desk_instance_with, AdnConfig, AdnProblem, DeskOptions};
use crate::clustering::{
    compute_pdd, log_betas, solve_clustering, sweep_beta, sweep_csv, ClusteringOptions, KChoice, PddMatrix,
    ReductionResult,
};
use crate::error::{Error, Result};
use crate::evaluation::{compare_methods, evaluate, CompareOptions, EvaluationContext, Method};
use crate::projection::{build_or_load, cache_dir, save_matrix, ProblemSpaceMatrix};
use crate::scenario::{load_scenarios, ScenarioSet};
use crate::tsso::{SolveOptions, TssoProblem};
use crate::uc::{make_uc_desk_instance, UcConfig, UcProblem};

#[derive(Debug, Parser)]
#[command(name = "pdsr", version, about = "Problem-driven scenario reduction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build (or reuse) the problem-space matrix F.
    Project(RunArgs),
    /// Cluster scenarios on the problem-driven distance.
    Cluster(RunArgs),
    /// Cluster for a range of β and tabulate K, SPDD and PDDBI.
    SweepBeta(RunArgs),
    /// Score a saved reduction against the full set.
    Evaluate(RunArgs),
    /// Compare reduction methods at a fixed K.
    Compare(RunArgs),
    /// Write a seeded synthetic instance (config and scenario files).
    Desk(DeskArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Adn,
    Uc,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    /// Problem configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Scenario values (CSV, one row per scenario).
    #[arg(long)]
    pub scenarios: PathBuf,
    /// Scenario probabilities (CSV); uniform when absent.
    #[arg(long)]
    pub probabilities: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = pdsr_milp::DEFAULT_GAP_TOL)]
    pub gap_tol: f64,
    /// Cost of adding a cluster. With `sweep-beta`, may be repeated.
    #[arg(long)]
    pub beta: Vec<f64>,
    /// `lo:hi:count` log-spaced β values for `sweep-beta`; a β = 0 row is
    /// always added in front.
    #[arg(long)]
    pub beta_range: Option<String>,
    /// Fixed number of clusters.
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Weight of the distribution-space term in the distance.
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    /// Comma-separated methods for `compare`.
    #[arg(long, value_delimiter = ',', default_value = "pdsr,km-e,kd-e,hc,ws")]
    pub methods: Vec<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Reduction to score with `evaluate`; defaults to `<out>/reduction.json`.
    #[arg(long)]
    pub reduction: Option<PathBuf>,
    /// Skip scenario effectiveness in `evaluate`.
    #[arg(long)]
    pub no_se: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DeskArgs {
    #[arg(long, value_enum)]
    pub problem: ProblemKind,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Number of scenarios.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Network size (ADN only).
    #[arg(long, default_value_t = 6)]
    pub buses: usize,
    /// Share of injected bad scenarios (ADN only).
    #[arg(long, default_value_t = 0.1)]
    pub bad_fraction: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub const CONFIG_FILE: &str = "config.json";
pub const SCENARIOS_FILE: &str = "scenarios.csv";
pub const PROBABILITIES_FILE: &str = "probabilities.csv";
pub const REDUCTION_FILE: &str = "reduction.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_CSV: &str = "table.csv";
pub const TABLE_JSON: &str = "table.json";

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Desk(a) => cmd_desk(&a),
        Command::Project(a) => with_workers(&a, cmd_project),
        Command::Cluster(a) => with_workers(&a, cmd_cluster),
        Command::SweepBeta(a) => with_workers(&a, cmd_sweep_beta),
        Command::Evaluate(a) => with_workers(&a, cmd_evaluate),
        Command::Compare(a) => with_workers(&a, cmd_compare),
    }
}

fn with_workers(a: &RunArgs, f: fn(&RunArgs) -> Result<()>) -> Result<()> {
    if a.workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| f(a))
}

/// The problem and scenario set named by the flags.
pub fn load_inputs(a: &RunArgs) -> Result<(Box<dyn TssoProblem>, ScenarioSet)> {
    let problem: Box<dyn TssoProblem> = match a.problem {
        ProblemKind::Adn => Box::new(AdnProblem::new(AdnConfig::load(&a.config)?)?),
        ProblemKind::Uc => Box::new(UcProblem::new(UcConfig::load(&a.config)?)?),
    };
    let set = load_scenarios(&a.scenarios, a.probabilities.as_deref())?;
    Ok((problem, set))
}

fn solve_opts(a: &RunArgs) -> Result<SolveOptions> {
    if !(a.gap_tol > 0.0 && a.gap_tol < 1.0) {
        return Err(Error::Config(format!("--gap-tol must lie in (0, 1), got {}", a.gap_tol)));
    }
    Ok(SolveOptions::with_gap(a.gap_tol))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, serde_json::to_string_pretty(value)? + "\n")
}

fn matrix(a: &RunArgs, problem: &dyn TssoProblem, set: &ScenarioSet) -> Result<ProblemSpaceMatrix> {
    let started = Instant::now();
    let (m, hit) = build_or_load(problem, set, a.workers, &solve_opts(a)?, &cache_dir(&a.out))?;
    if hit {
        log::info!("reused cached problem-space matrix {}", &m.meta.fingerprint[..16]);
    } else {
        log::info!("projected {} scenarios in {:.2} s", set.len(), started.elapsed().as_secs_f64());
    }
    Ok(m)
}

fn pdd(a: &RunArgs, m: &ProblemSpaceMatrix, set: &ScenarioSet) -> Result<PddMatrix> {
    let d = compute_pdd(m, a.mu, Some(set))?;
    if d.clamped > 0 {
        log::warn!("{} slightly negative distances were clamped to zero", d.clamped);
    }
    Ok(d)
}

fn cmd_desk(a: &DeskArgs) -> Result<()> {
    let (config, set, bad) = match a.problem {
        ProblemKind::Adn => {
            let inst = make_desk_instance_with(&DeskOptions {
                seed: a.seed,
                scenarios: a.n,
                horizon: a.horizon.unwrap_or(12),
                buses: a.buses,
                bad_fraction: a.bad_fraction,
            })?;
            (inst.config.to_json(), inst.scenarios, inst.bad)
        }
        ProblemKind::Uc => {
            let inst = make_uc_desk_instance(a.seed, a.n, a.horizon.unwrap_or(6))?;
            (inst.config.to_json(), inst.scenarios, inst.bad)
        }
    };
    write(&a.out.join(CONFIG_FILE), config + "\n")?;
    set.save(&a.out.join(SCENARIOS_FILE), Some(&a.out.join(PROBABILITIES_FILE)))?;
    let ids: Vec<&str> = bad.iter().map(|&i| set.scenario(i).id.as_str()).collect();
    write_json(&a.out.join("bad.json"), &ids)?;
    println!("wrote {} scenarios to {}", set.len(), a.out.display());
    Ok(())
}

fn cmd_project(a: &RunArgs) -> Result<()> {
    let (problem, set) = load_inputs(a)?;
    let started = Instant::now();
    let m = matrix(a, problem.as_ref(), &set)?;
    save_matrix(&m, &a.out)?;
    println!(
        "F: {n}x{n} written to {}; tau_p = {:.3} s",
        a.out.display(),
        started.elapsed().as_secs_f64(),
        n = m.len()
    );
    Ok(())
}

fn k_choice(a: &RunArgs) -> Result<KChoice> {
    match (a.beta.as_slice(), &a.beta_range, a.k) {
        ([b], None, None) => {
            if !(*b >= 0.0) {
                return Err(Error::Config(format!("--beta must be non-negative, got {b}")));
            }
            Ok(KChoice::Beta(*b))
        }
        ([], None, Some(k)) => Ok(KChoice::Fixed(k)),
        _ => Err(Error::Config(
            "cluster needs exactly one of --beta (a single value) or --K".into(),
        )),
    }
}

fn cmd_cluster(a: &RunArgs) -> Result<()> {
    let choice = k_choice(a)?;
    let (problem, set) = load_inputs(a)?;
    let m = matrix(a, problem.as_ref(), &set)?;
    let d = pdd(a, &m, &set)?;
    let started = Instant::now();
    let r = solve_clustering(&d, set.probabilities(), choice, &ClusteringOptions::default())?;
    let tau_c = started.elapsed().as_secs_f64();
    write(&a.out.join(REDUCTION_FILE), r.to_json()? + "\n")?;
    write_json(&a.out.join("reduction.timings.json"), &serde_json::json!({ "tau_c": tau_c }))?;
    let ids: Vec<&str> = r.representatives.iter().map(|&i| set.scenario(i).id.as_str()).collect();
    println!("K = {}, SPDD = {}, representatives: {}", r.k, r.spdd.unwrap_or(0.0), ids.join(" "));
    Ok(())
}

/// `lo:hi:count` with `0 < lo <= hi`.
pub fn parse_beta_range(s: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::Config(format!("--beta-range must look like lo:hi:count, got `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(Error::Config(format!("--beta-range needs 0 < lo <= hi and count >= 1, got `{s}`")));
    }
    Ok((lo, hi, count))
}

fn cmd_sweep_beta(a: &RunArgs) -> Result<()> {
    let betas = match (&a.beta_range, a.beta.is_empty()) {
        (Some(r), true) => {
            let (lo, hi, count) = parse_beta_range(r)?;
            log_betas(lo, hi, count, true)
        }
        (None, false) => a.beta.clone(),
        _ => return Err(Error::Config("sweep-beta needs either --beta-range or --beta values".into())),
    };
    if betas.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::Config("β values must be non-negative".into()));
    }
    let (problem, set) = load_inputs(a)?;
    let m = matrix(a, problem.as_ref(), &set)?;
    let d = pdd(a, &m, &set)?;
    let rows = sweep_beta(&d, set.probabilities(), &betas, &ClusteringOptions::default())?;
    write(&a.out.join(SWEEP_FILE), sweep_csv(&rows)?)?;
    println!("{} β values, K from {} to {}", rows.len(), rows[0].k, rows[rows.len() - 1].k);
    Ok(())
}

fn cmd_evaluate(a: &RunArgs) -> Result<()> {
    let (problem, set) = load_inputs(a)?;
    let path = a.reduction.clone().unwrap_or_else(|| a.out.join(REDUCTION_FILE));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let r = ReductionResult::from_json(&text)?;
    if r.assignment.len() != set.len() {
        return Err(Error::Shape(format!(
            "reduction covers {} scenarios, the set has {}",
            r.assignment.len(),
            set.len()
        )));
    }
    let m = matrix(a, problem.as_ref(), &set)?;
    let d = pdd(a, &m, &set)?;
    let started = Instant::now();
    let ctx = EvaluationContext {
        matrix: Some(&m),
        pdd: Some(&d),
        with_se: !a.no_se,
        ..EvaluationContext::default()
    };
    let report = evaluate(problem.as_ref(), &set, &r, &ctx, &solve_opts(a)?)?;
    write_json(&a.out.join(REPORT_FILE), &report)?;
    write_json(
        &a.out.join("report.timings.json"),
        &serde_json::json!({ "tau_o": started.elapsed().as_secs_f64() }),
    )?;
    match report.og_pct {
        Some(p) => println!("K = {}, OG = {p:.4}%", report.k),
        None => println!("K = {}, OG unavailable (benchmark not solved to the requested gap)", report.k),
    }
    Ok(())
}

fn cmd_compare(a: &RunArgs) -> Result<()> {
    let k = a.k.ok_or_else(|| Error::Config("compare needs --K".into()))?;
    let methods = a.methods.iter().map(|m| Method::parse(m.trim())).collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::Config("--methods is empty".into()));
    }
    let (problem, set) = load_inputs(a)?;
    let m = if methods.iter().any(|m| m.needs_projection()) {
        Some(matrix(a, problem.as_ref(), &set)?)
    } else {
        None
    };
    let opts = CompareOptions {
        k,
        seed: a.seed,
        mu: a.mu,
        solve: solve_opts(a)?,
        ..CompareOptions::default()
    };
    let (table, timings) = compare_methods(problem.as_ref(), &set, &methods, m.as_ref(), &opts)?;
    write(&a.out.join(TABLE_CSV), table.to_csv()?)?;
    write_json(&a.out.join(TABLE_JSON), &table)?;
    write_json(&a.out.join("table.timings.json"), &timings)?;
    for row in &table.rows {
        match (&row.error, row.og_pct) {
            (Some(e), _) => println!("{:<10} error: {e}", row.method),
            (None, Some(p)) => println!("{:<10} K={} OG={p:.4}%", row.method, row.k),
            (None, None) => println!("{:<10} K={} cost={:?}", row.method, row.k, row.cost_on_full_set),
        }
    }
    Ok(())
}
