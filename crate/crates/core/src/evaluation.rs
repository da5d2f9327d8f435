//! Ex-ante and ex-post quality indices for a reduced scenario set.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::clustering::{compute_pdd, solve_clustering, ClusteringOptions, KChoice, PddMatrix, ReductionResult};
use crate::error::{Error, Result};
use crate::projection::ProblemSpaceMatrix;
use crate::scenario::ScenarioSet;
use crate::tsso::{evaluate_with_components, solve_stochastic, FirstStageDecision, SolveOptions, TssoProblem};

/// Floor on the distance between two representatives in [`pddbi`].
pub const PDDBI_EPS: f64 = 1e-12;
/// Below this magnitude the benchmark cost is not used as a denominator.
pub const OG_PCT_MIN_DENOMINATOR: f64 = 1e-6;
/// Default outlier threshold of [`detect_worst_case`].
pub const DEFAULT_WORST_CASE_BOUND: f64 = 2.0;

/// `Σ_i γ_i · d(ζ(i), ξ_i)`, recomputed from the assignment.
pub fn spdd(d: &PddMatrix, gamma: &[f64], r: &ReductionResult) -> f64 {
    r.assignment
        .iter()
        .enumerate()
        .map(|(i, &k)| gamma[i] * d.d[k][i])
        .sum()
}

/// Davies-Bouldin index with the problem-driven distance.
pub fn pddbi(d: &PddMatrix, gamma: &[f64], r: &ReductionResult) -> Result<f64> {
    let k = r.representatives.len();
    if k < 2 {
        return Err(Error::Undefined(format!("PDDBI needs at least two clusters, got {k}")));
    }
    let spread: Vec<f64> = r
        .representatives
        .iter()
        .zip(&r.weights)
        .map(|(&m, &w)| r.members(m).iter().map(|&i| gamma[i] / w * d.d[m][i]).sum())
        .collect();
    let mut total = 0.0;
    for (a, &m) in r.representatives.iter().enumerate() {
        let worst = r
            .representatives
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(b, &n)| (spread[a] + spread[b]) / d.d[m][n].max(PDDBI_EPS))
            .fold(f64::NEG_INFINITY, f64::max);
        total += worst;
    }
    Ok(total / k as f64)
}

/// Cost of one first-stage decision on every scenario of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub decision: Vec<f64>,
    /// `F(z, ξ_i)` per scenario.
    pub per_scenario: Vec<f64>,
    /// Cost components per scenario.
    pub components: Vec<BTreeMap<String, f64>>,
    /// `F(z, ξ) = Σ γ_i F(z, ξ_i)`.
    pub expected: f64,
}

impl Verification {
    /// Probability-weighted mean of each component.
    pub fn mean_components(&self, gamma: &[f64]) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (g, c) in gamma.iter().zip(&self.components) {
            for (name, v) in c {
                *out.entry(name.clone()).or_insert(0.0) += g * v;
            }
        }
        out
    }
}

/// Evaluates `z` on each scenario of `set` separately.
pub fn verify_decision(
    problem: &dyn TssoProblem,
    z: &[f64],
    set: &ScenarioSet,
    opts: &SolveOptions,
) -> Result<Verification> {
    let rows: Vec<Result<(f64, BTreeMap<String, f64>)>> = (0..set.len())
        .into_par_iter()
        .map(|i| evaluate_with_components(problem, z, &set.singleton(i), opts))
        .collect();
    let mut per_scenario = Vec::with_capacity(set.len());
    let mut components = Vec::with_capacity(set.len());
    for r in rows {
        let (f, c) = r?;
        per_scenario.push(f);
        components.push(c);
    }
    let expected = set.probabilities().iter().zip(&per_scenario).map(|(g, f)| g * f).sum();
    Ok(Verification {
        decision: z.to_vec(),
        per_scenario,
        components,
        expected,
    })
}

/// The full stochastic program solved over the original set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub decision: FirstStageDecision,
    pub objective: f64,
    pub verification: Verification,
}

/// Solves the original program. `None` when the time limit stopped the
/// solve before the requested gap was proved.
pub fn solve_benchmark(problem: &dyn TssoProblem, set: &ScenarioSet, opts: &SolveOptions) -> Result<Option<Benchmark>> {
    let (z, objective) = solve_stochastic(problem, set, opts)?;
    if z.mip_gap > opts.gap_tol {
        return Ok(None);
    }
    let verification = verify_decision(problem, &z.values, set, opts)?;
    Ok(Some(Benchmark {
        decision: z,
        objective,
        verification,
    }))
}

/// The decision of a reduced set, verified on the original set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedOutcome {
    pub decision: FirstStageDecision,
    /// `F(z*_ζ, ζ)`.
    pub reduced_objective: f64,
    pub verification: Verification,
}

pub fn solve_reduced(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    r: &ReductionResult,
    opts: &SolveOptions,
) -> Result<ReducedOutcome> {
    let reduced = r.reduced_set(set)?;
    let (z, reduced_objective) = solve_stochastic(problem, &reduced, opts)?;
    let verification = verify_decision(problem, &z.values, set, opts)?;
    Ok(ReducedOutcome {
        decision: z,
        reduced_objective,
        verification,
    })
}

/// `OG = F(z*_ζ, ξ) − F(z*_ξ, ξ)` and its percentage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub og_abs: f64,
    /// Absent when the benchmark cost is too close to zero.
    pub og_pct: Option<f64>,
}

pub fn gap_between(reduced_expected: f64, benchmark_expected: f64) -> Gap {
    let og_abs = reduced_expected - benchmark_expected;
    let og_pct = (benchmark_expected.abs() >= OG_PCT_MIN_DENOMINATOR).then(|| 100.0 * og_abs / benchmark_expected);
    Gap { og_abs, og_pct }
}

/// Solves the reduced and the original program and compares them.
pub fn optimality_gap(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    r: &ReductionResult,
    opts: &SolveOptions,
) -> Result<(Option<Gap>, ReducedOutcome, Option<Benchmark>)> {
    let outcome = solve_reduced(problem, set, r, opts)?;
    let bench = solve_benchmark(problem, set, opts)?;
    let gap = bench
        .as_ref()
        .map(|b| gap_between(outcome.verification.expected, b.verification.expected));
    Ok((gap, outcome, bench))
}

/// The computable upper bound on OG:
/// `Σ_k Σ_{i∈C_k} γ_i (|F(z_ζ, ξ_i) − F(z_ζ, ζ_k)| + |F(z_ξ, ξ_i) − F(z_ξ, ζ_k)|)`.
pub fn og_upper_bound(r: &ReductionResult, gamma: &[f64], reduced: &Verification, bench: &Verification) -> f64 {
    r.assignment
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            gamma[i]
                * ((reduced.per_scenario[i] - reduced.per_scenario[k]).abs()
                    + (bench.per_scenario[i] - bench.per_scenario[k]).abs())
        })
        .sum()
}

/// OG increase from dropping one representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effectiveness {
    pub representative: usize,
    pub og_without_abs: f64,
    pub og_without_pct: Option<f64>,
    pub se_abs: f64,
    pub se_pct: Option<f64>,
}

/// For each representative: drop it, renormalize the remaining weights,
/// re-solve and report how much the optimality gap grows.
pub fn scenario_effectiveness(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    r: &ReductionResult,
    bench: &Benchmark,
    base: Gap,
    opts: &SolveOptions,
) -> Result<Vec<Effectiveness>> {
    if r.k < 2 {
        return Err(Error::Undefined("scenario effectiveness needs at least two representatives".into()));
    }
    let rows: Vec<Result<Effectiveness>> = (0..r.k)
        .into_par_iter()
        .map(|drop| {
            let keep: Vec<usize> = (0..r.k).filter(|&k| k != drop).collect();
            let reps: Vec<usize> = keep.iter().map(|&k| r.representatives[k]).collect();
            let mass: f64 = keep.iter().map(|&k| r.weights[k]).sum();
            let w: Vec<f64> = keep.iter().map(|&k| r.weights[k] / mass).collect();
            let reduced = set.subset(&reps, &w)?;
            let (z, _) = solve_stochastic(problem, &reduced, opts)?;
            let v = verify_decision(problem, &z.values, set, opts)?;
            let g = gap_between(v.expected, bench.verification.expected);
            Ok(Effectiveness {
                representative: r.representatives[drop],
                og_without_abs: g.og_abs,
                og_without_pct: g.og_pct,
                se_abs: g.og_abs - base.og_abs,
                se_pct: g.og_pct.zip(base.og_pct).map(|(a, b)| a - b),
            })
        })
        .collect();
    rows.into_iter().collect()
}

/// How second differences are scaled before comparison with the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RhoScale {
    /// Divided by the median first difference.
    #[default]
    MedianStep,
    /// Raw cost units.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// `σ_i = Σ_j F[j][i]`.
    pub sigma: Vec<f64>,
    /// Scenario indices sorted by ascending σ.
    pub order: Vec<usize>,
    /// Second differences of the sorted σ; `rho[k]` measures the step
    /// between sorted positions `k + 1` and `k + 2`.
    pub rho: Vec<f64>,
    pub flags: Vec<bool>,
    pub bound: f64,
    pub scale: RhoScale,
}

impl WorstCase {
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&i| self.flags[i]).collect()
    }
}

/// Flags scenarios whose total cost under all scenario-specific decisions
/// sits above an outlying jump in the sorted sequence.
pub fn detect_worst_case(f: &ProblemSpaceMatrix, bound: f64, scale: RhoScale) -> Result<WorstCase> {
    detect_worst_case_sigma(&f.column_sums(), bound, scale)
}

pub fn detect_worst_case_sigma(sigma: &[f64], bound: f64, scale: RhoScale) -> Result<WorstCase> {
    let n = sigma.len();
    if n < 3 {
        return Err(Error::Undefined(format!("worst-case detection needs at least 3 scenarios, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let steps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let raw: Vec<f64> = steps.windows(2).map(|w| w[1] - w[0]).collect();
    let divisor = match scale {
        RhoScale::Raw => 1.0,
        RhoScale::MedianStep => {
            let mut s = steps.clone();
            s.sort_by(f64::total_cmp);
            let median = if s.len() % 2 == 1 {
                s[s.len() / 2]
            } else {
                0.5 * (s[s.len() / 2 - 1] + s[s.len() / 2])
            };
            if median > 0.0 {
                median
            } else {
                steps.iter().sum::<f64>() / steps.len() as f64
            }
        }
    };
    let rho: Vec<f64> = if divisor > 0.0 {
        raw.iter().map(|x| x / divisor).collect()
    } else {
        vec![0.0; raw.len()]
    };
    let mut flags = vec![false; n];
    let mut best: Option<usize> = None;
    for (k, &x) in rho.iter().enumerate() {
        if x > bound && best.map_or(true, |b| x > rho[b]) {
            best = Some(k);
        }
    }
    if let Some(k) = best {
        // Everything at or above the value that follows the jump.
        let cut = sorted[k + 2];
        for i in 0..n {
            flags[i] = sigma[i] >= cut;
        }
    }
    Ok(WorstCase {
        sigma: sigma.to_vec(),
        order,
        rho,
        flags,
        bound,
        scale,
    })
}

/// Everything known about one reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub k: usize,
    pub representatives: Vec<String>,
    pub spdd: Option<f64>,
    pub pddbi: Option<f64>,
    pub og_abs: Option<f64>,
    pub og_pct: Option<f64>,
    pub og_bound: Option<f64>,
    /// `F(z*_ζ, ξ)`.
    pub reduced_cost_on_full_set: f64,
    pub benchmark_cost: Option<f64>,
    pub se: Vec<Effectiveness>,
    pub worst_case: Option<WorstCase>,
    pub kappa: Option<usize>,
    pub decision: Vec<f64>,
    pub decision_names: Vec<String>,
    pub verification_costs: Vec<f64>,
    pub mean_components: BTreeMap<String, f64>,
}

/// Inputs that [`evaluate`] can reuse instead of recomputing.
#[derive(Default)]
pub struct EvaluationContext<'a> {
    pub matrix: Option<&'a ProblemSpaceMatrix>,
    pub pdd: Option<&'a PddMatrix>,
    pub benchmark: Option<&'a Benchmark>,
    pub worst_case_bound: Option<f64>,
    pub rho_scale: RhoScale,
    pub with_se: bool,
}

pub fn evaluate(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    r: &ReductionResult,
    ctx: &EvaluationContext<'_>,
    opts: &SolveOptions,
) -> Result<EvaluationReport> {
    let gamma = set.probabilities();
    r.validate(gamma)?;
    let outcome = solve_reduced(problem, set, r, opts)?;
    let owned;
    let bench = match ctx.benchmark {
        Some(b) => Some(b),
        None => {
            owned = solve_benchmark(problem, set, opts)?;
            owned.as_ref()
        }
    };
    let gap = bench.map(|b| gap_between(outcome.verification.expected, b.verification.expected));
    let og_bound = bench.map(|b| og_upper_bound(r, gamma, &outcome.verification, &b.verification));
    let se = match (bench, gap) {
        (Some(b), Some(g)) if ctx.with_se && r.k >= 2 => scenario_effectiveness(problem, set, r, b, g, opts)?,
        _ => Vec::new(),
    };
    let worst_case = match ctx.matrix {
        Some(m) if m.len() >= 3 => Some(detect_worst_case(
            m,
            ctx.worst_case_bound.unwrap_or(DEFAULT_WORST_CASE_BOUND),
            ctx.rho_scale,
        )?),
        _ => None,
    };
    let kappa = worst_case.as_ref().map(|w| r.representatives.iter().filter(|&&k| w.flags[k]).count());
    let (spdd_v, pddbi_v) = match ctx.pdd {
        Some(d) => (
            Some(spdd(d, gamma, r)),
            if r.k >= 2 { Some(pddbi(d, gamma, r)?) } else { None },
        ),
        None => (None, None),
    };
    Ok(EvaluationReport {
        method: r.method.clone(),
        k: r.k,
        representatives: r.representatives.iter().map(|&i| set.scenario(i).id.clone()).collect(),
        spdd: spdd_v,
        pddbi: pddbi_v,
        og_abs: gap.map(|g| g.og_abs),
        og_pct: gap.and_then(|g| g.og_pct),
        og_bound,
        reduced_cost_on_full_set: outcome.verification.expected,
        benchmark_cost: bench.map(|b| b.verification.expected),
        se,
        worst_case,
        kappa,
        mean_components: outcome.verification.mean_components(gamma),
        decision: outcome.decision.values.clone(),
        decision_names: problem.first_stage_names(),
        verification_costs: outcome.verification.per_scenario.clone(),
    })
}

/// Reduction methods available to [`compare_methods`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "pdsr")]
    Pdsr,
    #[serde(rename = "km-e")]
    KMeans,
    #[serde(rename = "kd-e")]
    KMedoids,
    #[serde(rename = "hc")]
    Hierarchical,
    #[serde(rename = "ws")]
    WorstCase,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pdsr,
        Method::KMeans,
        Method::KMedoids,
        Method::Hierarchical,
        Method::WorstCase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pdsr => "pdsr",
            Method::KMeans => "km-e",
            Method::KMedoids => "kd-e",
            Method::Hierarchical => "hc",
            Method::WorstCase => "ws",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected pdsr, km-e, kd-e, hc or ws)")))
    }

    /// Whether the method needs the problem-space matrix.
    pub fn needs_projection(self) -> bool {
        self == Method::Pdsr
    }
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    pub mu: f64,
    pub worst_case_bound: f64,
    pub rho_scale: RhoScale,
    pub solve: SolveOptions,
    pub clustering: ClusteringOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            k: 4,
            seed: 7,
            restarts: baselines::DEFAULT_RESTARTS,
            mu: 0.0,
            worst_case_bound: DEFAULT_WORST_CASE_BOUND,
            rho_scale: RhoScale::MedianStep,
            solve: SolveOptions::default(),
            clustering: ClusteringOptions::default(),
        }
    }
}

/// One row of a method comparison. `method = "benchmark"` marks the
/// full-set solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub k: usize,
    pub representatives: Vec<String>,
    pub kappa: Option<usize>,
    pub og_abs: Option<f64>,
    pub og_pct: Option<f64>,
    pub og_bound: Option<f64>,
    /// `F(z*_ζ, ξ)`, the fallback metric when no benchmark is available.
    pub cost_on_full_set: Option<f64>,
    pub decision: Vec<f64>,
    pub mean_components: BTreeMap<String, f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub k: usize,
    pub decision_names: Vec<String>,
    pub flagged: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Wall-clock seconds per method: problem-space projection and clustering.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTimings {
    pub tau_p: BTreeMap<String, f64>,
    pub tau_c: BTreeMap<String, f64>,
    pub tau_o: BTreeMap<String, f64>,
}

impl ComparisonTable {
    pub fn row(&self, method: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut comp: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.mean_components.keys().cloned())
            .collect();
        comp.sort();
        comp.dedup();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = ["method", "K", "kappa", "og_abs", "og_pct", "og_bound", "cost_on_full_set"]
            .map(String::from)
            .to_vec();
        header.extend(self.decision_names.iter().cloned());
        header.extend(comp.iter().map(|c| format!("mean_{c}")));
        header.push("representatives".into());
        header.push("error".into());
        w.write_record(&header)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.method.clone(),
                r.k.to_string(),
                r.kappa.map(|k| k.to_string()).unwrap_or_default(),
                opt(r.og_abs),
                opt(r.og_pct),
                opt(r.og_bound),
                opt(r.cost_on_full_set),
            ];
            for i in 0..self.decision_names.len() {
                rec.push(r.decision.get(i).map(|v| v.to_string()).unwrap_or_default());
            }
            for c in &comp {
                rec.push(opt(r.mean_components.get(c).copied()));
            }
            rec.push(r.representatives.join(" "));
            rec.push(r.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// Runs each reduction method at the same K and scores it against the
/// benchmark. `matrix` is built on demand when PDSR is requested and none
/// is given.
pub fn compare_methods(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    methods: &[Method],
    matrix: Option<&ProblemSpaceMatrix>,
    opts: &CompareOptions,
) -> Result<(ComparisonTable, ComparisonTimings)> {
    let gamma = set.probabilities();
    let mut timings = ComparisonTimings::default();
    let started = Instant::now();
    let owned;
    let matrix = match matrix {
        Some(m) => Some(m),
        None if methods.contains(&Method::Pdsr) => {
            owned = crate::projection::build_problem_space_matrix(
                problem,
                set,
                rayon::current_num_threads(),
                &opts.solve,
            )?;
            Some(&owned)
        }
        None => None,
    };
    let tau_p = started.elapsed().as_secs_f64();
    let worst = match matrix {
        Some(m) if m.len() >= 3 => Some(detect_worst_case(m, opts.worst_case_bound, opts.rho_scale)?),
        _ => None,
    };
    let started = Instant::now();
    let bench = solve_benchmark(problem, set, &opts.solve)?;
    timings.tau_o.insert("benchmark".into(), started.elapsed().as_secs_f64());
    let ids = |v: &[usize]| v.iter().map(|&i| set.scenario(i).id.clone()).collect::<Vec<_>>();
    let mut rows = Vec::new();
    if let Some(b) = &bench {
        rows.push(ComparisonRow {
            method: "benchmark".into(),
            k: set.len(),
            representatives: Vec::new(),
            kappa: None,
            og_abs: Some(0.0),
            og_pct: Some(0.0),
            og_bound: Some(0.0),
            cost_on_full_set: Some(b.verification.expected),
            decision: b.decision.values.clone(),
            mean_components: b.verification.mean_components(gamma),
            error: None,
        });
    }
    for &method in methods {
        let started = Instant::now();
        let reduced = reduce_with(method, set, matrix, opts);
        let tau_c = started.elapsed().as_secs_f64();
        timings.tau_c.insert(method.name().into(), tau_c);
        if method.needs_projection() {
            timings.tau_p.insert(method.name().into(), tau_p);
        }
        let started = Instant::now();
        let row = reduced.and_then(|r| {
            let out = solve_reduced(problem, set, &r, &opts.solve)?;
            let gap = bench
                .as_ref()
                .map(|b| gap_between(out.verification.expected, b.verification.expected));
            Ok(ComparisonRow {
                method: method.name().into(),
                k: r.k,
                representatives: ids(&r.representatives),
                kappa: worst
                    .as_ref()
                    .map(|w| r.representatives.iter().filter(|&&k| w.flags[k]).count()),
                og_abs: gap.map(|g| g.og_abs),
                og_pct: gap.and_then(|g| g.og_pct),
                og_bound: bench
                    .as_ref()
                    .map(|b| og_upper_bound(&r, gamma, &out.verification, &b.verification)),
                cost_on_full_set: Some(out.verification.expected),
                decision: out.decision.values.clone(),
                mean_components: out.verification.mean_components(gamma),
                error: None,
            })
        });
        timings.tau_o.insert(method.name().into(), started.elapsed().as_secs_f64());
        rows.push(row.unwrap_or_else(|e| ComparisonRow {
            method: method.name().into(),
            k: opts.k,
            representatives: Vec::new(),
            kappa: None,
            og_abs: None,
            og_pct: None,
            og_bound: None,
            cost_on_full_set: None,
            decision: Vec::new(),
            mean_components: BTreeMap::new(),
            error: Some(e.to_string()),
        }));
    }
    let table = ComparisonTable {
        k: opts.k,
        decision_names: problem.first_stage_names(),
        flagged: worst.as_ref().map(|w| ids(&w.flagged())).unwrap_or_default(),
        rows,
    };
    Ok((table, timings))
}

/// The reduction chosen by `method` at `opts.k`.
pub fn reduce_with(
    method: Method,
    set: &ScenarioSet,
    matrix: Option<&ProblemSpaceMatrix>,
    opts: &CompareOptions,
) -> Result<ReductionResult> {
    match method {
        Method::Pdsr => {
            let m = matrix.ok_or_else(|| Error::Config("PDSR needs the problem-space matrix".into()))?;
            let d = compute_pdd(m, opts.mu, Some(set))?;
            solve_clustering(&d, set.probabilities(), KChoice::Fixed(opts.k), &opts.clustering)
        }
        Method::KMeans => baselines::kmeans_reduce(set, opts.k, opts.seed, opts.restarts),
        Method::KMedoids => baselines::kmedoids_reduce(set, opts.k, opts.seed),
        Method::Hierarchical => baselines::hierarchical_reduce(set, opts.k),
        Method::WorstCase => baselines::worst_case_select(set, opts.k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pddbi_hand_example() {
        let mut d = vec![vec![0.0; 4]; 4];
        let mut put = |i: usize, j: usize, x: f64| {
            d[i][j] = x;
            d[j][i] = x;
        };
        put(0, 1, 2.0);
        put(2, 3, 4.0);
        put(0, 2, 10.0);
        put(0, 3, 11.0);
        put(1, 2, 12.0);
        put(1, 3, 13.0);
        let d = PddMatrix::from_matrix(d).unwrap();
        let g = [0.25; 4];
        let r = ReductionResult::from_assignment("x", vec![0, 0, 2, 2], &g).unwrap();
        assert!((pddbi(&d, &g, &r).unwrap() - 0.3).abs() < 1e-12);
        assert!((spdd(&d, &g, &r) - 1.5).abs() < 1e-12);
        let one = ReductionResult::from_assignment("x", vec![0; 4], &g).unwrap();
        assert!(matches!(pddbi(&d, &g, &one), Err(Error::Undefined(_))));
    }

    #[test]
    fn worst_case_small_example() {
        let w = detect_worst_case_sigma(&[1.2, 10.0, 1.0, 1.1], 2.0, RhoScale::MedianStep).unwrap();
        assert_eq!(w.flags, vec![false, true, false, false]);
        let raw = detect_worst_case_sigma(&[1.2, 10.0, 1.0, 1.1], 2.0, RhoScale::Raw).unwrap();
        assert!((raw.rho[1] - 8.7).abs() < 1e-9);
        assert_eq!(raw.flagged(), vec![1]);
        let flat = detect_worst_case_sigma(&[3.0; 5], 2.0, RhoScale::MedianStep).unwrap();
        assert!(flat.flagged().is_empty());
        assert!(detect_worst_case_sigma(&[1.0, 2.0], 2.0, RhoScale::Raw).is_err());
    }

    #[test]
    fn gap_guards_small_denominator() {
        let g = gap_between(1.0, 0.0);
        assert_eq!(g.og_abs, 1.0);
        assert_eq!(g.og_pct, None);
        let g = gap_between(101.0, 100.0);
        assert!((g.og_pct.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert!(Method::parse("gmm").is_err());
    }
}
