//! The two-stage stochastic program contract and its solve modes.

use std::collections::BTreeMap;
use std::time::Duration;

use pdsr_milp::{solve_milp_with, LinearExpr, MilpOptions, MixedBinaryModel, Relation, Status, VarId};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

/// A problem compiled for one scenario set.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    pub model: MixedBinaryModel,
    /// First-stage variables, in the order of [`TssoProblem::first_stage_names`].
    pub first_stage: Vec<VarId>,
    /// `f(z)`.
    pub first_stage_cost: LinearExpr,
    /// Unweighted scenario-dependent cost of every scenario, so that
    /// `F(z, ξ_s) = first_stage_cost + scenario_costs[s]`.
    pub scenario_costs: Vec<LinearExpr>,
    /// Named cost components (probability-weighted over the set) reported
    /// by verification.
    pub components: Vec<(String, LinearExpr)>,
}

impl CompiledModel {
    /// `F(z, ξ_s)` as an expression of the model variables.
    pub fn scenario_objective(&self, s: usize) -> LinearExpr {
        let mut e = self.first_stage_cost.clone();
        e.add_expr(&self.scenario_costs[s], 1.0);
        e
    }
}

/// A two-stage stochastic program that compiles to mixed-binary form.
///
/// Implementations must give every scenario a feasible recourse for any
/// first-stage decision within the first-stage bounds.
pub trait TssoProblem: Send + Sync {
    /// Short problem kind, e.g. `"adn"`.
    fn kind(&self) -> &'static str;

    /// Names of the first-stage variables. Stable across compilations.
    fn first_stage_names(&self) -> Vec<String>;

    /// Builds the full program `F(z, set)`.
    fn compile(&self, set: &ScenarioSet) -> Result<CompiledModel>;

    /// Canonical configuration used for cache fingerprints.
    fn config_json(&self) -> serde_json::Value;
}

/// How ties between equally good first-stage optima are settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Take whatever optimum the solver returns.
    #[default]
    SolverOptimum,
    /// Among optima for the scenario, minimize the sum over the whole set.
    Lexicographic,
}

/// Maximum set size for [`TieBreak::Lexicographic`].
pub const LEXICOGRAPHIC_MAX_SCENARIOS: usize = 20;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub tie_break: TieBreak,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            gap_tol: pdsr_milp::DEFAULT_GAP_TOL,
            time_limit: None,
            tie_break: TieBreak::SolverOptimum,
        }
    }
}

impl SolveOptions {
    pub fn with_gap(gap_tol: f64) -> Self {
        SolveOptions {
            gap_tol,
            ..Self::default()
        }
    }

    fn milp(&self) -> MilpOptions {
        MilpOptions {
            gap_tol: self.gap_tol,
            time_limit: self.time_limit,
            ..MilpOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageDecision {
    pub values: Vec<f64>,
    pub objective_at_source: f64,
    pub source_scenario: Option<usize>,
    pub tie_break: TieBreak,
    /// Relative gap proved by the producing solve.
    pub mip_gap: f64,
}

/// Solves `model`, turning non-optimal outcomes into errors.
fn solve_checked(model: &MixedBinaryModel, opts: &SolveOptions, what: &str) -> Result<pdsr_milp::Solution> {
    let sol = solve_milp_with(model, &opts.milp())?;
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::GapLimit if !sol.values.is_empty() || model.num_vars() == 0 => Ok(sol),
        Status::GapLimit => Err(Error::Infeasible(format!(
            "{what}: time limit reached without a feasible point"
        ))),
        Status::Infeasible => Err(Error::Infeasible(format!(
            "{what}: model is infeasible; the problem lacks complete recourse"
        ))),
        Status::Unbounded => Err(Error::Config(format!("{what}: model is unbounded"))),
    }
}

fn extract(compiled: &CompiledModel, values: &[f64]) -> Vec<f64> {
    compiled.first_stage.iter().map(|v| values[v.index()]).collect()
}

/// `z* = argmin F(z, set)` and `F(z*, set)` from one monolithic solve.
pub fn solve_stochastic(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    opts: &SolveOptions,
) -> Result<(FirstStageDecision, f64)> {
    let compiled = problem.compile(set)?;
    let sol = solve_checked(&compiled.model, opts, "stochastic program")?;
    let z = FirstStageDecision {
        values: extract(&compiled, &sol.values),
        objective_at_source: sol.objective,
        source_scenario: None,
        tie_break: TieBreak::SolverOptimum,
        mip_gap: sol.mip_gap,
    };
    Ok((z, sol.objective))
}

/// `z*_ξ` and `F(z*_ξ, ξ)` for scenario `i` of `set`.
///
/// With [`TieBreak::Lexicographic`] a second solve picks, among decisions
/// whose cost on scenario `i` stays within the gap of the optimum, the one
/// with the smallest total cost over `set`.
pub fn solve_scenario_specific(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    i: usize,
    opts: &SolveOptions,
) -> Result<(FirstStageDecision, f64)> {
    let single = set.singleton(i);
    let compiled = problem.compile(&single)?;
    let sol = solve_checked(&compiled.model, opts, &format!("scenario {}", set.scenario(i).id))?;
    let mut z = FirstStageDecision {
        values: extract(&compiled, &sol.values),
        objective_at_source: sol.objective,
        source_scenario: Some(i),
        tie_break: TieBreak::SolverOptimum,
        mip_gap: sol.mip_gap,
    };
    if opts.tie_break == TieBreak::Lexicographic {
        if set.len() > LEXICOGRAPHIC_MAX_SCENARIOS {
            return Err(Error::Config(format!(
                "lexicographic tie-break supports at most {LEXICOGRAPHIC_MAX_SCENARIOS} scenarios, got {}",
                set.len()
            )));
        }
        let values = lexicographic(problem, set, i, sol.objective, opts)?;
        let f_ii = evaluate_with_fixed_first_stage(problem, &values, &single, opts)?;
        z.values = values;
        z.tie_break = TieBreak::Lexicographic;
        return Ok((z, f_ii));
    }
    Ok((z, sol.objective))
}

fn lexicographic(
    problem: &dyn TssoProblem,
    set: &ScenarioSet,
    i: usize,
    f_ii: f64,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let n = set.len();
    let uniform = set.reweighted(vec![1.0 / n as f64; n])?;
    let mut compiled = problem.compile(&uniform)?;
    let own = compiled.scenario_objective(i);
    let slack = 2.0 * opts.gap_tol * f_ii.abs() + 1e-7;
    compiled
        .model
        .add_expr_constraint("tie_break_own_optimum", &own, Relation::Le, f_ii + slack);
    let sol = solve_checked(&compiled.model, opts, "tie-break")?;
    Ok(extract(&compiled, &sol.values))
}

/// Pairs the first-stage variables of `compiled` with the values of `z`.
pub fn first_stage_fixings(compiled: &CompiledModel, z: &[f64]) -> Result<Vec<(VarId, f64)>> {
    if z.len() != compiled.first_stage.len() {
        return Err(Error::Shape(format!(
            "first-stage decision has {} values, problem expects {}",
            z.len(),
            compiled.first_stage.len()
        )));
    }
    Ok(compiled.first_stage.iter().copied().zip(z.iter().copied()).collect())
}

/// Which program a builder emits.
#[derive(Debug, Clone, Copy)]
pub enum BuildMode<'a> {
    Full,
    /// First stage substituted by these values.
    FixedFirstStage(&'a [f64]),
}

/// Compiles `set` in the requested mode.
pub fn build_model(problem: &dyn TssoProblem, set: &ScenarioSet, mode: BuildMode<'_>) -> Result<MixedBinaryModel> {
    match mode {
        BuildMode::Full => Ok(problem.compile(set)?.model),
        BuildMode::FixedFirstStage(z) => compile_fixed(problem, set, z),
    }
}

/// The model of `set` with the first stage replaced by the constants `z`.
pub fn compile_fixed(problem: &dyn TssoProblem, set: &ScenarioSet, z: &[f64]) -> Result<MixedBinaryModel> {
    let compiled = problem.compile(set)?;
    let fixings = first_stage_fixings(&compiled, z)?;
    let (model, _) = compiled
        .model
        .substitute(&fixings, 1e-6)
        .map_err(|e| Error::Validation(format!("first-stage decision is not admissible: {e}")))?;
    Ok(model)
}

/// `F(z, set) = f(z) + Σ γ_s min_y g(y, ξ_s)` with `z` held fixed.
pub fn evaluate_with_fixed_first_stage(
    problem: &dyn TssoProblem,
    z: &[f64],
    set: &ScenarioSet,
    opts: &SolveOptions,
) -> Result<f64> {
    let model = compile_fixed(problem, set, z)?;
    let sol = solve_checked(&model, opts, "fixed first stage")?;
    Ok(sol.objective)
}

/// Like [`evaluate_with_fixed_first_stage`] for a single scenario, also
/// returning the problem's cost components.
pub fn evaluate_with_components(
    problem: &dyn TssoProblem,
    z: &[f64],
    set: &ScenarioSet,
    opts: &SolveOptions,
) -> Result<(f64, BTreeMap<String, f64>)> {
    let compiled = problem.compile(set)?;
    let fixings = first_stage_fixings(&compiled, z)?;
    let (model, map) = compiled
        .model
        .substitute(&fixings, 1e-6)
        .map_err(|e| Error::Validation(format!("first-stage decision is not admissible: {e}")))?;
    let sol = solve_checked(&model, opts, "fixed first stage")?;
    // Rebuild a full-length point for the component breakdown.
    let mut full = vec![0.0; compiled.model.num_vars()];
    for &(v, x) in &fixings {
        full[v.index()] = x;
    }
    for (orig, reduced) in map.iter().enumerate() {
        if let Some(r) = reduced {
            full[orig] = sol.values[r.index()];
        }
    }
    let components = compiled
        .components
        .iter()
        .map(|(name, e)| (name.clone(), e.evaluate(&full)))
        .collect();
    Ok((sol.objective, components))
}
