//! Problem-driven distance and the representative-selection MILP.

use pdsr_milp::{solve_milp_with, MilpOptions, MixedBinaryModel, Relation, Status, VarId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation;
use crate::projection::ProblemSpaceMatrix;
use crate::scenario::ScenarioSet;

/// Absolute slack for negative distances, matching the solver's absolute gap.
const ABS_CLAMP: f64 = 4e-6;

/// Symmetric, non-negative scenario distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PddMatrix {
    pub d: Vec<Vec<f64>>,
    pub mu: f64,
    /// Pairwise Euclidean distances, present when `mu > 0`.
    pub norms: Option<Vec<Vec<f64>>>,
    /// Number of entries that were slightly negative and clamped to zero.
    pub clamped: usize,
}

impl PddMatrix {
    /// Wraps a hand-made distance matrix after checking it.
    pub fn from_matrix(d: Vec<Vec<f64>>) -> Result<Self> {
        let n = d.len();
        for (i, row) in d.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row[i] != 0.0 {
                return Err(Error::Validation(format!("d[{i}][{i}] = {} is not zero", row[i])));
            }
            for (j, &x) in row.iter().enumerate() {
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::Validation(format!("d[{i}][{j}] = {x} is not a finite non-negative number")));
                }
                if x != d[j][i] {
                    return Err(Error::Validation(format!("d is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(PddMatrix {
            d,
            mu: 0.0,
            norms: None,
            clamped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }
}

/// `c(ζ_i, ξ_j) = F[i][j] − F[j][j]`, the extra cost of using scenario
/// `i`'s decision on scenario `j`.
pub fn opportunity_cost(f: &ProblemSpaceMatrix, i: usize, j: usize) -> f64 {
    f.f[i][j] - f.f[j][j]
}

/// `d[i][j] = c(ξ_j, ξ_i) + c(ξ_i, ξ_j) + μ‖ξ_i − ξ_j‖₂`.
pub fn compute_pdd(f: &ProblemSpaceMatrix, mu: f64, scenarios: Option<&ScenarioSet>) -> Result<PddMatrix> {
    let n = f.len();
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!("mu must be finite and non-negative, got {mu}")));
    }
    let norms = if mu > 0.0 {
        let set = scenarios.ok_or_else(|| Error::Config("mu > 0 needs the scenario set".into()))?;
        if set.len() != n {
            return Err(Error::Shape(format!("{} scenarios for a {n}x{n} matrix", set.len())));
        }
        let s = set.scenarios();
        Some(
            (0..n)
                .map(|i| (0..n).map(|j| s[i].distance(&s[j])).collect())
                .collect::<Vec<Vec<f64>>>(),
        )
    } else {
        None
    };
    let tol = (4.0 * f.meta.gap_tol * f.max_abs()).max(ABS_CLAMP);
    let mut d = vec![vec![0.0; n]; n];
    let mut clamped = 0;
    for i in 0..n {
        for j in i + 1..n {
            let mut x = opportunity_cost(f, j, i) + opportunity_cost(f, i, j);
            if x < 0.0 {
                if x < -tol {
                    return Err(Error::Inconsistent(format!(
                        "d[{i}][{j}] = {x} is below -{tol}; a subproblem missed its gap"
                    )));
                }
                x = 0.0;
                clamped += 1;
            }
            if let Some(nm) = &norms {
                x += mu * nm[i][j];
            }
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    Ok(PddMatrix { d, mu, norms, clamped })
}

/// A reduced scenario set: representatives, the partition and its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub method: String,
    /// Representative scenario indices, ascending.
    pub representatives: Vec<usize>,
    /// `assignment[i]` is the representative scenario of scenario `i`.
    pub assignment: Vec<usize>,
    /// `ω_k`, aligned with `representatives`.
    pub weights: Vec<f64>,
    pub k: usize,
    /// Σ l_j, when a distance matrix was used.
    pub spdd: Option<f64>,
    pub objective: Option<f64>,
    pub beta: Option<f64>,
}

impl ReductionResult {
    /// Builds the result of a partition given by `assignment`.
    pub fn from_assignment(method: impl Into<String>, assignment: Vec<usize>, gamma: &[f64]) -> Result<Self> {
        let n = assignment.len();
        if gamma.len() != n {
            return Err(Error::Shape(format!("{} probabilities for {n} scenarios", gamma.len())));
        }
        let mut reps: Vec<usize> = assignment.clone();
        reps.sort_unstable();
        reps.dedup();
        for &r in &reps {
            if r >= n {
                return Err(Error::Validation(format!("representative {r} out of range")));
            }
            if assignment[r] != r {
                return Err(Error::Validation(format!("representative {r} is assigned to {}", assignment[r])));
            }
        }
        let weights = reps
            .iter()
            .map(|&r| (0..n).filter(|&i| assignment[i] == r).map(|i| gamma[i]).sum())
            .collect();
        Ok(ReductionResult {
            method: method.into(),
            k: reps.len(),
            representatives: reps,
            assignment,
            weights,
            spdd: None,
            objective: None,
            beta: None,
        })
    }

    /// Members of the cluster represented by `rep`.
    pub fn members(&self, rep: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == rep).collect()
    }

    /// Checks the partition and weight invariants.
    pub fn validate(&self, gamma: &[f64]) -> Result<()> {
        let again = ReductionResult::from_assignment(&self.method, self.assignment.clone(), gamma)?;
        if again.representatives != self.representatives || self.k != self.representatives.len() {
            return Err(Error::Validation("representatives disagree with the assignment".into()));
        }
        for (a, b) in again.weights.iter().zip(&self.weights) {
            if (a - b).abs() > 1e-9 {
                return Err(Error::Validation("weights disagree with the cluster masses".into()));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("weights sum to {total}")));
        }
        Ok(())
    }

    /// The reduced scenario set `(ζ, ω)`.
    pub fn reduced_set(&self, set: &ScenarioSet) -> Result<ScenarioSet> {
        set.subset(&self.representatives, &self.weights)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// How the number of representatives is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KChoice {
    /// Trade dispersion against `β·K/N`.
    Beta(f64),
    /// Exactly `K` representatives.
    Fixed(usize),
}

#[derive(Debug, Clone)]
pub struct ClusteringOptions {
    pub gap_tol: f64,
    pub abs_gap_tol: f64,
}

impl Default for ClusteringOptions {
    fn default() -> Self {
        ClusteringOptions {
            gap_tol: 1e-9,
            abs_gap_tol: 1e-9,
        }
    }
}

/// The clustering program with its variable handles.
pub struct ClusteringModel {
    pub model: MixedBinaryModel,
    /// `v[i][j]`: scenario `i` is represented by scenario `j`.
    pub v: Vec<Vec<VarId>>,
    pub u: Vec<VarId>,
    pub l: Vec<VarId>,
}

pub fn build_clustering_model(d: &PddMatrix, gamma: &[f64], choice: KChoice) -> Result<ClusteringModel> {
    let n = d.len();
    if n == 0 {
        return Err(Error::Shape("empty distance matrix".into()));
    }
    if gamma.len() != n {
        return Err(Error::Shape(format!("{} probabilities for {n} scenarios", gamma.len())));
    }
    let k_cost = match choice {
        KChoice::Beta(b) if b >= 0.0 && b.is_finite() => b / n as f64,
        KChoice::Beta(b) => return Err(Error::Config(format!("beta must be finite and non-negative, got {b}"))),
        KChoice::Fixed(k) if (1..=n).contains(&k) => 0.0,
        KChoice::Fixed(k) => return Err(Error::Config(format!("K = {k} is outside 1..={n}"))),
    };
    let mut m = MixedBinaryModel::new();
    let u: Vec<VarId> = (0..n).map(|j| m.add_binary(format!("u_{j}"), k_cost)).collect();
    let l: Vec<VarId> = (0..n).map(|j| m.add_var(format!("l_{j}"), 0.0, f64::INFINITY, 1.0)).collect();
    let v: Vec<Vec<VarId>> = (0..n)
        .map(|i| (0..n).map(|j| m.add_binary(format!("v_{i}_{j}"), 0.0)).collect())
        .collect();
    for j in 0..n {
        let mut terms: Vec<(VarId, f64)> = (0..n)
            .filter(|&i| i != j)
            .map(|i| (v[i][j], gamma[i] * d.d[j][i]))
            .collect();
        terms.push((l[j], -1.0));
        m.add_constraint(format!("spread_{j}"), terms, Relation::Le, 0.0);
        m.add_constraint(format!("self_{j}"), [(v[j][j], 1.0), (u[j], -1.0)], Relation::Eq, 0.0);
        for i in (0..n).filter(|&i| i != j) {
            m.add_constraint(format!("open_{i}_{j}"), [(v[i][j], 1.0), (u[j], -1.0)], Relation::Le, 0.0);
        }
    }
    for (i, row) in v.iter().enumerate() {
        m.add_constraint(format!("assign_{i}"), row.iter().map(|&x| (x, 1.0)), Relation::Eq, 1.0);
    }
    if let KChoice::Fixed(k) = choice {
        m.add_constraint("count", u.iter().map(|&x| (x, 1.0)), Relation::Eq, k as f64);
    }
    Ok(ClusteringModel { model: m, v, u, l })
}

/// Selects representatives by solving the clustering MILP.
pub fn solve_clustering(
    d: &PddMatrix,
    gamma: &[f64],
    choice: KChoice,
    opts: &ClusteringOptions,
) -> Result<ReductionResult> {
    let n = d.len();
    let cm = build_clustering_model(d, gamma, choice)?;
    let milp = MilpOptions {
        gap_tol: opts.gap_tol,
        abs_gap_tol: opts.abs_gap_tol,
        ..MilpOptions::default()
    };
    let sol = solve_milp_with(&cm.model, &milp)?;
    if !matches!(sol.status, Status::Optimal | Status::GapLimit) || sol.values.is_empty() {
        return Err(Error::Infeasible(format!("clustering MILP ended with status {}", sol.status.as_str())));
    }
    let x = &sol.values;
    let assignment: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .max_by(|&a, &b| x[cm.v[i][a].index()].total_cmp(&x[cm.v[i][b].index()]).then(b.cmp(&a)))
                .unwrap()
        })
        .collect();
    let mut r = ReductionResult::from_assignment("pdsr", assignment, gamma)?;
    let spdd = evaluation::spdd(d, gamma, &r);
    r.spdd = Some(spdd);
    r.beta = match choice {
        KChoice::Beta(b) => Some(b),
        KChoice::Fixed(_) => None,
    };
    r.objective = Some(clustering_objective(spdd, r.k, n, choice));
    Ok(r)
}

/// `Σ l_j + β·K/N`, or `Σ l_j` with a fixed K.
pub fn clustering_objective(spdd: f64, k: usize, n: usize, choice: KChoice) -> f64 {
    match choice {
        KChoice::Beta(b) => spdd + b * k as f64 / n as f64,
        KChoice::Fixed(_) => spdd,
    }
}

/// The model point encoding `assignment`, for re-checking solutions.
pub fn assignment_point(cm: &ClusteringModel, d: &PddMatrix, gamma: &[f64], assignment: &[usize]) -> Vec<f64> {
    let mut x = vec![0.0; cm.model.num_vars()];
    for (i, &j) in assignment.iter().enumerate() {
        x[cm.v[i][j].index()] = 1.0;
        x[cm.u[j].index()] = 1.0;
        if i != j {
            x[cm.l[j].index()] += gamma[i] * d.d[j][i];
        }
    }
    x
}

/// One row of a β sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub k: usize,
    pub spdd: f64,
    /// Undefined for K < 2.
    pub pddbi: Option<f64>,
    pub k_norm: f64,
    pub spdd_norm: f64,
    pub pddbi_norm: Option<f64>,
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|&v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Clusters once per `β` and reports K, SPDD and PDDBI, with min-max
/// normalized copies across the sweep.
pub fn sweep_beta(
    d: &PddMatrix,
    gamma: &[f64],
    betas: &[f64],
    opts: &ClusteringOptions,
) -> Result<Vec<SweepRow>> {
    if betas.is_empty() {
        return Err(Error::Config("beta sweep needs at least one value".into()));
    }
    let results: Vec<Result<ReductionResult>> = betas
        .par_iter()
        .map(|&b| solve_clustering(d, gamma, KChoice::Beta(b), opts))
        .collect();
    let mut rows = Vec::with_capacity(betas.len());
    for (&beta, r) in betas.iter().zip(results) {
        let r = r?;
        let pddbi = if r.k >= 2 { Some(evaluation::pddbi(d, gamma, &r)?) } else { None };
        rows.push(SweepRow {
            beta,
            k: r.k,
            spdd: r.spdd.unwrap_or(0.0),
            pddbi,
            k_norm: 0.0,
            spdd_norm: 0.0,
            pddbi_norm: None,
        });
    }
    let kn = min_max(&rows.iter().map(|r| r.k as f64).collect::<Vec<_>>());
    let sn = min_max(&rows.iter().map(|r| r.spdd).collect::<Vec<_>>());
    let defined: Vec<f64> = rows.iter().filter_map(|r| r.pddbi).collect();
    let pn = min_max(&defined);
    let mut next = pn.into_iter();
    for (i, row) in rows.iter_mut().enumerate() {
        row.k_norm = kn[i];
        row.spdd_norm = sn[i];
        if row.pddbi.is_some() {
            row.pddbi_norm = next.next();
        }
    }
    Ok(rows)
}

/// `count` log-spaced values from `lo` to `hi`, with a leading zero when
/// `with_zero` is set.
pub fn log_betas(lo: f64, hi: f64, count: usize, with_zero: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(count + 1);
    if with_zero {
        out.push(0.0);
    }
    if count == 1 {
        out.push(lo);
    } else if count > 1 {
        let (a, b) = (lo.ln(), hi.ln());
        for i in 0..count {
            out.push((a + (b - a) * i as f64 / (count - 1) as f64).exp());
        }
    }
    out
}

/// The sweep as CSV text.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["beta", "K", "SPDD", "PDDBI", "K_norm", "SPDD_norm", "PDDBI_norm"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.beta.to_string(),
            r.k.to_string(),
            r.spdd.to_string(),
            opt(r.pddbi),
            r.k_norm.to_string(),
            r.spdd_norm.to_string(),
            opt(r.pddbi_norm),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}
