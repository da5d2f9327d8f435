//! Best-first branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::SolveError;
use crate::lp::{LpOutcome, Relaxation};
use crate::model::MixedBinaryModel;

pub const DEFAULT_GAP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    GapLimit,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::GapLimit => "gap_limit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub node: usize,
    pub lower_bound: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    /// Objective of `values`; `+inf` when there is none.
    pub objective: f64,
    pub values: Vec<f64>,
    pub mip_gap: f64,
    pub node_count: usize,
    pub best_bound: f64,
    /// Bound and incumbent after each processed node.
    pub trace: Vec<TracePoint>,
}

impl Solution {
    fn without_point(status: Status, node_count: usize) -> Self {
        Solution {
            status,
            objective: match status {
                Status::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            values: Vec::new(),
            mip_gap: f64::INFINITY,
            node_count,
            best_bound: match status {
                Status::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            trace: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty() || (self.objective.is_finite() && self.status != Status::Infeasible)
    }
}

#[derive(Debug, Clone)]
pub struct MilpOptions {
    /// Relative gap at which the search stops.
    pub gap_tol: f64,
    /// Absolute gap at which the search stops, for objectives near zero.
    pub abs_gap_tol: f64,
    pub time_limit: Option<Duration>,
    pub integrality_tol: f64,
    /// Run a round-and-fix heuristic every this many nodes (0 disables).
    pub heuristic_every: usize,
    pub record_trace: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            gap_tol: DEFAULT_GAP_TOL,
            abs_gap_tol: 1e-6,
            time_limit: None,
            integrality_tol: 1e-6,
            heuristic_every: 20,
            record_trace: false,
        }
    }
}

impl MilpOptions {
    pub fn with_gap(gap_tol: f64) -> Self {
        MilpOptions {
            gap_tol,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), SolveError> {
        if !(self.gap_tol >= 0.0) || !self.gap_tol.is_finite() {
            return Err(SolveError::Options(format!("gap_tol must be >= 0, got {}", self.gap_tol)));
        }
        if !(self.abs_gap_tol >= 0.0) {
            return Err(SolveError::Options("abs_gap_tol must be >= 0".into()));
        }
        if !(self.integrality_tol > 0.0 && self.integrality_tol < 0.5) {
            return Err(SolveError::Options("integrality_tol must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Relative gap between an incumbent and a lower bound. Differences up to
/// `abs_tol` count as zero.
pub fn relative_gap(incumbent: f64, bound: f64, abs_tol: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    let diff = (incumbent - bound).max(0.0);
    if diff <= abs_tol {
        return 0.0;
    }
    diff / incumbent.abs().max(1e-10)
}

fn closed(opts: &MilpOptions, incumbent: f64, bound: f64) -> bool {
    relative_gap(incumbent, bound, opts.abs_gap_tol) <= opts.gap_tol
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then oldest node, wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves the continuous relaxation of `model` (binaries relaxed to [0, 1]).
pub fn solve_lp(model: &MixedBinaryModel) -> Result<Solution, SolveError> {
    let mut lp = Relaxation::new(model)?;
    Ok(match lp.solve()? {
        LpOutcome::Optimal { objective, values } => Solution {
            status: Status::Optimal,
            objective,
            values,
            mip_gap: 0.0,
            node_count: 1,
            best_bound: objective,
            trace: Vec::new(),
        },
        LpOutcome::Infeasible => Solution::without_point(Status::Infeasible, 1),
        LpOutcome::Unbounded => Solution::without_point(Status::Unbounded, 1),
    })
}

/// Branch and bound with the given relative gap and optional time limit.
pub fn solve_milp(
    model: &MixedBinaryModel,
    gap_tol: f64,
    time_limit: Option<Duration>,
) -> Result<Solution, SolveError> {
    let opts = MilpOptions {
        gap_tol,
        time_limit,
        ..MilpOptions::default()
    };
    solve_milp_with(model, &opts)
}

struct Search<'a> {
    model: &'a MixedBinaryModel,
    opts: &'a MilpOptions,
    lp: Relaxation,
    binaries: Vec<usize>,
    incumbent: f64,
    best: Vec<f64>,
}

impl Search<'_> {
    fn apply(&mut self, fixings: &[(usize, f64)]) {
        self.lp.reset_bounds();
        for &(var, value) in fixings {
            self.lp.set_bounds(var, value, value);
        }
    }

    fn fractional(&self, values: &[f64]) -> Option<usize> {
        let mut pick: Option<(usize, f64)> = None;
        for &b in &self.binaries {
            let x = values[b];
            let dist = (x - x.floor()).min(x.ceil() - x);
            if dist > self.opts.integrality_tol {
                match pick {
                    Some((_, d)) if d >= dist => {}
                    _ => pick = Some((b, dist)),
                }
            }
        }
        pick.map(|(b, _)| b)
    }

    /// Fixes every binary to `round(values)` and solves for the continuous
    /// part. Accepts the result as incumbent if it improves.
    fn try_rounding(&mut self, fixings: &[(usize, f64)], values: &[f64]) -> Result<bool, SolveError> {
        let mut fixed: Vec<(usize, f64)> = fixings.to_vec();
        let mut is_fixed = vec![false; values.len()];
        for &(v, _) in fixings {
            is_fixed[v] = true;
        }
        for &b in &self.binaries {
            if !is_fixed[b] {
                let (lo, hi) = self.lp.base_bounds(b);
                fixed.push((b, values[b].round().clamp(lo, hi)));
            }
        }
        self.apply(&fixed);
        let out = self.lp.solve()?;
        if let LpOutcome::Optimal { objective, values } = out {
            if objective < self.incumbent {
                self.incumbent = objective;
                self.best = values;
                for &(v, x) in &fixed {
                    self.best[v] = x;
                }
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn solve_milp_with(model: &MixedBinaryModel, opts: &MilpOptions) -> Result<Solution, SolveError> {
    opts.check()?;
    let started = Instant::now();
    let lp = Relaxation::new(model)?;
    let binaries = model.binary_indices();
    let mut search = Search {
        model,
        opts,
        lp,
        binaries,
        incumbent: f64::INFINITY,
        best: Vec::new(),
    };
    // Binary bounds tightened to integers; [0.3, 0.7] leaves nothing.
    let mut root_fix = Vec::new();
    for &b in &search.binaries {
        let v = model.variable(crate::VarId(b));
        let lo = (v.lower - opts.integrality_tol).ceil();
        let hi = (v.upper + opts.integrality_tol).floor();
        if lo > hi {
            return Ok(Solution::without_point(Status::Infeasible, 0));
        }
        if lo == hi {
            root_fix.push((b, lo));
        }
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        fixings: root_fix,
    });
    let mut seq = 1usize;
    let mut nodes = 0usize;
    let mut global_lb = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut timed_out = false;
    let mut pruned_min = f64::INFINITY;

    while let Some(node) = heap.pop() {
        if node.bound > global_lb {
            global_lb = node.bound;
        }
        if closed(opts, search.incumbent, node.bound) {
            heap.push(node);
            break;
        }
        if let Some(limit) = opts.time_limit {
            if started.elapsed() >= limit {
                timed_out = true;
                heap.push(node);
                break;
            }
        }
        nodes += 1;
        search.apply(&node.fixings);
        let outcome = search.lp.solve()?;
        match outcome {
            LpOutcome::Infeasible => {}
            LpOutcome::Unbounded => {
                if nodes == 1 {
                    return Ok(Solution::without_point(Status::Unbounded, nodes));
                }
                return Err(SolveError::Engine(
                    "relaxation became unbounded below the root".into(),
                ));
            }
            LpOutcome::Optimal { objective, values } => {
                let bound = objective.max(node.bound);
                if closed(opts, search.incumbent, bound) {
                    pruned_min = pruned_min.min(bound);
                } else {
                    match search.fractional(&values) {
                        None => {
                            if objective < search.incumbent {
                                // Polish: exact 0/1 and a matching continuous part.
                                let before = search.incumbent;
                                search.try_rounding(&node.fixings, &values)?;
                                if search.incumbent == before && objective < search.incumbent {
                                    search.incumbent = objective;
                                    search.best = values;
                                }
                            }
                        }
                        Some(var) => {
                            let run_heuristic = opts.heuristic_every > 0
                                && (nodes == 1 || nodes % opts.heuristic_every == 0);
                            if run_heuristic {
                                search.try_rounding(&node.fixings, &values)?;
                            }
                            for value in [0.0, 1.0] {
                                let mut fixings = node.fixings.clone();
                                fixings.push((var, value));
                                heap.push(Node {
                                    bound,
                                    seq,
                                    fixings,
                                });
                                seq += 1;
                            }
                        }
                    }
                }
            }
        }
        if opts.record_trace {
            trace.push(TracePoint {
                node: nodes,
                lower_bound: global_lb,
                incumbent: search.incumbent,
            });
        }
    }

    let open_min = heap.peek().map(|n| n.bound).unwrap_or(f64::INFINITY);
    let best_bound = open_min.min(pruned_min).min(search.incumbent);
    if !search.incumbent.is_finite() {
        let mut s = Solution::without_point(
            if timed_out {
                Status::GapLimit
            } else {
                Status::Infeasible
            },
            nodes,
        );
        s.trace = trace;
        return Ok(s);
    }
    let objective = search.model.objective_value(&search.best);
    let mip_gap = relative_gap(objective, best_bound, opts.abs_gap_tol);
    Ok(Solution {
        status: if timed_out {
            Status::GapLimit
        } else {
            Status::Optimal
        },
        objective,
        values: search.best,
        mip_gap,
        node_count: nodes,
        best_bound,
        trace,
    })
}
