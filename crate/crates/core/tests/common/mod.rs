#![allow(dead_code)]

use pdsr::scenario::{Scenario, ScenarioSet};
use pdsr::tsso::{CompiledModel, TssoProblem};
use pdsr::Result;
use pdsr_milp::{LinearExpr, MixedBinaryModel, Relation};

pub const ORDER_COST: f64 = 1.0;
pub const SHORT_COST: f64 = 3.0;
pub const HOLD_COST: f64 = 0.5;
pub const ORDER_MAX: f64 = 10.0;

/// Order `z` before demand is known, buy shortfalls late and hold leftovers.
pub struct Newsvendor;

impl Newsvendor {
    /// Closed-form `F(z, d)`.
    pub fn cost(z: f64, d: f64) -> f64 {
        ORDER_COST * z + SHORT_COST * (d - z).max(0.0) + HOLD_COST * (z - d).max(0.0)
    }
}

impl TssoProblem for Newsvendor {
    fn kind(&self) -> &'static str {
        "newsvendor"
    }

    fn first_stage_names(&self) -> Vec<String> {
        vec!["z".into()]
    }

    fn compile(&self, set: &ScenarioSet) -> Result<CompiledModel> {
        let mut m = MixedBinaryModel::new();
        let z = m.add_var("z", 0.0, ORDER_MAX, 0.0);
        let first = LinearExpr::term(z, ORDER_COST);
        m.add_objective_expr(&first, 1.0);
        let mut costs = Vec::new();
        let mut late = LinearExpr::new();
        for (s, sc) in set.scenarios().iter().enumerate() {
            let d = sc.value(0, 0);
            let short = m.add_var(format!("short[{s}]"), 0.0, f64::INFINITY, 0.0);
            let over = m.add_var(format!("over[{s}]"), 0.0, f64::INFINITY, 0.0);
            m.add_constraint(format!("bal[{s}]"), [(z, 1.0), (short, 1.0), (over, -1.0)], Relation::Eq, d);
            let cost = LinearExpr::term(short, SHORT_COST).with(over, HOLD_COST);
            m.add_objective_expr(&cost, set.probabilities()[s]);
            late.add_expr(&cost, set.probabilities()[s]);
            costs.push(cost);
        }
        Ok(CompiledModel {
            model: m,
            first_stage: vec![z],
            first_stage_cost: first.clone(),
            scenario_costs: costs,
            components: vec![("order".into(), first), ("late".into(), late)],
        })
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::json!({ "short": SHORT_COST, "hold": HOLD_COST })
    }
}

pub fn demand_set(demands: &[f64]) -> ScenarioSet {
    let n = demands.len();
    let sc = demands
        .iter()
        .enumerate()
        .map(|(i, &d)| Scenario::new(format!("d{i}"), vec![d], 1))
        .collect();
    ScenarioSet::new(vec!["load".into()], sc, vec![1.0 / n as f64; n]).unwrap()
}
