//! Plug a new two-stage problem into the reduction pipeline. A newsvendor
//! orders stock before demand is known and pays for shortfalls afterwards.
//!
//!     cargo run --example custom_problem

use pdsr::clustering::{compute_pdd, solve_clustering, ClusteringOptions, KChoice};
use pdsr::evaluation::{evaluate, EvaluationContext};
use pdsr::projection::build_problem_space_matrix;
use pdsr::scenario::{Scenario, ScenarioSet};
use pdsr::tsso::{CompiledModel, SolveOptions, TssoProblem};
use pdsr_milp::{LinearExpr, MixedBinaryModel, Relation};

struct Newsvendor {
    unit: f64,
    late: f64,
    salvage: f64,
}

impl TssoProblem for Newsvendor {
    fn kind(&self) -> &'static str {
        "newsvendor"
    }

    fn first_stage_names(&self) -> Vec<String> {
        vec!["order".into()]
    }

    fn compile(&self, set: &ScenarioSet) -> pdsr::Result<CompiledModel> {
        let mut m = MixedBinaryModel::new();
        let z = m.add_var("order", 0.0, 100.0, 0.0);
        let first = LinearExpr::term(z, self.unit);
        m.add_objective_expr(&first, 1.0);
        let mut costs = vec![];
        for (s, sc) in set.scenarios().iter().enumerate() {
            let short = m.add_var(format!("short[{s}]"), 0.0, f64::INFINITY, 0.0);
            let left = m.add_var(format!("left[{s}]"), 0.0, f64::INFINITY, 0.0);
            m.add_constraint(format!("bal[{s}]"), [(z, 1.0), (short, 1.0), (left, -1.0)], Relation::Eq, sc.value(0, 0));
            let cost = LinearExpr::term(short, self.late).with(left, -self.salvage);
            m.add_objective_expr(&cost, set.probabilities()[s]);
            costs.push(cost);
        }
        Ok(CompiledModel {
            model: m,
            first_stage: vec![z],
            first_stage_cost: first,
            scenario_costs: costs,
            components: vec![],
        })
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::json!({ "unit": self.unit, "late": self.late, "salvage": self.salvage })
    }
}

fn main() {
    let demand = [12.0, 15.0, 18.0, 22.0, 25.0, 31.0, 40.0, 55.0];
    let scenarios = demand
        .iter()
        .enumerate()
        .map(|(i, &d)| Scenario::new(format!("d{i}"), vec![d], 1))
        .collect();
    let set = ScenarioSet::new(vec!["load".into()], scenarios, vec![1.0 / 8.0; 8]).unwrap();
    let p = Newsvendor { unit: 1.0, late: 2.5, salvage: 0.3 };
    let opts = SolveOptions::default();

    let f = build_problem_space_matrix(&p, &set, 1, &opts).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    let r = solve_clustering(&d, set.probabilities(), KChoice::Fixed(3), &ClusteringOptions::default()).unwrap();
    let ctx = EvaluationContext {
        matrix: Some(&f),
        pdd: Some(&d),
        ..EvaluationContext::default()
    };
    let rep = evaluate(&p, &set, &r, &ctx, &opts).unwrap();
    println!("representatives {:?} with weights {:?}", rep.representatives, r.weights);
    println!("order {:.2}, OG {:.3}%", rep.decision[0], rep.og_pct.unwrap());
}
