//! Build a small facility-opening model, solve it with branch and bound and
//! print the CPLEX-LP text.
//!
//!     cargo run --example milp_basics

use pdsr_milp::{solve_milp_with, to_lp_string, MilpOptions, MixedBinaryModel, Relation};

fn main() {
    let demand = [4.0, 3.0, 5.0];
    let open_cost = [10.0, 7.0];
    let ship = [[1.0, 3.0, 2.0], [2.0, 1.0, 4.0]];
    let capacity = 8.0;

    let mut m = MixedBinaryModel::new();
    let open: Vec<_> = open_cost
        .iter()
        .enumerate()
        .map(|(f, &c)| m.add_binary(format!("open_{f}"), c))
        .collect();
    let mut flows = vec![];
    for f in 0..2 {
        let row: Vec<_> = (0..3)
            .map(|c| m.add_var(format!("x_{f}_{c}"), 0.0, f64::INFINITY, ship[f][c]))
            .collect();
        let mut cap: Vec<_> = row.iter().map(|&x| (x, 1.0)).collect();
        cap.push((open[f], -capacity));
        m.add_constraint(format!("cap_{f}"), cap, Relation::Le, 0.0);
        flows.push(row);
    }
    for (c, &d) in demand.iter().enumerate() {
        m.add_constraint(format!("meet_{c}"), [(flows[0][c], 1.0), (flows[1][c], 1.0)], Relation::Eq, d);
    }

    let opts = MilpOptions {
        gap_tol: 0.0,
        record_trace: true,
        ..MilpOptions::default()
    };
    let s = solve_milp_with(&m, &opts).unwrap();
    println!("status {}, objective {:.2}, {} nodes", s.status.as_str(), s.objective, s.node_count);
    for v in m.variables() {
        let x = s.values[m.find_var(&v.name).unwrap().index()];
        if x.abs() > 1e-9 {
            println!("  {:<8} {x:.2}", v.name);
        }
    }
    for p in &s.trace {
        println!("  bound {:.3} incumbent {:.3}", p.lower_bound, p.incumbent);
    }
    println!("\n{}", to_lp_string(&m).unwrap());
}
