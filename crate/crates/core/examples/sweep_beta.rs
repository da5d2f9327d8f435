//! Trace K, SPDD and PDDBI across log-spaced β and print the sweep CSV.
//!
//!     cargo run --example sweep_beta

use pdsr::adn::{make_desk_instance, AdnProblem};
use pdsr::clustering::{compute_pdd, log_betas, sweep_beta, sweep_csv, ClusteringOptions};
use pdsr::projection::build_problem_space_matrix;
use pdsr::tsso::SolveOptions;

fn main() {
    let inst = make_desk_instance(2, 14, 12, 6).unwrap();
    let set = &inst.scenarios;
    let p = AdnProblem::new(inst.config.clone()).unwrap();
    let f = build_problem_space_matrix(&p, set, 1, &SolveOptions::default()).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    let top = d.d.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let betas = log_betas(top * 1e-3, top * set.len() as f64, 12, true);
    let rows = sweep_beta(&d, set.probabilities(), &betas, &ClusteringOptions::default()).unwrap();
    print!("{}", String::from_utf8(sweep_csv(&rows).unwrap()).unwrap());
}
