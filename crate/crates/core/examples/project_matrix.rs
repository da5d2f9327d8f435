//! Project a seeded distribution-network instance into problem space and
//! save F next to its metadata.
//!
//!     cargo run --example project_matrix -- [out-dir]

use pdsr::adn::{make_desk_instance, AdnProblem};
use pdsr::evaluation::{detect_worst_case, RhoScale, DEFAULT_WORST_CASE_BOUND};
use pdsr::projection::{build_problem_space_matrix, save_matrix};
use pdsr::tsso::SolveOptions;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/example-project".into());
    let inst = make_desk_instance(3, 10, 12, 6).unwrap();
    let p = AdnProblem::new(inst.config).unwrap();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let f = build_problem_space_matrix(&p, &inst.scenarios, workers, &SolveOptions::default()).unwrap();
    save_matrix(&f, out.as_ref()).unwrap();

    println!("F is {0}x{0}, wrote {out}", f.len());
    for i in 0..f.len() {
        let row: Vec<String> = (0..f.len()).map(|j| format!("{:8.1}", f.get(i, j))).collect();
        println!("{:>4} {}", f.meta.scenario_ids[i], row.join(""));
    }
    let w = detect_worst_case(&f, DEFAULT_WORST_CASE_BOUND, RhoScale::MedianStep).unwrap();
    println!("injected bad scenarios {:?}, flagged from column sums {:?}", inst.bad, w.flagged());
}
