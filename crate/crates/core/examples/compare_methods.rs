//! Compare PDSR with the distribution-space baselines on a distribution
//! network with injected bad scenarios.
//!
//!     cargo run --example compare_methods -- [seed]

use pdsr::adn::{make_desk_instance_with, AdnProblem, DeskOptions};
use pdsr::evaluation::{compare_methods, CompareOptions, Method};
use pdsr::projection::build_problem_space_matrix;
use pdsr::tsso::SolveOptions;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let inst = make_desk_instance_with(&DeskOptions {
        seed,
        scenarios: 24,
        bad_fraction: 0.1,
        ..DeskOptions::default()
    })
    .unwrap();
    let set = &inst.scenarios;
    let p = AdnProblem::new(inst.config.clone()).unwrap();
    let f = build_problem_space_matrix(&p, set, 1, &SolveOptions::default()).unwrap();
    let opts = CompareOptions { k: 4, seed, ..CompareOptions::default() };
    let (table, timings) = compare_methods(&p, set, &Method::ALL, Some(&f), &opts).unwrap();

    println!("flagged worst cases: {:?}", table.flagged);
    println!("{:<10} {:>6} {:>9} {:>9}", "method", "kappa", "OG %", "tau_c s");
    for row in &table.rows {
        let tau = timings.tau_c.get(&row.method).copied().unwrap_or(0.0);
        println!(
            "{:<10} {:>6} {:>9.3} {:>9.4}",
            row.method,
            row.kappa.map_or("-".into(), |k| k.to_string()),
            row.og_pct.unwrap_or(0.0),
            tau
        );
    }
}
