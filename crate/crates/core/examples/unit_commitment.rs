//! Stochastic unit commitment end to end: project, cluster, evaluate, and
//! the same with k-means for contrast.
//!
//!     cargo run --example unit_commitment -- [seed]

use pdsr::baselines::{kmeans_reduce, DEFAULT_RESTARTS};
use pdsr::clustering::{compute_pdd, solve_clustering, ClusteringOptions, KChoice};
use pdsr::evaluation::{evaluate, solve_benchmark, EvaluationContext};
use pdsr::projection::build_problem_space_matrix;
use pdsr::tsso::{SolveOptions, TssoProblem};
use pdsr::uc::{make_uc_desk_instance, UcProblem};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let inst = make_uc_desk_instance(seed, 20, 6).unwrap();
    let set = &inst.scenarios;
    let p = UcProblem::new(inst.config.clone()).unwrap();
    let opts = SolveOptions::default();

    let f = build_problem_space_matrix(&p, set, 1, &opts).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    let bench = solve_benchmark(&p, set, &opts).unwrap().unwrap();
    let ctx = EvaluationContext {
        matrix: Some(&f),
        pdd: Some(&d),
        benchmark: Some(&bench),
        ..EvaluationContext::default()
    };
    let names = p.first_stage_names();
    let pdsr = solve_clustering(&d, set.probabilities(), KChoice::Fixed(3), &ClusteringOptions::default()).unwrap();
    let km = kmeans_reduce(set, 3, seed, DEFAULT_RESTARTS).unwrap();
    for r in [pdsr, km] {
        let rep = evaluate(&p, set, &r, &ctx, &opts).unwrap();
        println!("{:<5} OG {:.3}%  representatives {:?}", r.method, rep.og_pct.unwrap(), rep.representatives);
        let on: Vec<&str> = names
            .iter()
            .zip(&rep.decision)
            .filter(|(n, &v)| n.starts_with("u[") && v > 0.5)
            .map(|(n, _)| n.as_str())
            .collect();
        println!("      committed: {}", on.join(" "));
    }
}
