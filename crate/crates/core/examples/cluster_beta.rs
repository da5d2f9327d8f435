//! Cluster on the problem-driven distance, once with a cluster price β and
//! once with a fixed K.
//!
//!     cargo run --example cluster_beta

use pdsr::adn::{make_desk_instance, AdnProblem};
use pdsr::clustering::{compute_pdd, solve_clustering, ClusteringOptions, KChoice};
use pdsr::projection::build_problem_space_matrix;
use pdsr::tsso::SolveOptions;

fn main() {
    let inst = make_desk_instance(5, 12, 12, 6).unwrap();
    let set = &inst.scenarios;
    let p = AdnProblem::new(inst.config.clone()).unwrap();
    let f = build_problem_space_matrix(&p, set, 1, &SolveOptions::default()).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    let mean = d.d.iter().flatten().sum::<f64>() / (d.len() * d.len()) as f64;

    for choice in [KChoice::Beta(mean), KChoice::Beta(4.0 * mean), KChoice::Fixed(3)] {
        let r = solve_clustering(&d, set.probabilities(), choice, &ClusteringOptions::default()).unwrap();
        println!("{choice:?}: K = {}, SPDD = {:.3}", r.k, r.spdd.unwrap());
        for (&rep, w) in r.representatives.iter().zip(&r.weights) {
            let members: Vec<&str> = r.members(rep).iter().map(|&i| set.scenario(i).id.as_str()).collect();
            println!("  {} (weight {w:.3}) <- {}", set.scenario(rep).id, members.join(" "));
        }
    }
}
