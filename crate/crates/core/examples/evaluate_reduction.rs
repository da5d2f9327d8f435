//! Score one reduction: optimality gap and its bound, PDDBI, worst-case
//! coverage and the effectiveness of each representative.
//!
//!     cargo run --example evaluate_reduction

use pdsr::adn::{make_desk_instance, AdnProblem};
use pdsr::clustering::{compute_pdd, solve_clustering, ClusteringOptions, KChoice};
use pdsr::evaluation::{evaluate, EvaluationContext};
use pdsr::projection::build_problem_space_matrix;
use pdsr::tsso::SolveOptions;

fn main() {
    let inst = make_desk_instance(4, 12, 12, 6).unwrap();
    let set = &inst.scenarios;
    let p = AdnProblem::new(inst.config.clone()).unwrap();
    let opts = SolveOptions::default();
    let f = build_problem_space_matrix(&p, set, 1, &opts).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    let r = solve_clustering(&d, set.probabilities(), KChoice::Fixed(3), &ClusteringOptions::default()).unwrap();
    let ctx = EvaluationContext {
        matrix: Some(&f),
        pdd: Some(&d),
        with_se: true,
        ..EvaluationContext::default()
    };
    let rep = evaluate(&p, set, &r, &ctx, &opts).unwrap();

    println!("representatives {:?}", rep.representatives);
    println!(
        "OG {:.4} ({:.3}%), bound {:.3}, PDDBI {:.3}, kappa {}",
        rep.og_abs.unwrap(),
        rep.og_pct.unwrap(),
        rep.og_bound.unwrap(),
        rep.pddbi.unwrap(),
        rep.kappa.unwrap()
    );
    for se in &rep.se {
        println!("  drop {:<4} SE {:+.4}", set.scenario(se.representative).id, se.se_abs);
    }
    for (name, v) in &rep.mean_components {
        println!("  {name:<12} {v:.3}");
    }
}
