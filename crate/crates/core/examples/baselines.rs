//! Distribution-space reductions on their own: k-means, k-medoids,
//! average-linkage clustering and the worst-case pick.
//!
//!     cargo run --example baselines

use pdsr::adn::make_desk_instance;
use pdsr::baselines::{hierarchical_reduce, kmeans_reduce, kmedoids_reduce, severity_scores, worst_case_select};

fn main() {
    let inst = make_desk_instance(8, 16, 12, 6).unwrap();
    let set = &inst.scenarios;
    let k = 4;
    for r in [
        kmeans_reduce(set, k, 1, 10).unwrap(),
        kmedoids_reduce(set, k, 1).unwrap(),
        hierarchical_reduce(set, k).unwrap(),
        worst_case_select(set, k).unwrap(),
    ] {
        let ids: Vec<&str> = r.representatives.iter().map(|&i| set.scenario(i).id.as_str()).collect();
        let w: Vec<String> = r.weights.iter().map(|w| format!("{w:.3}")).collect();
        println!("{:<5} {} [{}]", r.method, ids.join(" "), w.join(" "));
    }
    let s = severity_scores(set);
    let worst = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
    println!("most severe {} (injected bad: {:?})", set.scenario(worst).id, inst.bad);
}
