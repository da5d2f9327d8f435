mod common;

use common::{demand_set, Newsvendor};
use pdsr::clustering::{compute_pdd, solve_clustering, ClusteringOptions, KChoice, PddMatrix, ReductionResult};
use pdsr::evaluation::*;
use pdsr::projection::build_problem_space_matrix;
use pdsr::tsso::SolveOptions;
use proptest::prelude::*;

const DEMANDS: [f64; 8] = [2.0, 2.5, 3.0, 3.2, 4.0, 6.0, 6.5, 9.0];

/// Expected cost of the best order over the demand points.
fn benchmark_oracle(demands: &[f64]) -> f64 {
    let n = demands.len() as f64;
    demands
        .iter()
        .map(|&z| demands.iter().map(|&d| Newsvendor::cost(z, d)).sum::<f64>() / n)
        .fold(f64::INFINITY, f64::min)
}

/// Davies-Bouldin written out directly from cluster lists.
fn db_oracle(d: &[Vec<f64>], gamma: &[f64], clusters: &[(usize, Vec<usize>)]) -> f64 {
    let s: Vec<f64> = clusters
        .iter()
        .map(|(rep, members)| {
            let mass: f64 = members.iter().map(|&i| gamma[i]).sum();
            members.iter().map(|&i| gamma[i] * d[*rep][i]).sum::<f64>() / mass
        })
        .collect();
    let k = clusters.len();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for b in 0..k {
            if a != b {
                let sep = d[clusters[a].0][clusters[b].0].max(1e-12);
                worst = worst.max((s[a] + s[b]) / sep);
            }
        }
        total += worst;
    }
    total / k as f64
}

#[test]
fn benchmark_matches_closed_form() {
    let set = demand_set(&DEMANDS);
    let b = solve_benchmark(&Newsvendor, &set, &SolveOptions::default()).unwrap().unwrap();
    let want = benchmark_oracle(&DEMANDS);
    assert!((b.objective - want).abs() < 1e-6);
    assert!((b.verification.expected - want).abs() < 1e-6);
    for (i, &d) in DEMANDS.iter().enumerate() {
        let z = b.decision.values[0];
        assert!((b.verification.per_scenario[i] - Newsvendor::cost(z, d)).abs() < 1e-6);
    }
    let comp = b.verification.mean_components(set.probabilities());
    assert!((comp["order"] + comp["late"] - want).abs() < 1e-6);
}

#[test]
fn identity_reduction_has_no_gap() {
    let set = demand_set(&DEMANDS);
    let n = DEMANDS.len();
    let r = ReductionResult::from_assignment("id", (0..n).collect(), set.probabilities()).unwrap();
    let (gap, _, _) = optimality_gap(&Newsvendor, &set, &r, &SolveOptions::default()).unwrap();
    let gap = gap.unwrap();
    assert!(gap.og_abs.abs() < 1e-6);
    assert!(gap.og_pct.unwrap().abs() <= 2.0 * 1e-4 * 100.0);
}

#[test]
fn gap_and_bound_over_every_two_cluster_split() {
    let set = demand_set(&DEMANDS);
    let opts = SolveOptions::default();
    let g = set.probabilities();
    let bench = solve_benchmark(&Newsvendor, &set, &opts).unwrap().unwrap();
    let n = DEMANDS.len();
    for a in 0..n {
        for b in a + 1..n {
            let assignment: Vec<usize> = (0..n)
                .map(|i| if (DEMANDS[i] - DEMANDS[a]).abs() <= (DEMANDS[i] - DEMANDS[b]).abs() { a } else { b })
                .collect();
            let r = ReductionResult::from_assignment("x", assignment, g).unwrap();
            let out = solve_reduced(&Newsvendor, &set, &r, &opts).unwrap();
            let gap = gap_between(out.verification.expected, bench.verification.expected);
            let slack = 4.0 * opts.gap_tol * bench.verification.expected.abs() + 1e-6;
            assert!(gap.og_abs >= -slack, "reduction beats the benchmark: {}", gap.og_abs);
            let bound = og_upper_bound(&r, g, &out.verification, &bench.verification);
            assert!(gap.og_abs <= bound + slack, "({a},{b}): {} > {bound}", gap.og_abs);
        }
    }
}

#[test]
fn dropping_a_duplicate_representative_changes_nothing() {
    let set = demand_set(&[3.0, 3.0, 7.0, 7.0, 5.0, 5.0]);
    let g = set.probabilities();
    let opts = SolveOptions::default();
    // Scenarios 0 and 1 are identical; both represent themselves.
    let r = ReductionResult::from_assignment("dup", vec![0, 1, 2, 2, 4, 4], g).unwrap();
    let bench = solve_benchmark(&Newsvendor, &set, &opts).unwrap().unwrap();
    let out = solve_reduced(&Newsvendor, &set, &r, &opts).unwrap();
    let base = gap_between(out.verification.expected, bench.verification.expected);
    let se = scenario_effectiveness(&Newsvendor, &set, &r, &bench, base, &opts).unwrap();
    assert_eq!(se.len(), 4);
    assert_eq!(se[0].representative, 0);
    // Dropping either twin leaves the critical quantile, and so the order,
    // where it was.
    assert!(se[0].se_abs.abs() < 1e-6, "{:?}", se[0]);
    assert!(se[1].se_abs.abs() < 1e-6, "{:?}", se[1]);
    assert!(se[3].se_abs > 1e-3, "{:?}", se[3]);
}

#[test]
fn single_representative_has_no_effectiveness() {
    let set = demand_set(&DEMANDS);
    let g = set.probabilities();
    let opts = SolveOptions::default();
    let r = ReductionResult::from_assignment("one", vec![3; 8], g).unwrap();
    let bench = solve_benchmark(&Newsvendor, &set, &opts).unwrap().unwrap();
    let base = gap_between(0.0, 1.0);
    assert!(scenario_effectiveness(&Newsvendor, &set, &r, &bench, base, &opts).is_err());
}

#[test]
fn pddbi_matches_direct_formula() {
    let set = demand_set(&DEMANDS);
    let g = set.probabilities().to_vec();
    let f = build_problem_space_matrix(&Newsvendor, &set, 1, &SolveOptions::default()).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    for k in 2..=5 {
        let r = solve_clustering(&d, &g, KChoice::Fixed(k), &ClusteringOptions::default()).unwrap();
        let clusters: Vec<(usize, Vec<usize>)> = r.representatives.iter().map(|&m| (m, r.members(m))).collect();
        let want = db_oracle(&d.d, &g, &clusters);
        assert!((pddbi(&d, &g, &r).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn worst_case_flags_cost_outliers() {
    // 1, 2, 3, 4, 20, 21: steps 1 1 1 16 1, one jump after position 3.
    let w = detect_worst_case_sigma(&[3.0, 20.0, 1.0, 21.0, 2.0, 4.0], 2.0, RhoScale::MedianStep).unwrap();
    assert_eq!(w.flagged(), vec![1, 3]);
    assert_eq!(w.order, vec![2, 4, 0, 5, 1, 3]);
    assert!((w.rho[2] - 15.0).abs() < 1e-12);
    // Evenly spread costs have no outliers.
    let even: Vec<f64> = (0..10).map(|i| i as f64).collect();
    assert!(detect_worst_case_sigma(&even, 2.0, RhoScale::MedianStep).unwrap().flagged().is_empty());
}

#[test]
fn evaluate_reports_everything() {
    let set = demand_set(&DEMANDS);
    let opts = SolveOptions::default();
    let f = build_problem_space_matrix(&Newsvendor, &set, 1, &opts).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    let r = solve_clustering(&d, set.probabilities(), KChoice::Fixed(3), &ClusteringOptions::default()).unwrap();
    let ctx = EvaluationContext {
        matrix: Some(&f),
        pdd: Some(&d),
        with_se: true,
        ..EvaluationContext::default()
    };
    let rep = evaluate(&Newsvendor, &set, &r, &ctx, &opts).unwrap();
    assert_eq!(rep.k, 3);
    assert_eq!(rep.se.len(), 3);
    assert!(rep.og_abs.unwrap() >= -1e-6);
    assert!(rep.og_abs.unwrap() <= rep.og_bound.unwrap() + 1e-6);
    assert!((rep.spdd.unwrap() - r.spdd.unwrap()).abs() < 1e-9);
    assert!(rep.pddbi.is_some());
    assert!(rep.kappa.is_some());
    assert_eq!(rep.decision_names, vec!["z".to_string()]);
    assert!((rep.benchmark_cost.unwrap() - benchmark_oracle(&DEMANDS)).abs() < 1e-6);
}

#[test]
fn compare_puts_benchmark_first_and_scores_all_methods() {
    let set = demand_set(&DEMANDS);
    let opts = CompareOptions {
        k: 3,
        ..CompareOptions::default()
    };
    let (table, timings) = compare_methods(&Newsvendor, &set, &Method::ALL, None, &opts).unwrap();
    assert_eq!(table.rows[0].method, "benchmark");
    assert_eq!(table.rows.len(), 1 + Method::ALL.len());
    for m in Method::ALL {
        let row = table.row(m.name()).unwrap();
        assert!(row.error.is_none(), "{}: {:?}", m.name(), row.error);
        assert!(row.og_abs.unwrap() >= -1e-6);
        assert!(row.og_abs.unwrap() <= row.og_bound.unwrap() + 1e-6);
        assert!(timings.tau_c.contains_key(m.name()));
    }
    assert!(timings.tau_p.contains_key("pdsr"));
    assert!(!timings.tau_p.contains_key("km-e"));
    let csv = String::from_utf8(table.to_csv().unwrap()).unwrap();
    assert_eq!(csv.lines().count(), table.rows.len() + 1);
    assert!(csv.starts_with("method,K,kappa"));
}

#[test]
fn a_failing_method_becomes_an_error_row() {
    let set = demand_set(&DEMANDS);
    let opts = CompareOptions {
        k: 20,
        ..CompareOptions::default()
    };
    let (table, _) = compare_methods(&Newsvendor, &set, &[Method::KMeans], None, &opts).unwrap();
    let row = table.row("km-e").unwrap();
    assert!(row.error.is_some());
    assert!(row.og_abs.is_none());
}

fn pdd_from(values: &[f64]) -> PddMatrix {
    let n = values.len();
    let d = (0..n)
        .map(|i| (0..n).map(|j| (values[i] - values[j]).abs()).collect())
        .collect();
    PddMatrix::from_matrix(d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flags_do_not_depend_on_order(sigma in prop::collection::vec(0.0f64..100.0, 3..15), rot in 0usize..15) {
        let n = sigma.len();
        let rot = rot % n;
        let mut shuffled = sigma.clone();
        shuffled.rotate_left(rot);
        let a = detect_worst_case_sigma(&sigma, 2.0, RhoScale::MedianStep).unwrap();
        let b = detect_worst_case_sigma(&shuffled, 2.0, RhoScale::MedianStep).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.flags[(i + rot) % n], b.flags[i]);
        }
        // Flagged scenarios are exactly the top of the sorted order.
        let lowest_flag = a.flagged().iter().map(|&i| sigma[i]).fold(f64::INFINITY, f64::min);
        for i in 0..n {
            prop_assert_eq!(a.flags[i], sigma[i] >= lowest_flag);
        }
    }

    #[test]
    fn pddbi_is_non_negative(values in prop::collection::vec(0.0f64..50.0, 4..9)) {
        let d = pdd_from(&values);
        let n = values.len();
        let g = vec![1.0 / n as f64; n];
        let r = solve_clustering(&d, &g, KChoice::Fixed(2), &ClusteringOptions::default()).unwrap();
        prop_assert!(pddbi(&d, &g, &r).unwrap() >= 0.0);
    }
}
