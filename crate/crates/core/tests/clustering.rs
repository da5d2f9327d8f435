use pdsr::clustering::*;
use pdsr::evaluation::spdd;
use pdsr::projection::ProblemSpaceMatrix;
use pdsr::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best objective over every choice of representative set, with each other
/// scenario sent to its cheapest representative.
fn enumerate(d: &[Vec<f64>], gamma: &[f64], choice: KChoice) -> f64 {
    let n = d.len();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << n) {
        let reps: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let k_cost = match choice {
            KChoice::Fixed(k) if reps.len() != k => continue,
            KChoice::Fixed(_) => 0.0,
            KChoice::Beta(b) => b * reps.len() as f64 / n as f64,
        };
        let spread: f64 = (0..n)
            .map(|i| {
                reps.iter()
                    .map(|&r| gamma[i] * d[r][i])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        best = best.min(spread + k_cost);
    }
    best
}

fn random_pdd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let x = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..10.0) };
            d[i][j] = x;
            d[j][i] = x;
        }
    }
    d
}

fn random_gamma(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

#[test]
fn pdd_of_two_scenarios() {
    let f = ProblemSpaceMatrix::from_rows(vec![vec![1.0, 3.0], vec![4.0, 2.0]], 1e-4).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    assert_eq!(d.get(0, 1), 4.0);
    assert_eq!(d.get(1, 0), 4.0);
    assert_eq!(d.get(0, 0), 0.0);
}

#[test]
fn pdd_rejects_large_negative_and_clamps_small() {
    // Decision 1 beats decision 0 on scenario 0 by far more than the gap.
    let f = ProblemSpaceMatrix::from_rows(vec![vec![10.0, 10.0], vec![5.0, 10.0]], 1e-4).unwrap();
    assert!(matches!(compute_pdd(&f, 0.0, None), Err(Error::Inconsistent(_))));
    let f = ProblemSpaceMatrix::from_rows(vec![vec![1000.0, 1000.0], vec![999.9, 1000.0]], 1e-4).unwrap();
    let d = compute_pdd(&f, 0.0, None).unwrap();
    assert_eq!(d.get(0, 1), 0.0);
    assert_eq!(d.clamped, 1);
}

#[test]
fn mu_needs_scenarios() {
    let f = ProblemSpaceMatrix::from_rows(vec![vec![1.0, 3.0], vec![4.0, 2.0]], 1e-4).unwrap();
    assert!(compute_pdd(&f, 0.5, None).is_err());
    assert!(compute_pdd(&f, -1.0, None).is_err());
}

#[test]
fn matches_enumeration_in_both_modes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = ClusteringOptions::default();
    for case in 0..12 {
        let n = 3 + case % 5;
        let d = random_pdd(n, &mut rng);
        let g = random_gamma(n, &mut rng);
        let pdd = PddMatrix::from_matrix(d.clone()).unwrap();
        let beta = rng.gen_range(0.0..20.0);
        let r = solve_clustering(&pdd, &g, KChoice::Beta(beta), &opts).unwrap();
        let want = enumerate(&d, &g, KChoice::Beta(beta));
        assert!((r.objective.unwrap() - want).abs() < 1e-6, "case {case}: {:?} vs {want}", r.objective);
        let k = 1 + case % n;
        let r = solve_clustering(&pdd, &g, KChoice::Fixed(k), &opts).unwrap();
        assert_eq!(r.k, k);
        let want = enumerate(&d, &g, KChoice::Fixed(k));
        assert!((r.objective.unwrap() - want).abs() < 1e-6, "case {case}: K = {k}");
    }
}

#[test]
fn huge_beta_gives_one_cluster() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=6 {
        let d = random_pdd(n, &mut rng);
        let max = d.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        let g = vec![1.0 / n as f64; n];
        let pdd = PddMatrix::from_matrix(d.clone()).unwrap();
        let beta = 1.01 * n as f64 * max + 1.0;
        let r = solve_clustering(&pdd, &g, KChoice::Beta(beta), &ClusteringOptions::default()).unwrap();
        assert_eq!(r.k, 1);
        assert!((r.objective.unwrap() - enumerate(&d, &g, KChoice::Beta(beta))).abs() < 1e-6);
    }
}

#[test]
fn sweep_is_monotone_and_normalized() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 7;
    let d = random_pdd(n, &mut rng);
    let g = random_gamma(n, &mut rng);
    let pdd = PddMatrix::from_matrix(d).unwrap();
    let betas = log_betas(0.01, 1000.0, 12, true);
    let rows = sweep_beta(&pdd, &g, &betas, &ClusteringOptions::default()).unwrap();
    assert_eq!(rows.len(), betas.len());
    assert_eq!(rows[0].k, n);
    assert_eq!(rows[0].spdd, 0.0);
    assert_eq!(rows.last().unwrap().k, 1);
    for w in rows.windows(2) {
        assert!(w[1].k <= w[0].k);
        assert!(w[1].spdd >= w[0].spdd - 1e-9);
    }
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.k_norm) && (0.0..=1.0).contains(&r.spdd_norm));
        assert_eq!(r.pddbi.is_some(), r.k >= 2);
        if let Some(p) = r.pddbi_norm {
            assert!((0.0..=1.0).contains(&p));
        }
    }
    let csv = String::from_utf8(sweep_csv(&rows).unwrap()).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);
    assert!(sweep_beta(&pdd, &g, &[], &ClusteringOptions::default()).is_err());
}

#[test]
fn reduction_json_round_trip() {
    let g = [0.2, 0.3, 0.5];
    let d = PddMatrix::from_matrix(vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 5.0], vec![5.0, 5.0, 0.0]]).unwrap();
    let r = solve_clustering(&d, &g, KChoice::Fixed(2), &ClusteringOptions::default()).unwrap();
    let back = ReductionResult::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_satisfies_every_row(seed in 0u64..10_000, n in 2usize..7, beta in 0.0f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_pdd(n, &mut rng);
        let g = random_gamma(n, &mut rng);
        let pdd = PddMatrix::from_matrix(d).unwrap();
        let r = solve_clustering(&pdd, &g, KChoice::Beta(beta), &ClusteringOptions::default()).unwrap();
        r.validate(&g).unwrap();
        let cm = build_clustering_model(&pdd, &g, KChoice::Beta(beta)).unwrap();
        let x = assignment_point(&cm, &pdd, &g, &r.assignment);
        prop_assert!(cm.model.max_violation(&x) < 1e-9);
        prop_assert!((cm.model.objective_value(&x) - r.objective.unwrap()).abs() < 1e-9);
        prop_assert!((spdd(&pdd, &g, &r) - r.spdd.unwrap()).abs() < 1e-12);
        let total: f64 = r.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pdd_is_symmetric_with_zero_diagonal(rows in prop::collection::vec(prop::collection::vec(0.0f64..100.0, 5), 5)) {
        // Make the diagonal column-minimal so the matrix is consistent.
        let mut f = rows;
        for i in 0..5 {
            let min = (0..5).map(|j| f[j][i]).fold(f64::INFINITY, f64::min);
            f[i][i] = min;
        }
        let m = ProblemSpaceMatrix::from_rows(f, 1e-4).unwrap();
        let d = compute_pdd(&m, 0.0, None).unwrap();
        for i in 0..5 {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..5 {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                prop_assert!(d.get(i, j) >= 0.0);
            }
        }
    }
}
