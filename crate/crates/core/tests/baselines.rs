use pdsr::baselines::*;
use pdsr::scenario::{Scenario, ScenarioSet};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_set(n: usize, horizon: usize, seed: u64) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = vec!["load_a".to_string(), "wt_a".to_string(), "price".to_string()];
    let scenarios = (0..n)
        .map(|i| {
            let v = (0..3 * horizon).map(|_| rng.gen_range(0.0..10.0)).collect();
            Scenario::new(format!("s{i}"), v, horizon)
        })
        .collect();
    ScenarioSet::new(sources, scenarios, vec![1.0 / n as f64; n]).unwrap()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Every labelling of `n` points into at most `k` groups, scored by weighted
/// SSE around the group means.
fn exhaustive_sse(points: &[Vec<f64>], w: &[f64], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sse = 0.0;
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let mass: f64 = members.iter().map(|&i| w[i]).sum();
            if mass == 0.0 {
                continue;
            }
            let dim = points[0].len();
            let centre: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|&i| w[i] * points[i][d]).sum::<f64>() / mass)
                .collect();
            sse += members.iter().map(|&i| w[i] * sq(&points[i], &centre)).sum::<f64>();
        }
        best = best.min(sse);
        let mut p = 0;
        loop {
            if p == n {
                return best;
            }
            labels[p] += 1;
            if labels[p] < k {
                break;
            }
            labels[p] = 0;
            p += 1;
        }
    }
}

fn medoid_cost(d: &[Vec<f64>], w: &[f64], medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|i| w[i] * medoids.iter().map(|&m| d[i][m]).fold(f64::INFINITY, f64::min))
        .sum()
}

fn euclid(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|a| points.iter().map(|b| sq(a, b).sqrt()).collect())
        .collect()
}

#[test]
fn k_equals_n_keeps_every_scenario() {
    let set = random_set(6, 3, 1);
    for r in [
        kmeans_reduce(&set, 6, 4, 3).unwrap(),
        kmedoids_reduce(&set, 6, 4).unwrap(),
        hierarchical_reduce(&set, 6).unwrap(),
        worst_case_select(&set, 6).unwrap(),
    ] {
        assert_eq!(r.representatives, (0..6).collect::<Vec<_>>(), "{}", r.method);
        assert_eq!(r.assignment, (0..6).collect::<Vec<_>>());
        r.validate(set.probabilities()).unwrap();
    }
}

#[test]
fn kmeans_is_near_the_exhaustive_optimum() {
    for seed in 0..6 {
        let set = random_set(7, 2, 100 + seed);
        let (_, points) = flatten(&set);
        let w = set.probabilities();
        for k in 2..=3 {
            let best = exhaustive_sse(&points, w, k);
            let fit = kmeans(&points, w, k, seed, DEFAULT_RESTARTS);
            assert!(fit.sse <= 1.05 * best + 1e-9, "seed {seed} k {k}: {} vs {best}", fit.sse);
        }
    }
}

#[test]
fn pam_finds_good_medoids() {
    for seed in 0..6 {
        let set = random_set(8, 2, 200 + seed);
        let (_, points) = flatten(&set);
        let d = euclid(&points);
        let w = set.probabilities();
        let k = 3;
        let mut best = f64::INFINITY;
        for a in 0..8 {
            for b in a + 1..8 {
                for c in b + 1..8 {
                    best = best.min(medoid_cost(&d, w, &[a, b, c]));
                }
            }
        }
        let got = medoid_cost(&d, w, &pam(&d, w, k));
        // Swap search reaches a local optimum; on sets this small it is
        // almost always the global one.
        assert!(got <= 1.05 * best + 1e-12, "seed {seed}: {got} vs {best}");
    }
}

#[test]
fn dendrogram_heights_never_decrease() {
    for seed in 0..5 {
        let set = random_set(12, 2, 300 + seed);
        let (_, points) = flatten(&set);
        let (merges, labels) = average_linkage(&euclid(&points), 1);
        assert_eq!(merges.len(), 11);
        assert!(labels.iter().all(|&l| l == 0));
        for w in merges.windows(2) {
            assert!(w[1].height >= w[0].height - 1e-12);
        }
    }
}

#[test]
fn worst_case_ranks_a_load_spike_first() {
    let mut set_values: Vec<Scenario> = (0..6)
        .map(|i| Scenario::new(format!("s{i}"), vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5], 3))
        .collect();
    set_values[4] = Scenario::new("s4", vec![1.0, 9.0, 1.0, 0.5, 0.5, 0.5], 3);
    set_values[2] = Scenario::new("s2", vec![1.0, 1.0, 1.0, 0.5, 0.0, 0.5], 3);
    let set = ScenarioSet::new(vec!["load".into(), "pv".into()], set_values, vec![1.0 / 6.0; 6]).unwrap();
    let s = severity_scores(&set);
    let top = (0..6).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
    assert_eq!(top, 4);
    let r = worst_case_select(&set, 2).unwrap();
    assert_eq!(r.representatives, vec![2, 4]);
}

#[test]
fn same_seed_same_reduction() {
    let set = random_set(15, 4, 9);
    assert_eq!(kmeans_reduce(&set, 4, 3, 5).unwrap(), kmeans_reduce(&set, 4, 3, 5).unwrap());
    assert_eq!(kmedoids_reduce(&set, 4, 1).unwrap(), kmedoids_reduce(&set, 4, 2).unwrap());
    assert_eq!(hierarchical_reduce(&set, 4).unwrap(), hierarchical_reduce(&set, 4).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reductions_are_valid_partitions(seed in 0u64..1000, n in 2usize..12, k_frac in 0.0f64..1.0) {
        let set = random_set(n, 3, seed);
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        for r in [
            kmeans_reduce(&set, k, seed, 2).unwrap(),
            kmedoids_reduce(&set, k, seed).unwrap(),
            hierarchical_reduce(&set, k).unwrap(),
            worst_case_select(&set, k).unwrap(),
        ] {
            r.validate(set.probabilities()).unwrap();
            prop_assert!(r.k >= 1 && r.k <= k);
            for &rep in &r.representatives {
                prop_assert_eq!(r.assignment[rep], rep);
            }
        }
    }

    #[test]
    fn standardized_sources_have_unit_spread(seed in 0u64..1000) {
        let set = random_set(9, 4, seed);
        let (st, points) = flatten(&set);
        for u in 0..3 {
            let vals: Vec<f64> = points.iter().flat_map(|p| p[u * 4..(u + 1) * 4].to_vec()).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((v - 1.0).abs() < 1e-9);
        }
        prop_assert_eq!(st.horizon, 4);
    }
}
