use pdsr::adn::Binding;
use pdsr::projection::build_problem_space_matrix;
use pdsr::scenario::{Scenario, ScenarioSet};
use pdsr::tsso::{evaluate_with_fixed_first_stage, solve_stochastic, SolveOptions, TssoProblem};
use pdsr::uc::*;

fn unit(min_up: usize) -> Generator {
    Generator {
        name: "g".into(),
        bus: 0,
        p_min: 0.0,
        p_max: 100.0,
        ramp_up: 100.0,
        ramp_down: 100.0,
        cost_pg: 10.0,
        cost_nl: 1.0,
        cost_on: 0.0,
        cost_off: 0.0,
        cost_up: 50.0,
        cost_down: 5.0,
        min_up,
        min_down: 1,
        u0: false,
        p0: 0.0,
    }
}

fn one_bus(g: Generator, horizon: usize, dt: f64) -> UcConfig {
    UcConfig {
        buses: 1,
        reference: 0,
        lines: Vec::new(),
        base_mva: 100.0,
        generators: vec![g],
        res: Vec::new(),
        loads: vec![Binding {
            source: "load".into(),
            node: 0,
        }],
        curtail_penalty: 100.0,
        shed_penalty: 1000.0,
        horizon,
        dt_hours: dt,
        angle_max: 1.0,
    }
}

fn load_set(profiles: &[Vec<f64>]) -> ScenarioSet {
    let n = profiles.len();
    let sc = profiles
        .iter()
        .enumerate()
        .map(|(i, p)| Scenario::new(format!("s{i}"), p.clone(), p.len()))
        .collect();
    ScenarioSet::new(vec!["load".into()], sc, vec![1.0 / n as f64; n]).unwrap()
}

#[test]
fn flat_load_costs_energy_only() {
    let mut g = unit(1);
    g.cost_nl = 0.0;
    let (t, dt) = (4, 0.5);
    let p = UcProblem::new(one_bus(g, t, dt)).unwrap();
    let set = load_set(&[vec![5.0; t]]);
    let (z, obj) = solve_stochastic(&p, &set, &SolveOptions::default()).unwrap();
    assert!((obj - 10.0 * 5.0 * t as f64 * dt).abs() < 1e-6);
    assert!(z.values[..t].iter().all(|&x| (x - 5.0).abs() < 1e-6));
}

#[test]
fn minimum_up_time_keeps_the_unit_on() {
    // Started at t = 1, the unit must stay on through t = 1 + 3.
    let p = UcProblem::new(one_bus(unit(3), 5, 1.0)).unwrap();
    let set = load_set(&[vec![0.0, 10.0, 0.0, 0.0, 0.0]]);
    let (z, obj) = solve_stochastic(&p, &set, &SolveOptions::default()).unwrap();
    assert!((obj - (100.0 + 4.0)).abs() < 1e-6, "{obj}");
    let u: Vec<f64> = z.values[5..].iter().map(|x| x.round()).collect();
    assert_eq!(u, vec![0.0, 1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn minimum_up_window_stops_at_the_horizon() {
    let p = UcProblem::new(one_bus(unit(3), 5, 1.0)).unwrap();
    let set = load_set(&[vec![0.0, 0.0, 0.0, 10.0, 0.0]]);
    let (_, obj) = solve_stochastic(&p, &set, &SolveOptions::default()).unwrap();
    assert!((obj - (100.0 + 2.0)).abs() < 1e-6, "{obj}");
}

#[test]
fn shortfall_is_regulated_up_when_committed() {
    let mut g = unit(1);
    g.cost_nl = 0.0;
    let p = UcProblem::new(one_bus(g, 2, 1.0)).unwrap();
    let set = load_set(&[vec![5.0, 5.0]]);
    let (z, _) = solve_stochastic(&p, &set, &SolveOptions::default()).unwrap();
    // Same schedule, two more MW in the second hour: bought as regulation.
    let other = load_set(&[vec![5.0, 7.0]]);
    let f = evaluate_with_fixed_first_stage(&p, &z.values, &other, &SolveOptions::default()).unwrap();
    assert!((f - (100.0 + 2.0 * 50.0)).abs() < 1e-6, "{f}");
    // With the unit off, the only recourse is shedding.
    let off = vec![0.0; 4];
    let f = evaluate_with_fixed_first_stage(&p, &off, &other, &SolveOptions::default()).unwrap();
    assert!((f - 1000.0 * 12.0).abs() < 1e-6, "{f}");
}

#[test]
fn desk_instance_is_deterministic_and_sized() {
    let a = make_uc_desk_instance(4, 20, 6).unwrap();
    let b = make_uc_desk_instance(4, 20, 6).unwrap();
    assert_eq!(a.scenarios, b.scenarios);
    assert_eq!(a.bad, b.bad);
    assert_eq!(a.bad.len(), 2);
    assert_ne!(make_uc_desk_instance(5, 20, 6).unwrap().scenarios, a.scenarios);
    let p = UcProblem::new(a.config.clone()).unwrap();
    assert_eq!(p.binary_count(20), 2 * 6 * 21);
    let compiled = p.compile(&a.scenarios).unwrap();
    assert_eq!(compiled.model.num_binaries(), p.binary_count(20));
    assert_eq!(compiled.first_stage.len(), p.first_stage_names().len());
    assert_eq!(p.first_stage_names()[0], "P[g1,0]");
    let back = UcConfig::from_json(&a.config.to_json()).unwrap();
    assert_eq!(back, a.config);
}

#[test]
fn every_decision_is_feasible_on_every_scenario() {
    let inst = make_uc_desk_instance(2, 5, 6).unwrap();
    let p = UcProblem::new(inst.config).unwrap();
    let m = build_problem_space_matrix(&p, &inst.scenarios, 2, &SolveOptions::default()).unwrap();
    assert!(m.f.iter().flatten().all(|x| x.is_finite() && *x > 0.0));
    assert!(m.diagonal_violations().is_empty());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = one_bus(unit(1), 3, 1.0);
    c.generators[0].p_min = 200.0;
    assert!(UcConfig::from_json(&c.to_json()).is_err());
    let mut c = one_bus(unit(1), 3, 1.0);
    c.generators[0].min_up = 0;
    assert!(UcProblem::new(c).is_err());
    let mut c = one_bus(unit(1), 3, 1.0);
    c.loads[0].node = 4;
    assert!(UcProblem::new(c).is_err());
    let c = one_bus(unit(1), 3, 1.0);
    let p = UcProblem::new(c).unwrap();
    assert!(p.compile(&load_set(&[vec![1.0; 4]])).is_err());
}
