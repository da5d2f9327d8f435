//! Two-stage stochastic unit commitment on a DC network.
//!
//! The day-ahead stage fixes commitments `u` and schedules `P`; each
//! scenario then regulates generation up or down, curtails renewables and
//! sheds load.

use std::f64::consts::PI;
use std::path::Path;

use pdsr_milp::{LinearExpr, MixedBinaryModel, Relation, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adn::Binding;
use crate::error::{Error, Result};
use crate::scenario::{Scenario, ScenarioSet};
use crate::tsso::{build_model, BuildMode, CompiledModel, TssoProblem};

fn default_angle() -> f64 {
    PI / 3.0
}
fn default_base() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcLine {
    pub from: usize,
    pub to: usize,
    /// Susceptance, p.u. on `base_mva`.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    /// MW per step.
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// $/MWh.
    pub cost_pg: f64,
    /// $/h while committed.
    pub cost_nl: f64,
    /// $ per start-up / shut-down.
    pub cost_on: f64,
    pub cost_off: f64,
    /// Regulation prices, $/MWh.
    pub cost_up: f64,
    pub cost_down: f64,
    /// Steps.
    pub min_up: usize,
    pub min_down: usize,
    #[serde(default)]
    pub u0: bool,
    #[serde(default)]
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcConfig {
    pub buses: usize,
    #[serde(default)]
    pub reference: usize,
    pub lines: Vec<UcLine>,
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub generators: Vec<Generator>,
    pub res: Vec<Binding>,
    pub loads: Vec<Binding>,
    /// $/MWh.
    pub curtail_penalty: f64,
    pub shed_penalty: f64,
    pub horizon: usize,
    pub dt_hours: f64,
    #[serde(default = "default_angle")]
    pub angle_max: f64,
}

impl UcConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: UcConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.buses == 0 || self.reference >= self.buses {
            return cfg(format!("reference bus {} out of range", self.reference));
        }
        if self.horizon == 0 || !(self.dt_hours > 0.0) {
            return cfg("horizon and dt_hours must be positive".into());
        }
        if !(self.base_mva > 0.0) || !(self.angle_max > 0.0) {
            return cfg("base_mva and angle_max must be positive".into());
        }
        if self.curtail_penalty < 0.0 || self.shed_penalty < 0.0 {
            return cfg("penalties must be non-negative".into());
        }
        for l in &self.lines {
            if l.from >= self.buses || l.to >= self.buses || l.from == l.to {
                return cfg(format!("line {}-{} has an invalid endpoint", l.from, l.to));
            }
            if !l.b.is_finite() || l.b <= 0.0 {
                return cfg(format!("line {}-{} needs a positive susceptance", l.from, l.to));
            }
        }
        for g in &self.generators {
            if g.bus >= self.buses {
                return cfg(format!("generator `{}` at unknown bus {}", g.name, g.bus));
            }
            if !(g.p_min >= 0.0 && g.p_max >= g.p_min) {
                return cfg(format!("generator `{}` needs 0 <= p_min <= p_max", g.name));
            }
            if g.min_up == 0 || g.min_down == 0 {
                return cfg(format!("generator `{}` needs min_up, min_down >= 1", g.name));
            }
            if g.ramp_up < 0.0 || g.ramp_down < 0.0 {
                return cfg(format!("generator `{}` has a negative ramp limit", g.name));
            }
            let costs = [g.cost_pg, g.cost_nl, g.cost_on, g.cost_off, g.cost_up, g.cost_down];
            if costs.iter().any(|c| !c.is_finite()) {
                return cfg(format!("generator `{}` has a non-finite cost", g.name));
            }
            let p0_ok = if g.u0 { g.p_min <= g.p0 && g.p0 <= g.p_max } else { g.p0 == 0.0 };
            if !p0_ok {
                return cfg(format!("generator `{}` has an initial output outside its limits", g.name));
            }
        }
        for b in self.res.iter().chain(&self.loads) {
            if b.node >= self.buses {
                return cfg(format!("source `{}` placed at unknown bus {}", b.source, b.node));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcProblem {
    config: UcConfig,
}

impl UcProblem {
    pub fn new(config: UcConfig) -> Result<Self> {
        config.validate()?;
        Ok(UcProblem { config })
    }

    pub fn config(&self) -> &UcConfig {
        &self.config
    }

    /// `N_G·T` commitments plus `N_G·T·S` regulation-direction binaries.
    pub fn binary_count(&self, s: usize) -> usize {
        let c = &self.config;
        c.generators.len() * c.horizon * (1 + s)
    }
}

/// Builds the UC model for `set` in full or fixed-first-stage mode.
pub fn build_uc_model(config: &UcConfig, set: &ScenarioSet, mode: BuildMode<'_>) -> Result<MixedBinaryModel> {
    let p = UcProblem::new(config.clone())?;
    build_model(&p, set, mode)
}

/// Ramp rows `−RD ≤ x_t − x_{t−1} ≤ RU`, with `x_{−1}` the initial output.
fn add_ramps(m: &mut MixedBinaryModel, name: &str, g: &Generator, traj: &[LinearExpr]) {
    for (t, cur) in traj.iter().enumerate() {
        let mut step = cur.clone();
        if t == 0 {
            step.add_constant(-g.p0);
        } else {
            step.add_expr(&traj[t - 1], -1.0);
        }
        m.add_expr_constraint(format!("{name}_ru[{t}]"), &step, Relation::Le, g.ramp_up);
        m.add_expr_constraint(format!("{name}_rd[{t}]"), &step, Relation::Ge, -g.ramp_down);
    }
}

impl TssoProblem for UcProblem {
    fn kind(&self) -> &'static str {
        "uc"
    }

    fn first_stage_names(&self) -> Vec<String> {
        let c = &self.config;
        let mut names = Vec::new();
        for g in &c.generators {
            names.extend((0..c.horizon).map(|t| format!("P[{},{t}]", g.name)));
        }
        for g in &c.generators {
            names.extend((0..c.horizon).map(|t| format!("u[{},{t}]", g.name)));
        }
        names
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn compile(&self, set: &ScenarioSet) -> Result<CompiledModel> {
        let c = &self.config;
        let tt = c.horizon;
        let dt = c.dt_hours;
        if set.horizon() != tt {
            return Err(Error::Config(format!(
                "scenario horizon {} differs from configured horizon {tt}",
                set.horizon()
            )));
        }
        let find = |name: &str| {
            set.source_index(name)
                .ok_or_else(|| Error::Config(format!("scenario set has no source `{name}`")))
        };
        let res_idx = c.res.iter().map(|b| find(&b.source)).collect::<Result<Vec<_>>>()?;
        let load_idx = c.loads.iter().map(|b| find(&b.source)).collect::<Result<Vec<_>>>()?;

        let mut m = MixedBinaryModel::new();
        let ng = c.generators.len();
        let p: Vec<Vec<VarId>> = c
            .generators
            .iter()
            .map(|g| (0..tt).map(|t| m.add_var(format!("P[{},{t}]", g.name), 0.0, g.p_max, 0.0)).collect())
            .collect();
        let u: Vec<Vec<VarId>> = c
            .generators
            .iter()
            .map(|g| (0..tt).map(|t| m.add_binary(format!("u[{},{t}]", g.name), 0.0)).collect())
            .collect();
        let first_stage: Vec<VarId> = p.iter().flatten().chain(u.iter().flatten()).copied().collect();

        let mut first_cost = LinearExpr::new();
        for (k, g) in c.generators.iter().enumerate() {
            let name = &g.name;
            let u_prev = |t: usize| {
                if t == 0 {
                    LinearExpr::constant(if g.u0 { 1.0 } else { 0.0 })
                } else {
                    LinearExpr::term(u[k][t - 1], 1.0)
                }
            };
            let mut v = Vec::with_capacity(tt);
            for t in 0..tt {
                first_cost.add(p[k][t], g.cost_pg * dt);
                first_cost.add(u[k][t], g.cost_nl * dt);
                m.add_constraint(format!("pmin[{name},{t}]"), [(p[k][t], 1.0), (u[k][t], -g.p_min)], Relation::Ge, 0.0);
                m.add_constraint(format!("pmax[{name},{t}]"), [(p[k][t], 1.0), (u[k][t], -g.p_max)], Relation::Le, 0.0);
                // v = u_t − u_{t−1}; integral whenever u is.
                let vt = m.add_var(format!("v[{name},{t}]"), -1.0, 1.0, 0.0);
                let mut def = LinearExpr::term(vt, 1.0);
                def.add(u[k][t], -1.0);
                def.add_expr(&u_prev(t), 1.0);
                m.add_expr_constraint(format!("onoff[{name},{t}]"), &def, Relation::Eq, 0.0);
                let sc = m.add_var(format!("SC[{name},{t}]"), 0.0, f64::INFINITY, 0.0);
                first_cost.add(sc, 1.0);
                m.add_constraint(format!("sc_on[{name},{t}]"), [(sc, 1.0), (vt, -g.cost_on)], Relation::Ge, 0.0);
                m.add_constraint(format!("sc_off[{name},{t}]"), [(sc, 1.0), (vt, g.cost_off)], Relation::Ge, 0.0);
                v.push(vt);
            }
            // Minimum up/down windows, cut off at the horizon.
            for t in 0..tt {
                let window: Vec<usize> = (t + 1..(t + 1 + g.min_up).min(tt)).collect();
                if !window.is_empty() {
                    let len = window.len() as f64;
                    let mut terms: Vec<(VarId, f64)> = window.iter().map(|&w| (u[k][w], 1.0)).collect();
                    terms.push((v[t], -len));
                    m.add_constraint(format!("min_up[{name},{t}]"), terms, Relation::Ge, 0.0);
                }
                let window: Vec<usize> = (t + 1..(t + 1 + g.min_down).min(tt)).collect();
                if !window.is_empty() {
                    let len = window.len() as f64;
                    let mut terms: Vec<(VarId, f64)> = window.iter().map(|&w| (u[k][w], 1.0)).collect();
                    terms.push((v[t], -len));
                    m.add_constraint(format!("min_down[{name},{t}]"), terms, Relation::Le, len);
                }
            }
            let traj: Vec<LinearExpr> = (0..tt).map(|t| LinearExpr::term(p[k][t], 1.0)).collect();
            add_ramps(&mut m, &format!("ramp[{name}]"), g, &traj);
        }
        m.add_objective_expr(&first_cost, 1.0);

        let mut c_reg = LinearExpr::new();
        let mut c_pen = LinearExpr::new();
        let mut scenario_costs = Vec::with_capacity(set.len());
        for (s, sc) in set.scenarios().iter().enumerate() {
            let w = set.probabilities()[s];
            let mut cost = LinearExpr::new();
            let mut gen_traj: Vec<Vec<LinearExpr>> = vec![Vec::with_capacity(tt); ng];
            for t in 0..tt {
                let mut injection: Vec<LinearExpr> = (0..c.buses).map(|_| LinearExpr::new()).collect();
                for (k, g) in c.generators.iter().enumerate() {
                    let tag = |x: &str| format!("{x}[{},{s},{t}]", g.name);
                    let up = m.add_var(tag("Pup"), 0.0, g.p_max, 0.0);
                    let dn = m.add_var(tag("Pdn"), 0.0, g.p_max, 0.0);
                    let dir = m.add_binary(tag("D"), 0.0);
                    m.add_constraint(tag("up_u"), [(up, 1.0), (u[k][t], -g.p_max)], Relation::Le, 0.0);
                    m.add_constraint(tag("dn_u"), [(dn, 1.0), (u[k][t], -g.p_max)], Relation::Le, 0.0);
                    m.add_constraint(tag("up_d"), [(up, 1.0), (dir, -g.p_max)], Relation::Le, 0.0);
                    m.add_constraint(tag("dn_d"), [(dn, 1.0), (dir, g.p_max)], Relation::Le, g.p_max);
                    let mut out = LinearExpr::term(p[k][t], 1.0);
                    out.add(up, 1.0).add(dn, -1.0);
                    let mut lo = out.clone();
                    lo.add(u[k][t], -g.p_min);
                    m.add_expr_constraint(tag("ps_min"), &lo, Relation::Ge, 0.0);
                    let mut hi = out.clone();
                    hi.add(u[k][t], -g.p_max);
                    m.add_expr_constraint(tag("ps_max"), &hi, Relation::Le, 0.0);
                    cost.add(up, g.cost_up * dt).add(dn, g.cost_down * dt);
                    c_reg.add(up, w * g.cost_up * dt).add(dn, w * g.cost_down * dt);
                    injection[g.bus].add_expr(&out, 1.0);
                    gen_traj[k].push(out);
                }
                for (b, &k) in c.res.iter().zip(&res_idx) {
                    let avail = sc.value(k, t);
                    let cur = m.add_var(format!("curt[{},{s},{t}]", b.source), 0.0, avail, 0.0);
                    injection[b.node].add_constant(avail).add(cur, -1.0);
                    cost.add(cur, c.curtail_penalty * dt);
                    c_pen.add(cur, w * c.curtail_penalty * dt);
                }
                for (b, &k) in c.loads.iter().zip(&load_idx) {
                    let demand = sc.value(k, t);
                    let shed = m.add_var(format!("shed[{},{s},{t}]", b.source), 0.0, demand, 0.0);
                    injection[b.node].add_constant(-demand).add(shed, 1.0);
                    cost.add(shed, c.shed_penalty * dt);
                    c_pen.add(shed, w * c.shed_penalty * dt);
                }
                let theta: Vec<Option<VarId>> = (0..c.buses)
                    .map(|i| {
                        (i != c.reference)
                            .then(|| m.add_var(format!("theta[{i},{s},{t}]"), -c.angle_max, c.angle_max, 0.0))
                    })
                    .collect();
                // Net injection equals the DC outflow on every bus.
                for (i, inj) in injection.iter_mut().enumerate() {
                    for l in &c.lines {
                        let sign = if l.from == i {
                            -1.0
                        } else if l.to == i {
                            1.0
                        } else {
                            continue;
                        };
                        let k = c.base_mva * l.b;
                        if let Some(a) = theta[l.from] {
                            inj.add(a, sign * k);
                        }
                        if let Some(b) = theta[l.to] {
                            inj.add(b, -sign * k);
                        }
                    }
                    m.add_expr_constraint(format!("balance[{i},{s},{t}]"), inj, Relation::Eq, 0.0);
                }
            }
            for (k, g) in c.generators.iter().enumerate() {
                add_ramps(&mut m, &format!("ramp[{},{s}]", g.name), g, &gen_traj[k]);
            }
            m.add_objective_expr(&cost, w);
            scenario_costs.push(cost);
        }
        Ok(CompiledModel {
            model: m,
            first_stage,
            components: vec![
                ("day_ahead".into(), first_cost.clone()),
                ("regulation".into(), c_reg),
                ("penalty".into(), c_pen),
            ],
            first_stage_cost: first_cost,
            scenario_costs,
        })
    }
}

/// A generated UC instance and the indices of its deliberately bad scenarios.
#[derive(Debug, Clone)]
pub struct UcDeskInstance {
    pub config: UcConfig,
    pub scenarios: ScenarioSet,
    pub bad: Vec<usize>,
}

fn demand_shape(h: f64) -> f64 {
    let morning = (-((h - 9.0) / 3.0f64).powi(2)).exp();
    let evening = (-((h - 19.0) / 3.0f64).powi(2)).exp();
    0.6 + 0.2 * morning + 0.4 * evening
}

const UC_WT_CAPACITY: f64 = 20.0;

/// A 3-bus triangle with a cheap base-load unit and a flexible peaker.
/// Bad scenarios (a tenth of the set) combine calm wind with an evening
/// demand peak that the base unit cannot cover alone.
pub fn make_uc_desk_instance(seed: u64, n: usize, horizon: usize) -> Result<UcDeskInstance> {
    if n == 0 || horizon < 2 {
        return Err(Error::Validation("UC desk instance needs scenarios and a horizon of at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 24.0 / horizon as f64;
    let hours: Vec<f64> = (0..horizon).map(|t| (t as f64 + 0.5) * dt).collect();
    let config = UcConfig {
        buses: 3,
        reference: 0,
        lines: vec![
            UcLine { from: 0, to: 1, b: 4.0 },
            UcLine { from: 1, to: 2, b: 4.0 },
            UcLine { from: 0, to: 2, b: 4.0 },
        ],
        base_mva: 100.0,
        generators: vec![
            Generator {
                name: "g1".into(),
                bus: 0,
                p_min: 20.0,
                p_max: 110.0,
                ramp_up: 60.0,
                ramp_down: 60.0,
                cost_pg: 20.0,
                cost_nl: 150.0,
                cost_on: 300.0,
                cost_off: 50.0,
                cost_up: 35.0,
                cost_down: 5.0,
                min_up: 2,
                min_down: 2,
                u0: false,
                p0: 0.0,
            },
            Generator {
                name: "g2".into(),
                bus: 1,
                p_min: 5.0,
                p_max: 60.0,
                ramp_up: 60.0,
                ramp_down: 60.0,
                cost_pg: 45.0,
                cost_nl: 80.0,
                cost_on: 150.0,
                cost_off: 30.0,
                cost_up: 70.0,
                cost_down: 5.0,
                min_up: 1,
                min_down: 1,
                u0: false,
                p0: 0.0,
            },
        ],
        res: vec![Binding {
            source: "wt".into(),
            node: 2,
        }],
        loads: vec![
            Binding {
                source: "load_a".into(),
                node: 1,
            },
            Binding {
                source: "load_b".into(),
                node: 2,
            },
        ],
        curtail_penalty: 100.0,
        shed_penalty: 1000.0,
        horizon,
        dt_hours: dt,
        angle_max: default_angle(),
    };
    config.validate()?;

    let bad_count = ((n as f64) * 0.1).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let k = rng.gen_range(0..=i);
        order.swap(i, k);
    }
    let mut bad: Vec<usize> = order[..bad_count].to_vec();
    bad.sort_unstable();
    let peak = hours
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 19.0).abs().total_cmp(&(b.1 - 19.0).abs()))
        .map(|(t, _)| t)
        .unwrap();

    let mut scenarios = Vec::with_capacity(n);
    for s in 0..n {
        let is_bad = bad.binary_search(&s).is_ok();
        let mut values = Vec::with_capacity(3 * horizon);
        let mut wind: f64 = rng.gen_range(0.1..0.9);
        for t in 0..horizon {
            wind = (wind + rng.gen_range(-0.1..0.1)).clamp(0.0, 1.0);
            let calm = if is_bad && t.abs_diff(peak) <= 1 { 0.2 } else { 1.0 };
            values.push(UC_WT_CAPACITY * wind * calm);
        }
        let level_a = rng.gen_range(0.93..1.07);
        let surge = rng.gen_range(1.25..1.4);
        for (t, &h) in hours.iter().enumerate() {
            let mut v = 45.0 * level_a * demand_shape(h) * rng.gen_range(0.95..1.05);
            if is_bad && t == peak {
                v *= surge;
            }
            values.push(v);
        }
        let level_b = rng.gen_range(0.93..1.07);
        for &h in &hours {
            values.push(35.0 * level_b * demand_shape(h) * rng.gen_range(0.95..1.05));
        }
        scenarios.push(Scenario::new(format!("s{s:03}"), values, horizon));
    }
    let set = ScenarioSet::new(
        vec!["wt".into(), "load_a".into(), "load_b".into()],
        scenarios,
        vec![1.0 / n as f64; n],
    )?;
    Ok(UcDeskInstance {
        config,
        scenarios: set,
        bad,
    })
}
