//! Day-ahead trading and intraday balancing of an active distribution
//! network under a linearized radial power flow.

use std::collections::BTreeSet;
use std::path::Path;

use pdsr_milp::{LinearExpr, MixedBinaryModel, Relation, VarId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Scenario, ScenarioSet};
use crate::tsso::{build_model, BuildMode, CompiledModel, TssoProblem};

fn default_buy() -> f64 {
    1.3
}
fn default_sell() -> f64 {
    0.7
}
fn default_curtail() -> f64 {
    280.0
}
fn default_shed() -> f64 {
    1000.0
}
fn default_base() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Resistance in p.u.
    pub r: f64,
    /// Reactance in p.u.
    pub x: f64,
}

/// Attaches a scenario source (MW) to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub source: String,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedLoad {
    pub node: usize,
    /// MW per period.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Storage {
    pub node: usize,
    /// Charge and discharge limit, MW.
    pub power_max: f64,
    /// Largest capacity that may be procured, MWh.
    pub capacity_max: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc0: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    /// Procurement price, $/MWh of capacity.
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdnConfig {
    pub nodes: usize,
    /// Substation node; its squared voltage is fixed to 1.
    #[serde(default)]
    pub root: usize,
    pub lines: Vec<Line>,
    /// Squared voltage bounds, p.u.
    pub v2_min: f64,
    pub v2_max: f64,
    #[serde(default = "default_base")]
    pub base_mva: f64,
    pub horizon: usize,
    pub dt_hours: f64,
    pub res: Vec<Binding>,
    pub loads: Vec<Binding>,
    #[serde(default)]
    pub fixed_loads: Vec<FixedLoad>,
    pub price_source: String,
    #[serde(default)]
    pub storage: Vec<Storage>,
    /// Trading limit with the transmission system, MW.
    pub trade_max: f64,
    #[serde(default = "default_buy")]
    pub buy_multiplier: f64,
    #[serde(default = "default_sell")]
    pub sell_multiplier: f64,
    #[serde(default = "default_curtail")]
    pub curtail_penalty: f64,
    #[serde(default = "default_shed")]
    pub shed_penalty: f64,
    /// Reactive to active load ratio.
    #[serde(default)]
    pub reactive_ratio: f64,
}

impl AdnConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: AdnConfig = serde_json::from_str(text)?;
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
        if self.nodes < 2 {
            return cfg("network needs at least two nodes".into());
        }
        if self.root >= self.nodes {
            return cfg(format!("root {} out of range", self.root));
        }
        if self.horizon == 0 || !(self.dt_hours > 0.0) {
            return cfg("horizon and dt_hours must be positive".into());
        }
        if !(self.v2_min > 0.0 && self.v2_min <= 1.0 && 1.0 <= self.v2_max) {
            return cfg("voltage bounds must satisfy 0 < v2_min <= 1 <= v2_max".into());
        }
        if !(self.base_mva > 0.0) {
            return cfg("base_mva must be positive".into());
        }
        if !(self.buy_multiplier > 1.0 && 1.0 > self.sell_multiplier && self.sell_multiplier > 0.0) {
            return cfg("price multipliers must satisfy buy > 1 > sell > 0".into());
        }
        if !(self.trade_max > 0.0) || self.curtail_penalty < 0.0 || self.shed_penalty < 0.0 {
            return cfg("trade_max must be positive and penalties non-negative".into());
        }
        if self.reactive_ratio < 0.0 {
            return cfg("reactive_ratio must be non-negative".into());
        }
        for l in &self.lines {
            if l.from >= self.nodes || l.to >= self.nodes || l.from == l.to {
                return cfg(format!("line {}-{} has an invalid endpoint", l.from, l.to));
            }
            if l.r < 0.0 || l.x < 0.0 {
                return cfg(format!("line {}-{} has negative impedance", l.from, l.to));
            }
        }
        self.tree()?;
        let node_ok = |n: usize| n < self.nodes;
        for b in self.res.iter().chain(&self.loads) {
            if !node_ok(b.node) {
                return cfg(format!("source `{}` placed at unknown node {}", b.source, b.node));
            }
        }
        for f in &self.fixed_loads {
            if !node_ok(f.node) || f.profile.len() != self.horizon {
                return cfg(format!("fixed load at node {} needs {} values", f.node, self.horizon));
            }
            if f.profile.iter().any(|&p| !(p >= 0.0)) {
                return cfg(format!("fixed load at node {} must be non-negative", f.node));
            }
        }
        for e in &self.storage {
            if !node_ok(e.node) {
                return cfg(format!("storage at unknown node {}", e.node));
            }
            if !(0.0 < e.eta_c && e.eta_c <= 1.0 && 0.0 < e.eta_d && e.eta_d <= 1.0) {
                return cfg("storage efficiencies must lie in (0, 1]".into());
            }
            if !(0.0 <= e.soc_min && e.soc_min <= e.soc0 && e.soc0 <= e.soc_max && e.soc_max <= 1.0) {
                return cfg("storage needs 0 <= soc_min <= soc0 <= soc_max <= 1".into());
            }
            if e.power_max < 0.0 || e.capacity_max < 0.0 || e.price < 0.0 {
                return cfg("storage limits and price must be non-negative".into());
            }
        }
        Ok(())
    }

    /// Parent of every node (None for the root), line index to the parent,
    /// and a root-first ordering. Fails unless the lines form a spanning tree.
    pub fn tree(&self) -> Result<Tree> {
        let n = self.nodes;
        if self.lines.len() != n - 1 {
            return Err(Error::Config(format!(
                "a radial network on {n} nodes needs {} lines, got {}",
                n - 1,
                self.lines.len()
            )));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, l) in self.lines.iter().enumerate() {
            adj[l.from].push((l.to, k));
            adj[l.to].push((l.from, k));
        }
        let mut parent = vec![None; n];
        let mut parent_line = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = vec![self.root];
        seen[self.root] = true;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, k) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    parent_line[v] = Some(k);
                    order.push(v);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Config("network is not radial: some nodes are unreachable or in a loop".into()));
        }
        Ok(Tree {
            parent,
            parent_line,
            order,
        })
    }

    /// Nodes carrying any load, where shedding is allowed.
    pub fn load_nodes(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .loads
            .iter()
            .map(|b| b.node)
            .chain(self.fixed_loads.iter().map(|f| f.node))
            .collect();
        set.into_iter().collect()
    }
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub parent: Vec<Option<usize>>,
    pub parent_line: Vec<Option<usize>>,
    pub order: Vec<usize>,
}

/// The compiled ADN problem.
#[derive(Debug, Clone)]
pub struct AdnProblem {
    config: AdnConfig,
    tree: Tree,
}

impl AdnProblem {
    pub fn new(config: AdnConfig) -> Result<Self> {
        config.validate()?;
        let tree = config.tree()?;
        Ok(AdnProblem { config, tree })
    }

    pub fn config(&self) -> &AdnConfig {
        &self.config
    }

    fn source_indices(&self, set: &ScenarioSet) -> Result<(Vec<usize>, Vec<usize>, usize)> {
        let find = |name: &str| {
            set.source_index(name)
                .ok_or_else(|| Error::Config(format!("scenario set has no source `{name}`")))
        };
        let res = self.config.res.iter().map(|b| find(&b.source)).collect::<Result<Vec<_>>>()?;
        let loads = self.config.loads.iter().map(|b| find(&b.source)).collect::<Result<Vec<_>>>()?;
        let price = find(&self.config.price_source)?;
        if set.horizon() != self.config.horizon {
            return Err(Error::Config(format!(
                "scenario horizon {} differs from configured horizon {}",
                set.horizon(),
                self.config.horizon
            )));
        }
        Ok((res, loads, price))
    }

    /// Number of binary variables for `s` scenarios.
    pub fn binary_count(&self, s: usize) -> usize {
        s * self.config.horizon * (self.config.storage.len() + 1)
    }
}

/// Builds the ADN model for `set` in full or fixed-first-stage mode.
pub fn build_adn_model(config: &AdnConfig, set: &ScenarioSet, mode: BuildMode<'_>) -> Result<MixedBinaryModel> {
    let p = AdnProblem::new(config.clone())?;
    build_model(&p, set, mode)
}

impl TssoProblem for AdnProblem {
    fn kind(&self) -> &'static str {
        "adn"
    }

    fn first_stage_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.config.horizon).map(|t| format!("PT[{t}]")).collect();
        names.extend(self.config.storage.iter().map(|e| format!("E[{}]", e.node)));
        names
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn compile(&self, set: &ScenarioSet) -> Result<CompiledModel> {
        let c = &self.config;
        let (res_idx, load_idx, price_idx) = self.source_indices(set)?;
        let tt = c.horizon;
        let dt = c.dt_hours;
        let n = c.nodes;
        let mut m = MixedBinaryModel::new();

        let pt: Vec<VarId> = (0..tt)
            .map(|t| m.add_var(format!("PT[{t}]"), -c.trade_max, c.trade_max, 0.0))
            .collect();
        let cap: Vec<VarId> = c
            .storage
            .iter()
            .map(|e| m.add_var(format!("E[{}]", e.node), 0.0, e.capacity_max, 0.0))
            .collect();
        let mut first_stage = pt.clone();
        first_stage.extend(&cap);

        let mut first_cost = LinearExpr::new();
        for (e, &v) in c.storage.iter().zip(&cap) {
            first_cost.add(v, e.price);
        }
        m.add_objective_expr(&first_cost, 1.0);

        let load_nodes = c.load_nodes();
        let res_nodes: BTreeSet<usize> = c.res.iter().map(|b| b.node).collect();
        let mut scenario_costs = Vec::with_capacity(set.len());
        let mut c_da = first_cost.clone();
        let mut c_im = LinearExpr::new();
        let mut c_pen = LinearExpr::new();
        let mut es_cap = LinearExpr::new();
        for &v in &cap {
            es_cap.add(v, 1.0);
        }

        for (s, sc) in set.scenarios().iter().enumerate() {
            let w = set.probabilities()[s];
            let mut cost = LinearExpr::new();
            let mut energy_prev: Vec<LinearExpr> = c
                .storage
                .iter()
                .zip(&cap)
                .map(|(e, &v)| LinearExpr::term(v, e.soc0))
                .collect();
            for t in 0..tt {
                let price = sc.value(price_idx, t);
                let tag = |name: &str| format!("{name}[{s},{t}]");

                // Active and reactive demand per node.
                let mut load = vec![0.0; n];
                for f in &c.fixed_loads {
                    load[f.node] += f.profile[t];
                }
                for (b, &k) in c.loads.iter().zip(&load_idx) {
                    load[b.node] += sc.value(k, t);
                }
                let mut res = vec![0.0; n];
                for (b, &k) in c.res.iter().zip(&res_idx) {
                    res[b.node] += sc.value(k, t);
                }

                // Trading.
                let up = m.add_var(tag("PTup"), 0.0, c.trade_max, 0.0);
                let down = m.add_var(tag("PTdn"), 0.0, c.trade_max, 0.0);
                let dt_bin = m.add_binary(tag("DT"), 0.0);
                m.add_constraint(tag("trade_up"), [(up, 1.0), (dt_bin, c.trade_max)], Relation::Le, c.trade_max);
                m.add_constraint(tag("trade_dn"), [(down, 1.0), (dt_bin, -c.trade_max)], Relation::Le, 0.0);
                m.add_constraint(tag("trade_hi"), [(pt[t], 1.0), (up, 1.0), (down, -1.0)], Relation::Le, c.trade_max);
                m.add_constraint(tag("trade_lo"), [(pt[t], 1.0), (up, 1.0), (down, -1.0)], Relation::Ge, -c.trade_max);
                cost.add(pt[t], price * dt);
                cost.add(up, c.buy_multiplier * price * dt);
                cost.add(down, -c.sell_multiplier * price * dt);
                c_da.add(pt[t], w * price * dt);
                c_im.add(up, w * c.buy_multiplier * price * dt);
                c_im.add(down, -w * c.sell_multiplier * price * dt);

                // Net active injection terms per node: p_j = consumption.
                let mut p_node: Vec<LinearExpr> = (0..n).map(|j| LinearExpr::constant(load[j] - res[j])).collect();
                let mut q_node: Vec<LinearExpr> =
                    (0..n).map(|j| LinearExpr::constant(c.reactive_ratio * load[j])).collect();

                for &j in &res_nodes {
                    let cur = m.add_var(format!("curt[{j},{s},{t}]"), 0.0, res[j], 0.0);
                    p_node[j].add(cur, 1.0);
                    cost.add(cur, c.curtail_penalty * dt);
                    c_pen.add(cur, w * c.curtail_penalty * dt);
                }
                for &j in &load_nodes {
                    let shed = m.add_var(format!("shed[{j},{s},{t}]"), 0.0, load[j], 0.0);
                    p_node[j].add(shed, -1.0);
                    q_node[j].add(shed, -c.reactive_ratio);
                    cost.add(shed, c.shed_penalty * dt);
                    c_pen.add(shed, w * c.shed_penalty * dt);
                }
                for (k, e) in c.storage.iter().enumerate() {
                    let j = e.node;
                    let ch = m.add_var(format!("Pc[{j},{s},{t}]"), 0.0, e.power_max, 0.0);
                    let dis = m.add_var(format!("Pd[{j},{s},{t}]"), 0.0, e.power_max, 0.0);
                    let state = m.add_binary(format!("DE[{j},{s},{t}]"), 0.0);
                    m.add_constraint(
                        format!("es_ch[{j},{s},{t}]"),
                        [(ch, 1.0), (state, e.power_max)],
                        Relation::Le,
                        e.power_max,
                    );
                    m.add_constraint(
                        format!("es_dis[{j},{s},{t}]"),
                        [(dis, 1.0), (state, -e.power_max)],
                        Relation::Le,
                        0.0,
                    );
                    // Stored energy in MWh; its bounds scale with the procured capacity.
                    let en = m.add_var(format!("en[{j},{s},{t}]"), 0.0, e.capacity_max * e.soc_max, 0.0);
                    let mut dyn_ = LinearExpr::term(en, 1.0);
                    dyn_.add_expr(&energy_prev[k], -1.0);
                    dyn_.add(ch, -dt * e.eta_c);
                    dyn_.add(dis, dt / e.eta_d);
                    m.add_expr_constraint(format!("es_soc[{j},{s},{t}]"), &dyn_, Relation::Eq, 0.0);
                    m.add_constraint(format!("es_min[{j},{s},{t}]"), [(en, 1.0), (cap[k], -e.soc_min)], Relation::Ge, 0.0);
                    m.add_constraint(format!("es_max[{j},{s},{t}]"), [(en, 1.0), (cap[k], -e.soc_max)], Relation::Le, 0.0);
                    if t + 1 == tt {
                        m.add_constraint(format!("es_end[{j},{s}]"), [(en, 1.0), (cap[k], -e.soc0)], Relation::Eq, 0.0);
                    }
                    energy_prev[k] = LinearExpr::term(en, 1.0);
                    p_node[j].add(ch, 1.0);
                    p_node[j].add(dis, -1.0);
                }

                // LinDistFlow on the tree.
                let mut pf = vec![None; n];
                let mut qf = vec![None; n];
                let mut volt: Vec<Option<VarId>> = vec![None; n];
                for &j in &self.tree.order {
                    if j == c.root {
                        continue;
                    }
                    pf[j] = Some(m.add_var(format!("P[{j},{s},{t}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0));
                    qf[j] = Some(m.add_var(format!("Q[{j},{s},{t}]"), f64::NEG_INFINITY, f64::INFINITY, 0.0));
                    volt[j] = Some(m.add_var(format!("V[{j},{s},{t}]"), c.v2_min, c.v2_max, 0.0));
                }
                let qgrid = m.add_var(tag("Qgrid"), f64::NEG_INFINITY, f64::INFINITY, 0.0);
                for &j in &self.tree.order {
                    // inflow - outflow = consumption
                    let mut pb = LinearExpr::new();
                    let mut qb = LinearExpr::new();
                    if j == c.root {
                        pb.add(pt[t], 1.0).add(up, 1.0).add(down, -1.0);
                        qb.add(qgrid, 1.0);
                    } else {
                        pb.add(pf[j].unwrap(), 1.0);
                        qb.add(qf[j].unwrap(), 1.0);
                    }
                    for child in 0..n {
                        if self.tree.parent[child] == Some(j) {
                            pb.add(pf[child].unwrap(), -1.0);
                            qb.add(qf[child].unwrap(), -1.0);
                        }
                    }
                    pb.add_expr(&p_node[j], -1.0);
                    qb.add_expr(&q_node[j], -1.0);
                    m.add_expr_constraint(format!("bal_p[{j},{s},{t}]"), &pb, Relation::Eq, 0.0);
                    m.add_expr_constraint(format!("bal_q[{j},{s},{t}]"), &qb, Relation::Eq, 0.0);
                    if j != c.root {
                        let i = self.tree.parent[j].unwrap();
                        let line = &c.lines[self.tree.parent_line[j].unwrap()];
                        let mut vd = LinearExpr::term(volt[j].unwrap(), 1.0);
                        match volt[i] {
                            Some(vi) => {
                                vd.add(vi, -1.0);
                            }
                            None => {
                                vd.add_constant(-1.0);
                            }
                        }
                        vd.add(pf[j].unwrap(), 2.0 * line.r / c.base_mva);
                        vd.add(qf[j].unwrap(), 2.0 * line.x / c.base_mva);
                        m.add_expr_constraint(format!("volt[{j},{s},{t}]"), &vd, Relation::Eq, 0.0);
                    }
                }
            }
            m.add_objective_expr(&cost, w);
            scenario_costs.push(cost);
        }
        Ok(CompiledModel {
            model: m,
            first_stage,
            first_stage_cost: first_cost,
            scenario_costs,
            components: vec![
                ("day_ahead".into(), c_da),
                ("balancing".into(), c_im),
                ("penalty".into(), c_pen),
                ("es_capacity".into(), es_cap),
            ],
        })
    }
}

/// A generated ADN instance and the indices of its deliberately bad scenarios.
#[derive(Debug, Clone)]
pub struct DeskInstance {
    pub config: AdnConfig,
    pub scenarios: ScenarioSet,
    pub bad: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DeskOptions {
    pub seed: u64,
    pub scenarios: usize,
    pub horizon: usize,
    pub buses: usize,
    pub bad_fraction: f64,
}

impl Default for DeskOptions {
    fn default() -> Self {
        DeskOptions {
            seed: 7,
            scenarios: 8,
            horizon: 12,
            buses: 6,
            bad_fraction: 0.25,
        }
    }
}

const WT_CAPACITY: f64 = 0.06;
const PV_CAPACITY: f64 = 0.05;

/// `make_desk_instance_with` with a quarter of the scenarios bad.
pub fn make_desk_instance(seed: u64, n: usize, horizon: usize, buses: usize) -> Result<DeskInstance> {
    make_desk_instance_with(&DeskOptions {
        seed,
        scenarios: n,
        horizon,
        buses,
        ..DeskOptions::default()
    })
}

/// Daily shape in [0, 1] peaking in the evening.
fn load_shape(h: f64) -> f64 {
    let morning = (-((h - 8.5) / 2.5f64).powi(2)).exp();
    let evening = (-((h - 19.0) / 3.0f64).powi(2)).exp();
    0.55 + 0.25 * morning + 0.45 * evening
}

/// A small radial feeder with one WT, one PV, two stochastic loads, one
/// storage unit and a day-ahead price. Bad scenarios carry a short load
/// surge at the evening peak at the far end of the feeder, which drives the
/// voltage there below its limit unless storage was procured.
pub fn make_desk_instance_with(opts: &DeskOptions) -> Result<DeskInstance> {
    if opts.buses < 3 {
        return Err(Error::Validation("desk instance needs at least 3 buses".into()));
    }
    if opts.horizon < 2 {
        return Err(Error::Validation("desk instance needs a horizon of at least 2".into()));
    }
    if opts.scenarios == 0 {
        return Err(Error::Validation("desk instance needs at least one scenario".into()));
    }
    if !(0.0..=1.0).contains(&opts.bad_fraction) {
        return Err(Error::Validation("bad_fraction must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let b = opts.buses;
    let tt = opts.horizon;
    let dt = 24.0 / tt as f64;
    let hours: Vec<f64> = (0..tt).map(|t| (t as f64 + 0.5) * dt).collect();

    let mut lines = Vec::with_capacity(b - 1);
    let mut depth = vec![0usize; b];
    for k in 1..b {
        let parent = rng.gen_range(k.saturating_sub(2)..k);
        depth[k] = depth[parent] + 1;
        lines.push(Line {
            from: parent,
            to: k,
            r: rng.gen_range(0.02..0.035),
            x: rng.gen_range(0.015..0.03),
        });
    }
    // The deepest node (last on ties) hosts the surging load and the storage.
    let far = (1..b).max_by_key(|&k| (depth[k], k)).unwrap();
    let other = (1..b).filter(|&k| k != far).max_by_key(|&k| (depth[k], k)).unwrap_or(far);
    let wt_node = rng.gen_range(1..b);
    let pv_node = rng.gen_range(1..b);

    let fixed_loads: Vec<FixedLoad> = (1..b)
        .filter(|&k| k != far && k != other)
        .map(|k| {
            let base = rng.gen_range(0.05..0.12);
            FixedLoad {
                node: k,
                profile: hours.iter().map(|&h| base * load_shape(h)).collect(),
            }
        })
        .collect();

    let config = AdnConfig {
        nodes: b,
        root: 0,
        lines,
        v2_min: 0.81,
        v2_max: 1.21,
        base_mva: 1.0,
        horizon: tt,
        dt_hours: dt,
        res: vec![
            Binding {
                source: "wt".into(),
                node: wt_node,
            },
            Binding {
                source: "pv".into(),
                node: pv_node,
            },
        ],
        loads: vec![
            Binding {
                source: "load_a".into(),
                node: far,
            },
            Binding {
                source: "load_b".into(),
                node: other,
            },
        ],
        fixed_loads,
        price_source: "price".into(),
        storage: vec![Storage {
            node: far,
            power_max: 0.4,
            capacity_max: 0.8,
            soc_min: 0.1,
            soc_max: 0.9,
            soc0: 0.5,
            eta_c: 0.95,
            eta_d: 0.95,
            price: 30.0,
        }],
        trade_max: 4.0,
        buy_multiplier: 1.1,
        sell_multiplier: 0.9,
        curtail_penalty: 280.0,
        shed_penalty: 3000.0,
        reactive_ratio: 0.3,
    };

    let tree = config.tree()?;
    // Squared-voltage drop at `far` per MW drawn at `k` (with reactive
    // ratio `q`): the impedance of the lines shared by both root paths.
    let path_lines = |mut j: usize| {
        let mut out = BTreeSet::new();
        while let Some(i) = tree.parent[j] {
            out.insert(tree.parent_line[j].unwrap());
            j = i;
        }
        out
    };
    let far_path = path_lines(far);
    let shared = |k: usize, q: f64| -> f64 {
        path_lines(k)
            .intersection(&far_path)
            .map(|&l| 2.0 * (config.lines[l].r + config.lines[l].x * q))
            .sum()
    };
    let ratio = config.reactive_ratio;
    let sens = shared(far, ratio);
    let base_b = rng.gen_range(0.15..0.3);
    // Far-end demand that puts the far voltage exactly on its limit, with
    // the other loads at their high end and no renewable support.
    let limit_at = |t: usize| {
        let mut drop = 1.1 * 1.05 * base_b * load_shape(hours[t]) * shared(other, ratio);
        for f in &config.fixed_loads {
            drop += f.profile[t] * shared(f.node, ratio);
        }
        ((1.0 - config.v2_min - drop) / sens).max(0.05)
    };
    let limits: Vec<f64> = (0..tt).map(limit_at).collect();
    let base_a = 0.85
        * (0..tt)
            .map(|t| limits[t] / load_shape(hours[t]))
            .fold(f64::INFINITY, f64::min);
    // Wind on the shared path props the far voltage up; bad surges overcome it.
    let wind_relief = WT_CAPACITY * shared(wt_node, 0.0) / sens;

    let bad_count = (opts.bad_fraction * opts.scenarios as f64).round() as usize;
    let mut order: Vec<usize> = (0..opts.scenarios).collect();
    for i in (1..order.len()).rev() {
        let k = rng.gen_range(0..=i);
        order.swap(i, k);
    }
    let mut bad: Vec<usize> = order[..bad_count].to_vec();
    bad.sort_unstable();

    let sources: Vec<String> = ["wt", "pv", "load_a", "load_b", "price"].iter().map(|s| s.to_string()).collect();
    let price_base: Vec<f64> = hours
        .iter()
        .map(|&h| 45.0 + 15.0 * load_shape(h) + 10.0 * (-((h - 19.0) / 2.5f64).powi(2)).exp())
        .collect();
    let surge_start = hours.iter().position(|&h| h >= 19.0).unwrap_or(tt - 1);
    let surge_len = ((2.0 / dt).round() as usize).clamp(1, tt - surge_start);

    let mut scenarios = Vec::with_capacity(opts.scenarios);
    for s in 0..opts.scenarios {
        let mut values = Vec::with_capacity(5 * tt);
        let wind_level: f64 = rng.gen_range(0.05..0.95);
        let mut wind = wind_level;
        for _ in 0..tt {
            wind = (wind + rng.gen_range(-0.2..0.2)).clamp(0.0, 1.0);
            values.push(WT_CAPACITY * wind);
        }
        let cloud = rng.gen_range(0.1..1.0);
        for &h in &hours {
            let sun = ((h - 6.0) / 12.0 * std::f64::consts::PI).sin().max(0.0);
            values.push(PV_CAPACITY * cloud * sun * rng.gen_range(0.7..1.0));
        }
        let is_bad = bad.binary_search(&s).is_ok();
        let overshoot = rng.gen_range(1.05..1.15);
        for (t, &h) in hours.iter().enumerate() {
            let mut v = base_a * load_shape(h) * rng.gen_range(0.95..1.05);
            if is_bad && t >= surge_start && t < surge_start + surge_len {
                v = v.max(limits[t] * overshoot + wind_relief);
            }
            values.push(v);
        }
        let level_b = rng.gen_range(0.95..1.05);
        for &h in &hours {
            values.push(base_b * level_b * load_shape(h) * rng.gen_range(0.95..1.05));
        }
        let level = rng.gen_range(0.97..1.03);
        for &p in &price_base {
            values.push(p * level * rng.gen_range(0.85..1.15));
        }
        scenarios.push(Scenario::new(format!("s{s:03}"), values, tt));
    }
    let n = opts.scenarios;
    let set = ScenarioSet::new(sources, scenarios, vec![1.0 / n as f64; n])?;
    config.validate()?;
    Ok(DeskInstance {
        config,
        scenarios: set,
        bad,
    })
}
