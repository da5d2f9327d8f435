use std::collections::BTreeMap;
use std::fmt;

use crate::error::ModelError;

/// Index of a variable inside one [`MixedBinaryModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    /// Signed amount by which `lhs` violates `lhs rel rhs` (0 when satisfied).
    pub fn violation(self, lhs: f64, rhs: f64) -> f64 {
        match self {
            Relation::Le => (lhs - rhs).max(0.0),
            Relation::Ge => (rhs - lhs).max(0.0),
            Relation::Eq => (lhs - rhs).abs(),
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }
}

/// A sparse linear expression `Σ c·x + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        LinearExpr {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        LinearExpr {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn add(&mut self, var: VarId, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((var, coef));
        }
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    pub fn add_expr(&mut self, other: &LinearExpr, scale: f64) -> &mut Self {
        for &(v, c) in &other.terms {
            self.add(v, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn with(mut self, var: VarId, coef: f64) -> Self {
        self.add(var, coef);
        self
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }

    /// Merges repeated variables and drops zero coefficients. Order follows
    /// the first appearance of each variable.
    pub fn compact(&mut self) {
        let mut seen: BTreeMap<VarId, usize> = BTreeMap::new();
        let mut out: Vec<(VarId, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match seen.get(&v) {
                Some(&pos) => out[pos].1 += c,
                None => {
                    seen.insert(v, out.len());
                    out.push((v, c));
                }
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }
}

/// A minimization problem over continuous and binary variables with linear
/// constraints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedBinaryModel {
    variables: Vec<Variable>,
    costs: Vec<f64>,
    objective_constant: f64,
    constraints: Vec<Constraint>,
}

impl MixedBinaryModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
        });
        self.costs.push(cost);
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
        });
        self.costs.push(cost);
        VarId(self.variables.len() - 1)
    }

    /// Adds `Σ terms rel rhs`. Repeated variables are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        let mut expr = LinearExpr {
            terms: terms.into_iter().collect(),
            constant: 0.0,
        };
        expr.compact();
        self.constraints.push(Constraint {
            name: name.into(),
            terms: expr.terms,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Adds `expr rel rhs`, moving the expression constant to the right.
    pub fn add_expr_constraint(
        &mut self,
        name: impl Into<String>,
        expr: &LinearExpr,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.add_constraint(name, expr.terms.iter().copied(), relation, rhs - expr.constant)
    }

    pub fn add_cost(&mut self, var: VarId, cost: f64) {
        self.costs[var.0] += cost;
    }

    pub fn add_objective_expr(&mut self, expr: &LinearExpr, scale: f64) {
        for &(v, c) in &expr.terms {
            self.costs[v.0] += c * scale;
        }
        self.objective_constant += expr.constant * scale;
    }

    pub fn add_objective_constant(&mut self, value: f64) {
        self.objective_constant += value;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> &Variable {
        &self.variables[var.0]
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.binary).count()
    }

    pub fn binary_indices(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.binary)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .costs
                .iter()
                .zip(values)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    /// Largest bound or constraint violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            worst = worst.max(c.relation.violation(c.lhs(values), c.rhs));
        }
        worst
    }

    /// Largest distance of a binary variable from {0, 1}.
    pub fn max_integrality_violation(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .filter(|(v, _)| v.binary)
            .map(|(_, &x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }

    /// Checks bounds, finiteness and variable references.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::Bounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(ModelError::Bounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::BinaryBounds(v.name.clone()));
            }
            if !self.costs[i].is_finite() {
                return Err(ModelError::NonFinite(format!("cost of `{}`", v.name)));
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(ModelError::NonFinite("objective constant".into()));
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("rhs of `{}`", c.name)));
            }
            for &(v, coef) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(ModelError::UnknownVariable {
                        constraint: c.name.clone(),
                        index: v.0,
                    });
                }
                if !coef.is_finite() {
                    return Err(ModelError::NonFinite(format!(
                        "coefficient of `{}` in `{}`",
                        self.variables[v.0].name, c.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Replaces the given variables by constants.
    ///
    /// Fixed variables disappear from the result; their objective
    /// contribution moves into the constant and their constraint
    /// contributions move into the right-hand sides. Constraints left without
    /// variables are checked against `tol` and dropped. Binary values are
    /// rounded and continuous values clamped into their bounds before
    /// substitution. Returns the reduced model and, for every original
    /// variable, its index in the reduced model (`None` when fixed).
    pub fn substitute(
        &self,
        fixed: &[(VarId, f64)],
        tol: f64,
    ) -> Result<(MixedBinaryModel, Vec<Option<VarId>>), ModelError> {
        let mut value: Vec<Option<f64>> = vec![None; self.variables.len()];
        for &(v, x) in fixed {
            let var = self
                .variables
                .get(v.0)
                .ok_or_else(|| ModelError::UnknownVariable {
                    constraint: "<substitution>".into(),
                    index: v.0,
                })?;
            if !x.is_finite() {
                return Err(ModelError::NonFinite(format!("fixed value of `{}`", var.name)));
            }
            if x < var.lower - tol || x > var.upper + tol {
                return Err(ModelError::FixedOutOfBounds {
                    var: var.name.clone(),
                    value: x,
                });
            }
            let x = if var.binary {
                x.round()
            } else {
                x.clamp(var.lower, var.upper)
            };
            value[v.0] = Some(x);
        }
        let mut map = vec![None; self.variables.len()];
        let mut out = MixedBinaryModel::new();
        out.objective_constant = self.objective_constant;
        for (i, var) in self.variables.iter().enumerate() {
            match value[i] {
                Some(x) => out.objective_constant += self.costs[i] * x,
                None => {
                    out.variables.push(var.clone());
                    out.costs.push(self.costs[i]);
                    map[i] = Some(VarId(out.variables.len() - 1));
                }
            }
        }
        for c in &self.constraints {
            let mut rhs = c.rhs;
            let mut terms = Vec::with_capacity(c.terms.len());
            for &(v, coef) in &c.terms {
                match value[v.0] {
                    Some(x) => rhs -= coef * x,
                    None => terms.push((map[v.0].expect("free variable is mapped"), coef)),
                }
            }
            if terms.is_empty() {
                let scale = 1.0 + c.rhs.abs();
                if c.relation.violation(0.0, rhs) > tol * scale {
                    return Err(ModelError::FixedInfeasible {
                        constraint: c.name.clone(),
                        violation: c.relation.violation(0.0, rhs),
                    });
                }
                continue;
            }
            out.constraints.push(Constraint {
                name: c.name.clone(),
                terms,
                relation: c.relation,
                rhs,
            });
        }
        Ok((out, map))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_terms_are_merged() {
        let mut m = MixedBinaryModel::new();
        let x = m.add_var("x", 0.0, 1.0, 1.0);
        let y = m.add_var("y", 0.0, 1.0, 1.0);
        m.add_constraint("c", [(x, 1.0), (y, 2.0), (x, 3.0), (y, -2.0)], Relation::Le, 1.0);
        assert_eq!(m.constraints()[0].terms, vec![(x, 4.0)]);
    }

    #[test]
    fn validation_catches_bad_binary_and_unknown_var() {
        let mut m = MixedBinaryModel::new();
        let b = m.add_binary("b", 0.0);
        m.set_bounds(b, 0.0, 2.0);
        assert!(matches!(m.validate(), Err(ModelError::BinaryBounds(_))));

        let mut m = MixedBinaryModel::new();
        m.add_var("x", 0.0, 1.0, 0.0);
        m.add_constraint("c", [(VarId(3), 1.0)], Relation::Le, 1.0);
        assert!(matches!(m.validate(), Err(ModelError::UnknownVariable { .. })));
    }

    #[test]
    fn substitution_moves_terms_to_rhs_and_objective() {
        let mut m = MixedBinaryModel::new();
        let z = m.add_var("z", 0.0, 10.0, 2.0);
        let y = m.add_var("y", 0.0, 10.0, 1.0);
        m.add_constraint("link", [(y, 1.0), (z, 1.0)], Relation::Ge, 5.0);
        m.add_constraint("only_z", [(z, 1.0)], Relation::Le, 4.0);
        let (r, map) = m.substitute(&[(z, 3.0)], 1e-9).unwrap();
        assert_eq!(map, vec![None, Some(VarId(0))]);
        assert_eq!(r.num_vars(), 1);
        assert_eq!(r.objective_constant(), 6.0);
        assert_eq!(r.num_constraints(), 1);
        assert_eq!(r.constraints()[0].rhs, 2.0);

        assert!(matches!(
            m.substitute(&[(z, 4.5)], 1e-9),
            Err(ModelError::FixedInfeasible { .. })
        ));
    }
}
