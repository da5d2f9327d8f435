//! Linear relaxations solved with HiGHS.

use highs::{Col, HighsModelStatus, Model, RowProblem, Sense};

use crate::error::SolveError;
use crate::model::{MixedBinaryModel, Relation};

/// Result of one relaxation solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { objective: f64, values: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// The continuous relaxation of a model, kept alive between solves so that
/// bound changes re-solve from the previous basis.
pub struct Relaxation {
    model: Option<Model>,
    cols: Vec<Col>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    base_lower: Vec<f64>,
    base_upper: Vec<f64>,
    costs: Vec<f64>,
    constant: f64,
    solves: usize,
}

fn new_engine(problem: RowProblem) -> Model {
    let mut m = problem.optimise(Sense::Minimise);
    m.make_quiet();
    m.set_option("parallel", "off");
    m.set_option("threads", 1);
    m.set_option("presolve", "off");
    m
}

impl Relaxation {
    pub fn new(model: &MixedBinaryModel) -> Result<Self, SolveError> {
        model.validate()?;
        let mut problem = RowProblem::default();
        let mut cols = Vec::with_capacity(model.num_vars());
        for (v, &c) in model.variables().iter().zip(model.costs()) {
            cols.push(problem.add_column(c, v.lower..=v.upper));
        }
        for c in model.constraints() {
            let factors: Vec<(Col, f64)> = c.terms.iter().map(|&(v, k)| (cols[v.0], k)).collect();
            match c.relation {
                Relation::Le => problem.add_row(..=c.rhs, factors),
                Relation::Ge => problem.add_row(c.rhs.., factors),
                Relation::Eq => problem.add_row(c.rhs..=c.rhs, factors),
            }
        }
        let lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        Ok(Relaxation {
            model: Some(new_engine(problem)),
            cols,
            base_lower: lower.clone(),
            base_upper: upper.clone(),
            lower,
            upper,
            costs: model.costs().to_vec(),
            constant: model.objective_constant(),
            solves: 0,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.cols.len()
    }

    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn base_bounds(&self, var: usize) -> (f64, f64) {
        (self.base_lower[var], self.base_upper[var])
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        if self.lower[var] == lower && self.upper[var] == upper {
            return;
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        let m = self.model.as_mut().expect("engine present");
        m.change_column_bounds(self.cols[var], lower..=upper);
    }

    /// Restores every variable to the bounds it had at construction.
    pub fn reset_bounds(&mut self) {
        for i in 0..self.cols.len() {
            self.set_bounds(i, self.base_lower[i], self.base_upper[i]);
        }
    }

    pub fn solve(&mut self) -> Result<LpOutcome, SolveError> {
        self.solves += 1;
        if self.cols.is_empty() {
            return Ok(LpOutcome::Optimal {
                objective: self.constant,
                values: Vec::new(),
            });
        }
        if (0..self.cols.len()).any(|i| self.lower[i] > self.upper[i]) {
            return Ok(LpOutcome::Infeasible);
        }
        let model = self.model.take().expect("engine present");
        let solved = model
            .try_solve()
            .map_err(|s| SolveError::Engine(format!("HiGHS returned {s:?}")))?;
        let status = solved.status();
        let outcome = match status {
            HighsModelStatus::Optimal => {
                let values = solved.get_solution().columns().to_vec();
                let objective = self.constant
                    + self
                        .costs
                        .iter()
                        .zip(&values)
                        .map(|(c, x)| c * x)
                        .sum::<f64>();
                LpOutcome::Optimal { objective, values }
            }
            HighsModelStatus::Infeasible => LpOutcome::Infeasible,
            HighsModelStatus::Unbounded => LpOutcome::Unbounded,
            HighsModelStatus::UnboundedOrInfeasible => {
                self.model = Some(Model::from(solved));
                return self.resolve_ambiguous();
            }
            other => {
                return Err(SolveError::Engine(format!("unexpected LP status {other:?}")));
            }
        };
        self.model = Some(Model::from(solved));
        Ok(outcome)
    }

    // HiGHS may not tell the two apart. A zero objective settles it.
    fn resolve_ambiguous(&mut self) -> Result<LpOutcome, SolveError> {
        let mut m = self.model.take().expect("engine present");
        for &c in &self.cols {
            m.change_column_cost(c, 0.0);
        }
        let solved = m
            .try_solve()
            .map_err(|s| SolveError::Engine(format!("HiGHS returned {s:?}")))?;
        let status = solved.status();
        let mut m = Model::from(solved);
        for (&c, &k) in self.cols.iter().zip(&self.costs) {
            m.change_column_cost(c, k);
        }
        self.model = Some(m);
        match status {
            HighsModelStatus::Optimal => Ok(LpOutcome::Unbounded),
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                Ok(LpOutcome::Infeasible)
            }
            other => Err(SolveError::Engine(format!("unexpected LP status {other:?}"))),
        }
    }
}

/// Solves the continuous relaxation of `model` once.
pub fn solve_relaxation(model: &MixedBinaryModel) -> Result<LpOutcome, SolveError> {
    Relaxation::new(model)?.solve()
}
