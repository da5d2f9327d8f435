//! Mixed-binary linear programs: modelling, LP relaxations through HiGHS, a
//! deterministic best-first branch and bound, and CPLEX-LP export.
//!
//! ```
//! use pdsr_milp::{MixedBinaryModel, Relation, solve_milp, Status};
//!
//! let mut m = MixedBinaryModel::new();
//! let x = m.add_binary("x", -2.0);
//! let y = m.add_var("y", 0.0, 4.0, 0.5);
//! m.add_constraint("link", [(y, 1.0), (x, -2.0)], Relation::Ge, 0.0);
//! let s = solve_milp(&m, 1e-4, None).unwrap();
//! assert_eq!(s.status, Status::Optimal);
//! assert_eq!(s.values[0], 1.0);
//! assert!((s.objective + 1.0).abs() < 1e-9);
//! ```

mod bnb;
mod error;
mod lp;
mod lpfile;
mod model;

pub use bnb::{
    relative_gap, solve_lp, solve_milp, solve_milp_with, MilpOptions, Solution, Status, TracePoint,
    DEFAULT_GAP_TOL,
};
pub use error::{ModelError, SolveError};
pub use lp::{solve_relaxation, LpOutcome, Relaxation};
pub use lpfile::{export_lp_file, to_lp_string};
pub use model::{Constraint, LinearExpr, MixedBinaryModel, Relation, VarId, Variable};
