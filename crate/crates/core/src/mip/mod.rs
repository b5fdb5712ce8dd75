//! Mixed-integer linear programming substrate.
//!
//! A small, deterministic solver stack: model builder, bounded-variable
//! primal/dual simplex over a dense tableau, branch-and-bound with
//! most-fractional branching and best-bound node selection, an
//! independent feasibility auditor, and a CPLEX-style LP text format for
//! cross-checking against external solvers.

mod audit;
mod branch_bound;
mod lp_text;
mod model;
mod simplex;

pub use audit::{audit_assignment, AuditViolation};
pub use branch_bound::{solve, MipSolution, SolveStatus, SolverConfig};
pub use lp_text::{parse_lp_string, write_lp_string};
pub use model::{
    ConstraintSense, LinearConstraint, MipModel, ObjectiveSense, VarId, VarKind, Variable,
};
pub use simplex::{solve_lp_relaxation, LpOutcome};
