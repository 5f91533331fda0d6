//! Linear and mixed-binary programming.
//!
//! A bounded-variable revised simplex (`solve_lp`), branch-and-bound over
//! binaries (`solve_milp`), and the secant cost linearization used to keep
//! quadratic generator costs inside a linear model.

pub mod audit;
mod dump;
mod factor;
mod lp;
mod milp;
mod pwl;
mod simplex;

pub use dump::write_fixed_width;
pub use lp::{
    Constraint, LinearProgram, LpError, LpSolution, LpStatus, Relation, Sense, VarId, Variable,
    DUALITY_GAP_TOL, FEASIBILITY_TOL, INTEGRALITY_TOL, OPTIMALITY_TOL,
};
pub use milp::{solve_milp, MilpSolution, MilpStatus};
pub use pwl::{piecewise_linearize, LinearPiece, PiecewiseCost};

/// Solves `lp` to optimality, or reports infeasibility / unboundedness.
///
/// The result is a deterministic function of `lp`. Numerical breakdown is
/// returned as [`LpError::SolverFailure`] rather than as a status.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    simplex::solve(lp)
}
