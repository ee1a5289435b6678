//! Solver-agnostic representation of linear and second-order-cone programs.

mod check;
mod clarabel_backend;
mod dump;
mod expr;
mod problem;
mod simplex;
mod solve;

pub use check::{check_solution, check_solution_tol, NamedResidual, ResidualReport};
pub use clarabel_backend::ClarabelBackend;
pub use dump::write_problem;
pub use expr::{LinExpr, VarId};
pub use problem::{ConicProblem, Constraint, SocConstraint, Variable};
pub use simplex::DenseSimplex;
pub use solve::{solve, ConicBackend, Diagnostics, SolveResult, SolveStatus, Tolerances};
