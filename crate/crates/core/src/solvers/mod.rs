//! Exact self-interested solution by backward induction, and one-shot welfare optima.

pub mod exact;
pub mod welfare;

pub use exact::{exact_value, optimal_payoffs, ExactConfig, ExactSolver, SolverLimits};
pub use welfare::{solve_welfare, solve_welfare_exhaustive, WelfareObjective, WelfareSolution};
