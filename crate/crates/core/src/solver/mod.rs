//! Exact LP/MILP solving and validation of externally produced solutions.

mod bnb;
mod import;
mod lp;

pub use bnb::{integral_violation, solve_milp, Branching, MilpSolution, MilpStatus, SolveOptions, SolveStats};
pub use import::{import_solution, read_solution, write_solution};
pub use lp::{check_size, solve_lp, Basis, MAX_ROWS, LpProblem, LpSolution, LpStatus, Simplex, VarState};
