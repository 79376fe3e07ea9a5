//! Semidefinite programming over one Hermitian block and a nonnegative orthant.

mod kkt;
mod program;
mod solver;

pub use kkt::{kkt_residuals, KktResiduals};
pub use program::{BlockCoefficient, ConicProgram, Equality, Inequality, LinearFunctional, Sense};
pub use solver::{
    solve, ConicSolution, IterationLog, SolveStatus, SolverSettings, SEARCH_DIRECTION,
};
