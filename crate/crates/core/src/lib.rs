//! Upwind finite-difference solver for finite-horizon Hamilton-Jacobi-Bellman
//! equations on periodic boxes, together with the tooling used to check it:
//! discrete conservation-law forms of the spatial differences, error norms,
//! convergence-order fits, minimizer diagnostics and randomized property
//! suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod conservation;
pub mod error;
pub mod grid;
pub mod ocp;
pub mod upwind;

pub use error::{HjbError, Result};
pub use grid::{extend_piecewise_constant, make_grid, wrap_index, GridSpec, ScalarField};
pub use ocp::{
    exact_lqr_input, exact_lqr_value, rollout, ControlProblem, FnProblem, InputSet,
    LqrBenchmark, ObstacleBenchmark2D, ObstacleParams, Rollout, SeparableControl,
};
pub use upwind::{
    check_cfl, minimize_input, solve, solve_from_terminal, step_backward, upwind_hamiltonian,
    CflStatus, MinimizerOptions, SolveResult, SolverOptions,
};
