//! Backward-in-time explicit upwind scheme.
//!
//! One step from `t_j` to `t_{j-1}` at node `i`:
//!
//! ```text
//! A*_i   in argmin_{a in E} sum_d [f_d^+(a) D_d^+ V_i + f_d^-(a) D_d^- V_i] + g(a)
//! V'_i   = (1 - sum_d alpha |f_d(A*)|) V_i
//!          + sum_d alpha f_d^+(A*) V_{i+e_d} - sum_d alpha f_d^-(A*) V_{i-e_d}
//!          + dt g(A*)
//! ```
//!
//! Nodes are independent within a step, so the parallel and sequential paths
//! produce bitwise-identical fields.

mod minimize;

pub use minimize::{minimize_input, upwind_hamiltonian, MinimizerOptions, Minimum};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::grid::{extend_piecewise_constant, GridSpec, ScalarField, MAX_DIM};
use crate::ocp::ControlProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CflStatus {
    /// `sum_d alpha_d * sup|f_d|`.
    pub alpha_times_sup: f64,
    /// `alpha_times_sup < 1`.
    pub satisfies_strict: bool,
    /// `alpha_times_sup <= 1/2`.
    pub satisfies_modified: bool,
}

pub fn check_cfl(problem: &dyn ControlProblem, grid: &GridSpec) -> CflStatus {
    let value: f64 = problem
        .sup_speed()
        .iter()
        .take(grid.dim())
        .map(|s| grid.alpha() * s)
        .sum();
    CflStatus {
        alpha_times_sup: value,
        satisfies_strict: value < 1.0,
        satisfies_modified: value <= 0.5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub minimizer: MinimizerOptions,
    pub parallel: bool,
    /// Run even when the strict CFL bound fails.
    pub force_cfl: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            minimizer: MinimizerOptions::default(),
            parallel: true,
            force_cfl: false,
        }
    }
}

impl SolverOptions {
    pub fn sequential() -> Self {
        Self {
            parallel: false,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MinimizerStats {
    pub evaluations: u64,
    pub refinement_iterations: u64,
    pub analytic_nodes: u64,
    pub generic_nodes: u64,
}

impl MinimizerStats {
    fn absorb(&mut self, m: &Minimum) {
        self.evaluations += m.evaluations;
        self.refinement_iterations += m.refinements;
        if m.analytic {
            self.analytic_nodes += 1;
        } else {
            self.generic_nodes += 1;
        }
    }

    fn merge(&mut self, other: &MinimizerStats) {
        self.evaluations += other.evaluations;
        self.refinement_iterations += other.refinement_iterations;
        self.analytic_nodes += other.analytic_nodes;
        self.generic_nodes += other.generic_nodes;
    }
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    /// `V_{j-1}`.
    pub value: ScalarField,
    /// `A*_{., j}`, one field per control axis.
    pub policy: Vec<ScalarField>,
    pub stats: MinimizerStats,
}

/// Forward and backward differences of `v` at `flat` along every axis.
pub(crate) fn differences(
    grid: &GridSpec,
    v: &[f64],
    flat: usize,
) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    let mut plus = [0.0; MAX_DIM];
    let mut minus = [0.0; MAX_DIM];
    for d in 0..grid.dim() {
        let up = v[grid.neighbor(flat, d, 1)];
        let down = v[grid.neighbor(flat, d, -1)];
        plus[d] = (up - v[flat]) / grid.dx();
        minus[d] = (v[flat] - down) / grid.dx();
    }
    (plus, minus)
}

struct NodeUpdate {
    value: f64,
    control: Vec<f64>,
    minimum: Minimum,
}

fn update_node(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    v: &[f64],
    flat: usize,
    opts: &MinimizerOptions,
    check_weights: bool,
) -> Result<NodeUpdate> {
    let n = grid.dim();
    let point = grid.node_point(flat);
    let x = &point[..n];
    let (plus, minus) = differences(grid, v, flat);
    let minimum = minimize_input(problem, x, &plus[..n], &minus[..n], opts)?;
    let a = &minimum.control;
    debug_assert!(problem.input_set().contains(a));

    let mut f = [0.0; MAX_DIM];
    problem.dynamics(x, a, &mut f[..n]);
    let alpha = grid.alpha();
    let mut centre = 1.0;
    let mut value = 0.0;
    for d in 0..n {
        let fp = f[d].max(0.0);
        let fm = f[d].min(0.0);
        centre -= alpha * f[d].abs();
        value += alpha * fp * v[grid.neighbor(flat, d, 1)];
        value -= alpha * fm * v[grid.neighbor(flat, d, -1)];
    }
    if check_weights {
        debug_assert!(
            centre >= -1e-12,
            "negative centre weight {centre} at node {flat} under strict CFL"
        );
    }
    value += centre * v[flat] + grid.dt() * problem.running_cost(x, a);
    if !value.is_finite() {
        return Err(HjbError::NumericalFailure(format!(
            "non-finite value at node {flat} (x = {x:?})"
        )));
    }
    Ok(NodeUpdate {
        value,
        control: minimum.control.clone(),
        minimum,
    })
}

/// One explicit step `V_j -> (V_{j-1}, A*_j)`.
pub fn step_backward(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    v: &ScalarField,
    opts: &SolverOptions,
) -> Result<StepOutput> {
    if v.grid() != grid {
        return Err(HjbError::invalid("field grid does not match"));
    }
    if problem.state_dim() != grid.dim() {
        return Err(HjbError::invalid(format!(
            "problem state dimension {} does not match grid dimension {}",
            problem.state_dim(),
            grid.dim()
        )));
    }
    if v.time_index() == 0 {
        return Err(HjbError::invalid("cannot step backward from j = 0"));
    }
    let check_weights = check_cfl(problem, grid).satisfies_strict;
    let values = v.values();
    let run = |flat: usize| update_node(problem, grid, values, flat, &opts.minimizer, check_weights);
    let updates: Vec<NodeUpdate> = if opts.parallel {
        (0..grid.node_count())
            .into_par_iter()
            .map(run)
            .collect::<Result<_>>()?
    } else {
        (0..grid.node_count()).map(run).collect::<Result<_>>()?
    };

    let m = problem.control_dim();
    let j = v.time_index();
    let mut stats = MinimizerStats::default();
    let mut new_values = Vec::with_capacity(updates.len());
    let mut policy = vec![Vec::with_capacity(updates.len()); m];
    for u in &updates {
        stats.absorb(&u.minimum);
        new_values.push(u.value);
        for (axis, series) in policy.iter_mut().enumerate() {
            series.push(u.control[axis]);
        }
    }
    Ok(StepOutput {
        value: ScalarField::new(*grid, j - 1, new_values)?,
        policy: policy
            .into_iter()
            .map(|p| ScalarField::new(*grid, j, p))
            .collect::<Result<_>>()?,
        stats,
    })
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub grid: GridSpec,
    /// `V_{., j}` for `j = 0..=N_t`.
    pub value: Vec<ScalarField>,
    /// `A*_{., j}` indexed `[axis][j - 1]` for `j = 1..=N_t`.
    pub policy: Vec<Vec<ScalarField>>,
    pub cfl: CflStatus,
    pub forced_cfl: bool,
    pub stats: MinimizerStats,
}

impl SolveResult {
    /// Piecewise-constant value at `(x, t)`.
    pub fn value_at(&self, x: &[f64], t: f64) -> Result<f64> {
        extend_piecewise_constant(&self.value, x, t)
    }

    /// Piecewise-constant policy at `(x, t)`; times before `t_1` read `A*_1`.
    pub fn policy_at(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.policy
            .iter()
            .map(|series| extend_piecewise_constant(series, x, t))
            .collect()
    }

    /// Policy fields of time index `j` (`1..=N_t`), one per control axis.
    pub fn policy_slice(&self, j: usize) -> Option<Vec<&ScalarField>> {
        if j == 0 || j > self.grid.n_time() {
            return None;
        }
        Some(self.policy.iter().map(|series| &series[j - 1]).collect())
    }
}

/// Solves from `V_{i, N_t} = v_T(x_i)`.
pub fn solve(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let terminal = ScalarField::from_fn(*grid, grid.n_time(), |x| problem.terminal_cost(x));
    solve_from_terminal(problem, grid, terminal, opts)
}

/// Solves from arbitrary terminal data (time index `N_t`).
pub fn solve_from_terminal(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    terminal: ScalarField,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    if problem.state_dim() != grid.dim() {
        return Err(HjbError::invalid(format!(
            "problem state dimension {} does not match grid dimension {}",
            problem.state_dim(),
            grid.dim()
        )));
    }
    if terminal.grid() != grid || terminal.time_index() != grid.n_time() {
        return Err(HjbError::invalid("terminal data must live at j = N_t on the grid"));
    }
    let cfl = check_cfl(problem, grid);
    if !cfl.satisfies_strict {
        if !opts.force_cfl {
            return Err(HjbError::CflRefused(cfl));
        }
        log::info!(
            "solving with alpha * sup|f| = {} (strict CFL bound violated, forced)",
            cfl.alpha_times_sup
        );
    }
    let nt = grid.n_time();
    let m = problem.control_dim();
    let mut value = Vec::with_capacity(nt + 1);
    let mut policy: Vec<Vec<ScalarField>> = vec![Vec::with_capacity(nt); m];
    let mut stats = MinimizerStats::default();
    value.push(terminal);
    for _ in 0..nt {
        let step = step_backward(problem, grid, value.last().expect("non-empty"), opts)?;
        stats.merge(&step.stats);
        value.push(step.value);
        for (axis, field) in step.policy.into_iter().enumerate() {
            policy[axis].push(field);
        }
    }
    value.reverse();
    for series in &mut policy {
        series.reverse();
    }
    Ok(SolveResult {
        grid: *grid,
        value,
        policy,
        cfl,
        forced_cfl: !cfl.satisfies_strict,
        stats,
    })
}
