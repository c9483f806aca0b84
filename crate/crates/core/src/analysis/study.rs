//! Resolution ladders: errors against the exact LQR solution, and
//! self-convergence against a fine reference solve.

use rayon::prelude::*;
use serde::Serialize;

use super::norms::{fit_order, grid_norm, sup_norm, MeasurementRegion};
use crate::error::{HjbError, Result};
use crate::grid::{extend_piecewise_constant, GridSpec, ScalarField};
use crate::ocp::{ControlProblem, LqrBenchmark};
use crate::upwind::{solve, SolveResult, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    pub dx: f64,
    pub dt: f64,
}

impl Resolution {
    pub fn with_ratio(dx: f64, alpha: f64) -> Self {
        Self { dx, dt: alpha * dx }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub resolutions: Vec<Resolution>,
    pub errors_value: Vec<f64>,
    pub errors_input: Vec<f64>,
    /// Largest nodewise value error inside the region (exact-solution studies only).
    pub sup_errors_value: Vec<f64>,
    pub fitted_order_value: Option<f64>,
    pub fitted_order_input: Option<f64>,
    pub measurement_region: MeasurementRegion,
}

impl ConvergenceReport {
    fn assemble(
        resolutions: Vec<Resolution>,
        rows: Vec<(f64, f64, f64)>,
        region: MeasurementRegion,
    ) -> Result<Self> {
        let errors_value: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let errors_input: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let sup_errors_value: Vec<f64> = rows.iter().map(|r| r.2).filter(|e| e.is_finite()).collect();
        let fit = |errors: &[f64]| -> Result<Option<f64>> {
            if resolutions.len() < 2 {
                return Ok(None);
            }
            let pts: Vec<(f64, f64)> = resolutions
                .iter()
                .zip(errors)
                .map(|(r, e)| (r.dx, *e))
                .collect();
            fit_order(&pts).map(Some)
        };
        Ok(Self {
            fitted_order_value: fit(&errors_value)?,
            fitted_order_input: fit(&errors_input)?,
            resolutions,
            errors_value,
            errors_input,
            sup_errors_value,
            measurement_region: region,
        })
    }
}

fn check_ladder(resolutions: &[Resolution]) -> Result<()> {
    if resolutions.is_empty() {
        return Err(HjbError::invalid("empty resolution ladder"));
    }
    if resolutions.windows(2).any(|w| !(w[1].dx < w[0].dx)) {
        return Err(HjbError::invalid("resolutions must be strictly decreasing in dx"));
    }
    Ok(())
}

fn map_ladder<T: Send>(
    resolutions: &[Resolution],
    parallel: bool,
    f: impl Fn(&Resolution) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if parallel {
        resolutions.par_iter().map(f).collect()
    } else {
        resolutions.iter().map(f).collect()
    }
}

/// Solves the LQR benchmark on each resolution and measures the value and
/// feedback errors against the closed-form solution.
///
/// Feedback errors compare `A*_{i,j}` with `a*(x_i, t_j)` for `j = 1..=N_t`.
pub fn convergence_study_lqr(
    resolutions: &[Resolution],
    half_width: f64,
    horizon: f64,
    region: &MeasurementRegion,
    opts: &SolverOptions,
) -> Result<ConvergenceReport> {
    check_ladder(resolutions)?;
    let problem = LqrBenchmark::new(horizon);
    let inner = SolverOptions {
        parallel: false,
        ..*opts
    };
    let rows = map_ladder(resolutions, opts.parallel, |res| {
        let grid = GridSpec::from_steps(1, half_width, res.dx, horizon, res.dt)?;
        let sol = solve(&problem, &grid, &inner)?;
        let (value_err, input_err) = lqr_errors(&problem, &sol)?;
        Ok((
            grid_norm(&value_err, region)?,
            grid_norm(&input_err, region)?,
            sup_norm(&value_err, region)?,
        ))
    })?;
    ConvergenceReport::assemble(resolutions.to_vec(), rows, region.clone())
}

/// Nodewise `V - v` (all slices) and `A* - a*` (slices `1..=N_t`).
pub fn lqr_errors(
    problem: &LqrBenchmark,
    sol: &SolveResult,
) -> Result<(Vec<ScalarField>, Vec<ScalarField>)> {
    let grid = sol.grid;
    let value = sol
        .value
        .iter()
        .map(|s| {
            let t = grid.time(s.time_index()).min(problem.horizon);
            let vals = (0..grid.node_count())
                .map(|k| Ok(s.get(k) - problem.exact_value(grid.coord(k), t)?))
                .collect::<Result<Vec<f64>>>()?;
            ScalarField::new(grid, s.time_index(), vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let input = sol.policy[0]
        .iter()
        .map(|s| {
            let t = grid.time(s.time_index()).min(problem.horizon);
            let vals = (0..grid.node_count())
                .map(|k| Ok(s.get(k) - problem.exact_input(grid.coord(k), t)?))
                .collect::<Result<Vec<f64>>>()?;
            ScalarField::new(grid, s.time_index(), vals)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((value, input))
}

/// Self-convergence against a reference solve.
///
/// Both solutions are compared at the nodes of each coarse grid through their
/// piecewise-constant extensions; vector controls use the Euclidean norm per
/// node.
pub fn self_convergence_study(
    problem: &dyn ControlProblem,
    resolutions: &[Resolution],
    reference: Resolution,
    half_width: f64,
    horizon: f64,
    region: Option<&MeasurementRegion>,
    opts: &SolverOptions,
) -> Result<ConvergenceReport> {
    check_ladder(resolutions)?;
    if !(reference.dx < resolutions[resolutions.len() - 1].dx) {
        return Err(HjbError::invalid(
            "reference must be finer than every study resolution",
        ));
    }
    let dim = problem.state_dim();
    let ref_grid = GridSpec::from_steps(dim, half_width, reference.dx, horizon, reference.dt)?;
    let reference_sol = solve(problem, &ref_grid, opts)?;
    let region = region
        .cloned()
        .unwrap_or_else(|| MeasurementRegion::full(&ref_grid));
    let inner = SolverOptions {
        parallel: false,
        ..*opts
    };
    let rows = map_ladder(resolutions, opts.parallel, |res| {
        let grid = GridSpec::from_steps(dim, half_width, res.dx, horizon, res.dt)?;
        let sol = solve(problem, &grid, &inner)?;
        let (value_err, input_err) = reference_errors(&reference_sol, &sol)?;
        Ok((
            grid_norm(&value_err, &region)?,
            grid_norm(&input_err, &region)?,
            f64::NAN,
        ))
    })?;
    ConvergenceReport::assemble(resolutions.to_vec(), rows, region)
}

/// Nodewise differences between a reference solution and a coarse one, on the
/// coarse grid.
pub fn reference_errors(
    reference: &SolveResult,
    coarse: &SolveResult,
) -> Result<(Vec<ScalarField>, Vec<ScalarField>)> {
    let grid = coarse.grid;
    let n = grid.dim();
    let t_of = |j: usize| grid.time(j).min(grid.horizon());
    let value = coarse
        .value
        .iter()
        .map(|s| {
            let t = t_of(s.time_index());
            let vals = (0..grid.node_count())
                .map(|k| {
                    let p = grid.node_point(k);
                    Ok(extend_piecewise_constant(&reference.value, &p[..n], t)? - s.get(k))
                })
                .collect::<Result<Vec<f64>>>()?;
            ScalarField::new(grid, s.time_index(), vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let input = (1..=grid.n_time())
        .map(|j| {
            let t = t_of(j);
            let vals = (0..grid.node_count())
                .map(|k| {
                    let p = grid.node_point(k);
                    let a_ref = reference.policy_at(&p[..n], t)?;
                    let sq: f64 = coarse
                        .policy
                        .iter()
                        .zip(&a_ref)
                        .map(|(series, r)| {
                            let z = r - series[j - 1].get(k);
                            z * z
                        })
                        .sum();
                    Ok(sq.sqrt())
                })
                .collect::<Result<Vec<f64>>>()?;
            ScalarField::new(grid, j, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((value, input))
}
