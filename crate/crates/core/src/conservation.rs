//! Spatial differences of the value field evolved as discrete conservation laws.
//!
//! With `P_i = sum_k [f_k^+(A*_i) D_k^+ V_i + f_k^-(A*_i) D_k^- V_i] + g(A*_i)`
//! written in terms of the difference fields, the forward differences obey
//! `U_{i,j-1} = U_{i,j} + alpha (P_{i+1} - P_i)` and the backward ones
//! `Û_{i,j-1} = Û_{i,j} + alpha (P_i - P_{i-1})`. In one dimension these are
//! exactly the flux-difference forms driven by the same minimizers the value
//! solve produced.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::grid::{GridSpec, ScalarField, MAX_DIM};
use crate::ocp::ControlProblem;
use crate::upwind::{check_cfl, CflStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// `D^+` or `D^-` of `v` along `axis`.
pub fn difference(v: &ScalarField, axis: usize, side: Side) -> ScalarField {
    let grid = *v.grid();
    let vals = v.values();
    let out = (0..grid.node_count())
        .map(|k| match side {
            Side::Plus => (vals[grid.neighbor(k, axis, 1)] - vals[k]) / grid.dx(),
            Side::Minus => (vals[k] - vals[grid.neighbor(k, axis, -1)]) / grid.dx(),
        })
        .collect();
    ScalarField::new(grid, v.time_index(), out).expect("same grid")
}

/// `f^+(a) u_right + f^-(a) u_left + g(a)` at `x` (scalar state).
pub fn numerical_flux_plus(
    problem: &dyn ControlProblem,
    x: &[f64],
    a_star: &[f64],
    u_left: f64,
    u_right: f64,
) -> f64 {
    let mut f = [0.0; MAX_DIM];
    problem.dynamics(x, a_star, &mut f[..problem.state_dim()]);
    f[0].max(0.0) * u_right + f[0].min(0.0) * u_left + problem.running_cost(x, a_star)
}

#[derive(Debug, Clone)]
pub struct DerivativeField {
    pub side: Side,
    /// Indexed `[axis][j]` for `j = 0..=N_t`.
    pub components: Vec<Vec<ScalarField>>,
    pub cfl: CflStatus,
}

impl DerivativeField {
    pub fn slice(&self, axis: usize, j: usize) -> &ScalarField {
        &self.components[axis][j]
    }
}

/// Node flux `P_i` evaluated from the difference fields of one side.
fn node_flux(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    u: &[&[f64]],
    a: &[f64],
    flat: usize,
    side: Side,
) -> f64 {
    let n = grid.dim();
    let point = grid.node_point(flat);
    let x = &point[..n];
    let mut f = [0.0; MAX_DIM];
    problem.dynamics(x, a, &mut f[..n]);
    let mut p = problem.running_cost(x, a);
    for k in 0..n {
        let (d_plus, d_minus) = match side {
            Side::Plus => (u[k][flat], u[k][grid.neighbor(flat, k, -1)]),
            Side::Minus => (u[k][grid.neighbor(flat, k, 1)], u[k][flat]),
        };
        p += f[k].max(0.0) * d_plus + f[k].min(0.0) * d_minus;
    }
    p
}

/// One backward step of the difference fields with a frozen policy slice.
///
/// `u` holds one field per state axis at time index `j`; `policy` holds
/// `A*_{., j}` per control axis.
pub fn step_derivative(
    problem: &dyn ControlProblem,
    u: &[ScalarField],
    policy: &[&ScalarField],
    side: Side,
    parallel: bool,
) -> Result<Vec<ScalarField>> {
    let grid = *u
        .first()
        .ok_or_else(|| HjbError::invalid("no difference fields"))?
        .grid();
    let n = grid.dim();
    if u.len() != n {
        return Err(HjbError::invalid("one difference field per state axis required"));
    }
    if policy.len() != problem.control_dim() {
        return Err(HjbError::invalid("one policy field per control axis required"));
    }
    let j = u[0].time_index();
    if j == 0 {
        return Err(HjbError::invalid("cannot step backward from j = 0"));
    }
    let vals: Vec<&[f64]> = u.iter().map(|f| f.values()).collect();
    let flux_at = |flat: usize| {
        let a: Vec<f64> = policy.iter().map(|p| p.get(flat)).collect();
        node_flux(problem, &grid, &vals, &a, flat, side)
    };
    let flux: Vec<f64> = if parallel {
        (0..grid.node_count()).into_par_iter().map(flux_at).collect()
    } else {
        (0..grid.node_count()).map(flux_at).collect()
    };
    let alpha = grid.alpha();
    (0..n)
        .map(|axis| {
            let out = (0..grid.node_count())
                .map(|k| {
                    let delta = match side {
                        Side::Plus => flux[grid.neighbor(k, axis, 1)] - flux[k],
                        Side::Minus => flux[k] - flux[grid.neighbor(k, axis, -1)],
                    };
                    vals[axis][k] + alpha * delta
                })
                .collect();
            ScalarField::new(grid, j - 1, out)
        })
        .collect()
}

/// Evolves `D^±` of the terminal data backward with the supplied policy.
///
/// `policy` is indexed `[axis][j - 1]` for `j = 1..=N_t`, as in a
/// [`crate::upwind::SolveResult`].
pub fn evolve_derivative(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    policy: &[Vec<ScalarField>],
    side: Side,
    parallel: bool,
) -> Result<DerivativeField> {
    if problem.state_dim() != grid.dim() {
        return Err(HjbError::invalid("problem and grid dimensions differ"));
    }
    let nt = grid.n_time();
    if policy.len() != problem.control_dim() {
        return Err(HjbError::invalid("one policy series per control axis required"));
    }
    for (axis, series) in policy.iter().enumerate() {
        if series.len() != nt {
            return Err(HjbError::invalid(format!(
                "policy axis {axis} has {} slices, expected {nt}",
                series.len()
            )));
        }
        for (k, s) in series.iter().enumerate() {
            if s.time_index() != k + 1 || s.grid() != grid {
                return Err(HjbError::invalid(format!(
                    "policy slice for j = {} missing",
                    k + 1
                )));
            }
        }
    }
    let cfl = check_cfl(problem, grid);
    if !cfl.satisfies_modified {
        log::warn!(
            "derivative evolution with alpha * sup|f| = {} above the modified CFL bound 1/2",
            cfl.alpha_times_sup
        );
    }
    let terminal = ScalarField::from_fn(*grid, nt, |x| problem.terminal_cost(x));
    let mut current: Vec<ScalarField> = (0..grid.dim())
        .map(|axis| difference(&terminal, axis, side))
        .collect();
    let mut history: Vec<Vec<ScalarField>> = vec![Vec::with_capacity(nt + 1); grid.dim()];
    for j in (1..=nt).rev() {
        let slice: Vec<&ScalarField> = policy.iter().map(|s| &s[j - 1]).collect();
        let next = step_derivative(problem, &current, &slice, side, parallel)?;
        for (axis, field) in current.into_iter().enumerate() {
            history[axis].push(field);
        }
        current = next;
    }
    for (axis, field) in current.into_iter().enumerate() {
        history[axis].push(field);
    }
    for series in &mut history {
        series.reverse();
    }
    Ok(DerivativeField {
        side,
        components: history,
        cfl,
    })
}

/// Periodic total variation, summed over axes.
pub fn total_variation(slice: &ScalarField) -> f64 {
    let grid = slice.grid();
    let v = slice.values();
    (0..grid.dim())
        .map(|axis| {
            (0..grid.node_count())
                .map(|k| (v[k] - v[grid.neighbor(k, axis, -1)]).abs())
                .sum::<f64>()
        })
        .sum()
}

/// Largest `|P(u_l, u_r) - p(ū)| / max(|u_l - ū|, |u_r - ū|)` over nodes and samples.
///
/// `p(ū) = f(a*) ū + g(a*)` uses the scheme's minimizer at each node. Samples
/// with a zero denominator are skipped. Scalar state only.
pub fn flux_lipschitz_probe(
    problem: &dyn ControlProblem,
    policy_slice: &[&ScalarField],
    u_samples: &[(f64, f64, f64)],
) -> Result<f64> {
    let grid = *policy_slice
        .first()
        .ok_or_else(|| HjbError::invalid("empty policy slice"))?
        .grid();
    if grid.dim() != 1 || problem.state_dim() != 1 {
        return Err(HjbError::invalid("flux Lipschitz probe needs a scalar state"));
    }
    let mut worst = 0.0f64;
    let mut f = [0.0; 1];
    for k in 0..grid.node_count() {
        let x = [grid.coord(k)];
        let a: Vec<f64> = policy_slice.iter().map(|p| p.get(k)).collect();
        problem.dynamics(&x, &a, &mut f);
        let g = problem.running_cost(&x, &a);
        for &(ul, ur, ubar) in u_samples {
            let denom = (ul - ubar).abs().max((ur - ubar).abs());
            if denom == 0.0 {
                continue;
            }
            let numerical = numerical_flux_plus(problem, &x, &a, ul, ur);
            let exact = f[0] * ubar + g;
            worst = worst.max((numerical - exact).abs() / denom);
        }
    }
    Ok(worst)
}
