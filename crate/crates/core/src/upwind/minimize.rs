//! Per-node minimization of the upwind Hamiltonian over the input box.
//!
//! Generic path: uniform scan of `E` followed by golden-section refinement
//! (coordinate-wise for vector controls). Separable problems use a closed
//! form over a finite candidate set.

use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::grid::MAX_DIM;
use crate::ocp::{ControlProblem, SeparableControl};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimizerOptions {
    /// Scan points per control axis.
    pub scan_points: usize,
    /// Bracket width at which golden-section refinement stops.
    pub refine_tolerance: f64,
    /// Use the closed form when the problem declares a separable structure.
    pub analytic: bool,
}

impl Default for MinimizerOptions {
    fn default() -> Self {
        Self {
            scan_points: 33,
            refine_tolerance: 1e-10,
            analytic: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub control: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    pub refinements: u64,
    pub analytic: bool,
}

/// `sum_d [max(f_d, 0) d_plus_d + min(f_d, 0) d_minus_d] + g(x, a)`.
///
/// Returns an error if `a` lies outside the input set.
pub fn upwind_hamiltonian(
    problem: &dyn ControlProblem,
    x: &[f64],
    a: &[f64],
    d_plus: &[f64],
    d_minus: &[f64],
) -> Result<f64> {
    if !problem.input_set().contains(a) {
        return Err(HjbError::invalid(format!("control {a:?} outside the input set")));
    }
    if d_plus.len() != problem.state_dim() || d_minus.len() != problem.state_dim() {
        return Err(HjbError::invalid("one difference per state axis required"));
    }
    Ok(hamiltonian(problem, x, a, d_plus, d_minus))
}

pub(crate) fn hamiltonian(
    problem: &dyn ControlProblem,
    x: &[f64],
    a: &[f64],
    d_plus: &[f64],
    d_minus: &[f64],
) -> f64 {
    let n = problem.state_dim();
    let mut f = [0.0; MAX_DIM];
    problem.dynamics(x, a, &mut f[..n]);
    let mut h = problem.running_cost(x, a);
    for d in 0..n {
        h += f[d].max(0.0) * d_plus[d] + f[d].min(0.0) * d_minus[d];
    }
    h
}

/// Minimizes the upwind Hamiltonian over the input box.
///
/// Among exact ties the lexicographically smallest control wins.
pub fn minimize_input(
    problem: &dyn ControlProblem,
    x: &[f64],
    d_plus: &[f64],
    d_minus: &[f64],
    opts: &MinimizerOptions,
) -> Result<Minimum> {
    if d_plus.len() != problem.state_dim() || d_minus.len() != problem.state_dim() {
        return Err(HjbError::invalid("one difference per state axis required"));
    }
    if opts.analytic {
        if let Some(sep) = problem.separable_control() {
            return separable_minimum(problem, &sep, x, d_plus, d_minus);
        }
    }
    generic_minimum(problem, x, d_plus, d_minus, opts)
}

fn non_finite(x: &[f64], a: &[f64]) -> HjbError {
    HjbError::NumericalFailure(format!(
        "non-finite Hamiltonian at x = {x:?}, a = {a:?}"
    ))
}

fn separable_minimum(
    problem: &dyn ControlProblem,
    sep: &SeparableControl,
    x: &[f64],
    d_plus: &[f64],
    d_minus: &[f64],
) -> Result<Minimum> {
    let e = problem.input_set();
    let m = e.dim();
    let mut control = vec![0.0; m];
    let mut evaluations = 0u64;
    for d in 0..m {
        let (lo, hi) = (e.lower()[d], e.upper()[d]);
        let (b, w) = (sep.gain[d], sep.weight[d]);
        let (p, q) = (d_plus[d], d_minus[d]);
        let term = |a: f64| {
            let f = b * a;
            f.max(0.0) * p + f.min(0.0) * q + w * a * a
        };
        let mut candidates = [lo, hi, 0.0f64.clamp(lo, hi), lo, lo];
        if w != 0.0 {
            candidates[3] = (-b * p / (2.0 * w)).clamp(lo, hi);
            candidates[4] = (-b * q / (2.0 * w)).clamp(lo, hi);
        }
        let mut best_a = f64::NAN;
        let mut best_v = f64::INFINITY;
        for &a in &candidates {
            let v = term(a);
            evaluations += 1;
            if !v.is_finite() {
                return Err(non_finite(x, &[a]));
            }
            if v < best_v || (v == best_v && a < best_a) {
                best_v = v;
                best_a = a;
            }
        }
        control[d] = best_a;
    }
    let value = hamiltonian(problem, x, &control, d_plus, d_minus);
    if !value.is_finite() {
        return Err(non_finite(x, &control));
    }
    Ok(Minimum {
        control,
        value,
        evaluations: evaluations + 1,
        refinements: 0,
        analytic: true,
    })
}

struct Objective<'a> {
    problem: &'a dyn ControlProblem,
    x: &'a [f64],
    d_plus: &'a [f64],
    d_minus: &'a [f64],
    evaluations: u64,
}

impl Objective<'_> {
    fn eval(&mut self, a: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let v = hamiltonian(self.problem, self.x, a, self.d_plus, self.d_minus);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(non_finite(self.x, a))
        }
    }
}

fn generic_minimum(
    problem: &dyn ControlProblem,
    x: &[f64],
    d_plus: &[f64],
    d_minus: &[f64],
    opts: &MinimizerOptions,
) -> Result<Minimum> {
    let e = problem.input_set();
    let m = e.dim();
    let n_scan = opts.scan_points.max(2);
    let step: Vec<f64> = (0..m)
        .map(|d| (e.upper()[d] - e.lower()[d]) / (n_scan - 1) as f64)
        .collect();
    let points_on = |d: usize| if step[d] == 0.0 { 1 } else { n_scan };

    let mut obj = Objective {
        problem,
        x,
        d_plus,
        d_minus,
        evaluations: 0,
    };

    // scan in lexicographic order; strict improvement keeps the smallest tie
    let mut idx = vec![0usize; m];
    let mut a = e.lower().to_vec();
    let mut best = a.clone();
    let mut best_v = f64::INFINITY;
    'scan: loop {
        for d in 0..m {
            a[d] = if idx[d] + 1 == points_on(d) && step[d] != 0.0 {
                e.upper()[d]
            } else {
                e.lower()[d] + idx[d] as f64 * step[d]
            };
        }
        let v = obj.eval(&a)?;
        if v < best_v {
            best_v = v;
            best.copy_from_slice(&a);
        }
        // odometer increment, last axis fastest
        let mut d = m;
        loop {
            if d == 0 {
                break 'scan;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < points_on(d) {
                break;
            }
            idx[d] = 0;
        }
    }

    let mut refinements = 0u64;
    let mut current = best.clone();
    let mut current_v = best_v;
    for sweep in 0..MAX_SWEEPS {
        let mut moved = 0.0f64;
        for d in 0..m {
            if step[d] == 0.0 {
                continue;
            }
            let lo = (current[d] - step[d]).max(e.lower()[d]);
            let hi = (current[d] + step[d]).min(e.upper()[d]);
            let mut probe = current.clone();
            let mut along = |t: f64| {
                probe[d] = t;
                obj.eval(&probe)
            };
            let (a_g, v_g, iters) = golden_section(lo, hi, opts.refine_tolerance, &mut along)?;
            let (a_d, v) = parabolic_polish(a_g, v_g, lo, hi, 1e-4 * step[d], &mut along)?;
            refinements += iters;
            if v < current_v {
                moved = moved.max((a_d - current[d]).abs());
                current[d] = a_d;
                current_v = v;
            }
        }
        if m == 1 || moved <= opts.refine_tolerance || sweep + 1 == MAX_SWEEPS {
            break;
        }
    }

    Ok(Minimum {
        control: current,
        value: current_v,
        evaluations: obj.evaluations,
        refinements,
        analytic: false,
    })
}

/// One symmetric three-point parabola step around `a`.
///
/// Golden-section alone resolves a smooth minimum only to about the square
/// root of the objective's rounding noise. The vertex is kept only when it is
/// no worse than `a`, so a nearby kink cannot pull the result away.
fn parabolic_polish(
    a: f64,
    fa: f64,
    lo: f64,
    hi: f64,
    h: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    if !(h > 0.0) || a - h < lo || a + h > hi {
        return Ok((a, fa));
    }
    let fl = f(a - h)?;
    let fr = f(a + h)?;
    let curvature = fl - 2.0 * fa + fr;
    if !(curvature > 0.0) {
        return Ok((a, fa));
    }
    let vertex = a - 0.5 * h * (fr - fl) / curvature;
    if !(vertex >= a - h && vertex <= a + h) {
        return Ok((a, fa));
    }
    let fv = f(vertex)?;
    Ok(if fv <= fa { (vertex, fv) } else { (a, fa) })
}

/// Golden-section search on `[lo, hi]`; returns the best probed point.
fn golden_section(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64, u64)> {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iters = 0u64;
    while (hi - lo) > tol && iters < 200 {
        iters += 1;
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid)?;
    let mut best = (mid, fm);
    if fc < best.1 {
        best = (c, fc);
    }
    if fd < best.1 {
        best = (d, fd);
    }
    Ok((best.0, best.1, iters))
}
