//! Seeded randomized checks of the scheme's structural properties.
//!
//! Every suite returns a [`PropertyOutcome`] whose `worst_margin` is the
//! largest observed excess over the property's bound (non-positive when the
//! property held with room to spare). A trial counts as a violation when its
//! margin exceeds the suite tolerance.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::norms::fit_order;
use crate::conservation::{
    difference, evolve_derivative, flux_lipschitz_probe, step_derivative, total_variation, Side,
};
use crate::error::{HjbError, Result};
use crate::grid::{make_grid, GridSpec, ScalarField};
use crate::ocp::{ControlProblem, FnProblem, InputSet, LqrBenchmark, SeparableControl};
use crate::upwind::{check_cfl, solve, solve_from_terminal, step_backward, SolveResult, SolverOptions};

/// Tolerance for the value-scheme inequalities.
pub const STEP_TOLERANCE: f64 = 1e-12;
/// Relative tolerance for the derivative correspondence.
pub const CORRESPONDENCE_TOLERANCE: f64 = 1e-12;
/// Slack on the flux Lipschitz bound.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct PropertyOutcome {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    pub tolerance: f64,
    pub worst_margin: f64,
    pub passed: bool,
    /// First violating trial, when any.
    pub counterexample: Option<Value>,
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    trials: usize,
    violations: usize,
    worst: f64,
    counterexample: Option<Value>,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            trials: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
            counterexample: None,
        }
    }

    fn record(&mut self, margin: f64, witness: impl FnOnce() -> Value) {
        self.trials += 1;
        // NaN margins count as violations
        if margin.is_nan() || margin > self.worst {
            self.worst = if margin.is_nan() { f64::INFINITY } else { margin };
        }
        if !(margin <= self.tolerance) {
            self.violations += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(witness());
            }
        }
    }

    fn finish(self) -> PropertyOutcome {
        PropertyOutcome {
            name: self.name.to_string(),
            trials: self.trials,
            violations: self.violations,
            tolerance: self.tolerance,
            worst_margin: self.worst,
            passed: self.violations == 0,
            counterexample: self.counterexample,
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn log_uniform(rng: &mut ChaCha8Rng, lo_exp: f64, hi_exp: f64) -> f64 {
    10f64.powf(rng.gen_range(lo_exp..hi_exp))
}

/// Parametric scalar problem
/// `f = gain * a + drift * sin(pi x)`,
/// `g = quad * x^2 + wave * cos(pi x) + weight * a^2`,
/// `E = [lower, upper]`, `v_T = 0`.
///
/// Problems without drift declare the separable structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarFamily {
    pub gain: f64,
    pub weight: f64,
    pub lower: f64,
    pub upper: f64,
    pub quad: f64,
    pub wave: f64,
    pub drift: f64,
}

impl Default for ScalarFamily {
    /// The scalar regulator.
    fn default() -> Self {
        Self {
            gain: 1.0,
            weight: 0.5,
            lower: -1.0,
            upper: 1.0,
            quad: 0.5,
            wave: 0.0,
            drift: 0.0,
        }
    }
}

impl ScalarFamily {
    pub fn sample(rng: &mut ChaCha8Rng, with_drift: bool, homogeneous: bool) -> Self {
        let (quad, wave) = if homogeneous {
            (0.0, 0.0)
        } else {
            (rng.gen_range(0.0..2.0), rng.gen_range(-1.0..1.0))
        };
        Self {
            gain: rng.gen_range(0.5..2.0),
            weight: rng.gen_range(0.1..1.5),
            lower: rng.gen_range(-1.5..-0.2),
            upper: rng.gen_range(0.2..1.5),
            quad,
            wave,
            drift: if with_drift { rng.gen_range(-0.5..0.5) } else { 0.0 },
        }
    }

    pub fn sup_speed(&self) -> f64 {
        self.gain * self.lower.abs().max(self.upper) + self.drift.abs()
    }

    pub fn build(&self) -> Result<FnProblem> {
        let p = *self;
        let problem = FnProblem::new(
            1,
            InputSet::new(vec![p.lower], vec![p.upper])?,
            vec![p.sup_speed()],
            move |x, a, out| out[0] = p.gain * a[0] + p.drift * (PI * x[0]).sin(),
            move |x, a| p.quad * x[0] * x[0] + p.wave * (PI * x[0]).cos() + p.weight * a[0] * a[0],
            |_| 0.0,
        )?;
        if p.drift == 0.0 {
            problem.with_separable(SeparableControl {
                gain: vec![p.gain],
                weight: vec![p.weight],
            })
        } else {
            Ok(problem)
        }
    }

    /// A one-dimensional grid on which `alpha * sup|f| = cfl_number`.
    pub fn grid(&self, rng: &mut ChaCha8Rng, cfl_number: f64) -> Result<GridSpec> {
        let n_space = rng.gen_range(4..=24);
        let half_width = rng.gen_range(0.5..2.0);
        let dx = half_width / n_space as f64;
        let n_time = 4;
        let horizon = n_time as f64 * cfl_number / self.sup_speed() * dx;
        make_grid(1, half_width, n_space, horizon, n_time)
    }
}

/// What the step suites apply the scheme to.
pub enum Subject<'a> {
    /// The same problem and grid in every trial.
    Fixed {
        problem: &'a dyn ControlProblem,
        grid: GridSpec,
    },
    /// A fresh random scalar problem and grid per trial, with
    /// `alpha * sup|f|` fixed to `cfl_number` or drawn from `[0.05, 0.99)`.
    Random {
        cfl_number: Option<f64>,
        with_drift: bool,
    },
}

struct Instance<'a> {
    owned: Option<FnProblem>,
    fixed: Option<&'a dyn ControlProblem>,
    grid: GridSpec,
    description: Value,
}

impl Instance<'_> {
    fn problem(&self) -> &dyn ControlProblem {
        match (&self.owned, self.fixed) {
            (Some(p), _) => p,
            (None, Some(p)) => p,
            (None, None) => unreachable!("instance without a problem"),
        }
    }
}

fn draw_instance<'a>(subject: &Subject<'a>, rng: &mut ChaCha8Rng) -> Result<Instance<'a>> {
    match *subject {
        Subject::Fixed { problem, grid } => Ok(Instance {
            owned: None,
            fixed: Some(problem),
            grid,
            description: json!({ "grid": grid }),
        }),
        Subject::Random {
            cfl_number,
            with_drift,
        } => {
            let params = ScalarFamily::sample(rng, with_drift, false);
            let cfl = cfl_number.unwrap_or_else(|| rng.gen_range(0.05..0.99));
            let grid = params.grid(rng, cfl)?;
            Ok(Instance {
                owned: Some(params.build()?),
                fixed: None,
                grid,
                description: json!({ "problem": params, "grid": grid }),
            })
        }
    }
}

/// Smooth periodic part plus node noise, amplitudes spread over decades.
fn random_field(rng: &mut ChaCha8Rng, grid: &GridSpec, time_index: usize) -> ScalarField {
    let amp = log_uniform(rng, -3.0, 1.0);
    let noise = log_uniform(rng, -4.0, 0.5);
    let k = rng.gen_range(1..=3) as f64;
    let phase = rng.gen_range(0.0..2.0 * PI);
    let l = grid.half_width();
    let values = (0..grid.node_count())
        .map(|flat| {
            let p = grid.node_point(flat);
            let s: f64 = p[..grid.dim()].iter().map(|c| (PI * k * c / l + phase).sin()).sum();
            amp * s + noise * rng.gen_range(-1.0..1.0)
        })
        .collect();
    ScalarField::new(*grid, time_index, values).expect("sized to grid")
}

/// A non-negative perturbation: a single bump, a sparse set, or dense noise.
fn random_bump(rng: &mut ChaCha8Rng, grid: &GridSpec) -> Vec<f64> {
    let n = grid.node_count();
    let amp = log_uniform(rng, -8.0, 1.0);
    let mut out = vec![0.0; n];
    match rng.gen_range(0..4) {
        0 => out[rng.gen_range(0..n)] = amp,
        1 => {
            for _ in 0..rng.gen_range(1..=4) {
                out[rng.gen_range(0..n)] = amp * rng.gen_range(0.0..1.0);
            }
        }
        2 => out.iter_mut().for_each(|v| *v = amp * rng.gen_range(0.0..1.0)),
        _ => {}
    }
    out
}

fn offset(field: &ScalarField, delta: &[f64], sign: f64) -> ScalarField {
    let values = field
        .values()
        .iter()
        .zip(delta)
        .map(|(v, d)| v + sign * d)
        .collect();
    ScalarField::new(*field.grid(), field.time_index(), values).expect("same grid")
}

fn step_value(problem: &dyn ControlProblem, grid: &GridSpec, v: &ScalarField) -> Result<ScalarField> {
    Ok(step_backward(problem, grid, v, &SolverOptions::sequential())?.value)
}

fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best })
}

/// `V >= W` pointwise implies `S(V) >= S(W)` pointwise.
pub fn monotonicity_suite(subject: &Subject, seed: u64, trials: usize) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 1);
    let mut tally = Tally::new("monotonicity", STEP_TOLERANCE);
    for trial in 0..trials {
        let inst = draw_instance(subject, &mut rng)?;
        let j = inst.grid.n_time();
        let v = random_field(&mut rng, &inst.grid, j);
        let bump = random_bump(&mut rng, &inst.grid);
        let w = offset(&v, &bump, -1.0);
        let sv = step_value(inst.problem(), &inst.grid, &v)?;
        let sw = step_value(inst.problem(), &inst.grid, &w)?;
        let (node, margin) = argmax(sw.values().iter().zip(sv.values()).map(|(a, b)| a - b));
        tally.record(margin, || {
            json!({
                "trial": trial,
                "instance": inst.description,
                "node": node,
                "v": v.values(),
                "w": w.values(),
                "step_v": sv.values(),
                "step_w": sw.values(),
            })
        });
    }
    Ok(tally.finish())
}

/// `S(V - c) = S(V) - c`.
pub fn constant_shift_suite(subject: &Subject, seed: u64, trials: usize) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 2);
    let mut tally = Tally::new("constant_shift", STEP_TOLERANCE);
    for trial in 0..trials {
        let inst = draw_instance(subject, &mut rng)?;
        let v = random_field(&mut rng, &inst.grid, inst.grid.n_time());
        let c = log_uniform(&mut rng, -3.0, 1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let shifted = offset(&v, &vec![c; inst.grid.node_count()], -1.0);
        let sv = step_value(inst.problem(), &inst.grid, &v)?;
        let ss = step_value(inst.problem(), &inst.grid, &shifted)?;
        let (node, margin) = argmax(
            ss.values()
                .iter()
                .zip(sv.values())
                .map(|(a, b)| (a - (b - c)).abs()),
        );
        tally.record(margin, || {
            json!({ "trial": trial, "instance": inst.description, "node": node, "c": c, "v": v.values() })
        });
    }
    Ok(tally.finish())
}

/// `sup(S(V) - S(W)) <= sup(V - W)` for arbitrary `V`, `W`.
pub fn comparison_suite(subject: &Subject, seed: u64, trials: usize) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 3);
    let mut tally = Tally::new("comparison_principle", STEP_TOLERANCE);
    for trial in 0..trials {
        let inst = draw_instance(subject, &mut rng)?;
        let j = inst.grid.n_time();
        let v = random_field(&mut rng, &inst.grid, j);
        let w = random_field(&mut rng, &inst.grid, j);
        let before = argmax(v.values().iter().zip(w.values()).map(|(a, b)| a - b)).1;
        let sv = step_value(inst.problem(), &inst.grid, &v)?;
        let sw = step_value(inst.problem(), &inst.grid, &w)?;
        let after = argmax(sv.values().iter().zip(sw.values()).map(|(a, b)| a - b)).1;
        tally.record(after - before, || {
            json!({ "trial": trial, "instance": inst.description, "v": v.values(), "w": w.values() })
        });
    }
    Ok(tally.finish())
}

/// Two solves from terminal data differing by a random perturbation:
/// `sup|e_{j-1}| <= sup|e_j|` at every step.
pub fn stability_suite(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    seed: u64,
    trials: usize,
    opts: &SolverOptions,
) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 4);
    let mut tally = Tally::new("stability", STEP_TOLERANCE);
    let terminal = ScalarField::from_fn(*grid, grid.n_time(), |x| problem.terminal_cost(x));
    let base = solve_from_terminal(problem, grid, terminal.clone(), opts)?;
    for trial in 0..trials {
        let noise = random_field(&mut rng, grid, grid.n_time());
        let perturbed = offset(&terminal, noise.values(), 1.0);
        let other = solve_from_terminal(problem, grid, perturbed, opts)?;
        let sup_e: Vec<f64> = base
            .value
            .iter()
            .zip(&other.value)
            .map(|(a, b)| {
                a.values()
                    .iter()
                    .zip(b.values())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        let (step, margin) = argmax((1..sup_e.len()).map(|j| sup_e[j - 1] - sup_e[j]));
        tally.record(margin, || {
            json!({ "trial": trial, "time_index": step, "perturbation": noise.values(), "sup_error": sup_e })
        });
    }
    Ok(tally.finish())
}

/// Evolves `D^+ v_T` and `D^- v_T` with the solve's policy and compares them
/// with the differences of the solved value field.
///
/// The margin per side is `max|U - D V| / max(max|D V|, 1)`, the deviation
/// relative to the size of the difference field.
pub fn derivative_correspondence(
    problem: &dyn ControlProblem,
    sol: &SolveResult,
    parallel: bool,
) -> Result<PropertyOutcome> {
    let mut tally = Tally::new("derivative_correspondence", CORRESPONDENCE_TOLERANCE);
    for side in [Side::Plus, Side::Minus] {
        let evolved = evolve_derivative(problem, &sol.grid, &sol.policy, side, parallel)?;
        let mut worst = (f64::NEG_INFINITY, 0, 0, 0);
        let mut scale = 1.0f64;
        for axis in 0..sol.grid.dim() {
            for (j, v) in sol.value.iter().enumerate() {
                let direct = difference(v, axis, side);
                let u = evolved.slice(axis, j);
                for k in 0..sol.grid.node_count() {
                    let d = direct.get(k);
                    scale = scale.max(d.abs());
                    let e = (u.get(k) - d).abs();
                    if e > worst.0 || e.is_nan() {
                        worst = (e, axis, j, k);
                    }
                }
            }
        }
        tally.record(worst.0 / scale, || {
            json!({
                "side": side,
                "axis": worst.1,
                "time_index": worst.2,
                "node": worst.3,
                "abs_deviation": worst.0,
                "scale": scale,
            })
        });
    }
    Ok(tally.finish())
}

/// `U >= Ũ` implies the same order after one derivative step with a shared
/// policy, on random scalar problems under `alpha * sup|f| <= 1/2`.
pub fn derivative_monotonicity_suite(seed: u64, trials: usize) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 5);
    let mut tally = Tally::new("derivative_monotonicity", STEP_TOLERANCE);
    for trial in 0..trials {
        let with_drift = rng.gen_bool(0.5);
        let params = ScalarFamily::sample(&mut rng, with_drift, false);
        let problem = params.build()?;
        let cfl = rng.gen_range(0.05..=0.5);
        let grid = params.grid(&mut rng, cfl)?;
        let j = grid.n_time();
        let policy = ScalarField::new(
            grid,
            j,
            (0..grid.node_count())
                .map(|_| rng.gen_range(params.lower..=params.upper))
                .collect(),
        )?;
        let u = random_field(&mut rng, &grid, j);
        let bump = random_bump(&mut rng, &grid);
        let lower = offset(&u, &bump, -1.0);
        let su = step_derivative(&problem, std::slice::from_ref(&u), &[&policy], Side::Plus, false)?;
        let sl = step_derivative(&problem, std::slice::from_ref(&lower), &[&policy], Side::Plus, false)?;
        let (node, margin) = argmax(sl[0].values().iter().zip(su[0].values()).map(|(a, b)| a - b));
        tally.record(margin, || {
            json!({
                "trial": trial,
                "problem": params,
                "grid": grid,
                "node": node,
                "policy": policy.values(),
                "u": u.values(),
                "u_lower": lower.values(),
            })
        });
    }
    Ok(tally.finish())
}

/// Per-step total-variation growth of both difference fields over a solve:
/// `max_j TV(U_{j-1}) - TV(U_j)`, plus the step where it occurs.
pub fn tv_growth(
    problem: &dyn ControlProblem,
    sol: &SolveResult,
    side: Side,
) -> Result<(f64, usize)> {
    let evolved = evolve_derivative(problem, &sol.grid, &sol.policy, side, false)?;
    let tv: Vec<f64> = (0..=sol.grid.n_time())
        .map(|j| {
            (0..sol.grid.dim())
                .map(|axis| total_variation(evolved.slice(axis, j)))
                .sum()
        })
        .collect();
    let (k, growth) = argmax((1..tv.len()).map(|j| tv[j - 1] - tv[j]));
    Ok((growth, k + 1))
}

/// Total variation never increases backward in time on random problems whose
/// dynamics and costs do not depend on the state, under `alpha * sup|f| <= 1/2`.
/// Tolerance is relative to `max(TV(U_{N_t}), 1)`.
pub fn tvd_suite(seed: u64, trials: usize) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 6);
    let mut tally = Tally::new("total_variation_diminishing", STEP_TOLERANCE);
    for trial in 0..trials {
        let params = ScalarFamily::sample(&mut rng, false, true);
        let problem = params.build()?;
        let cfl = rng.gen_range(0.05..=0.5);
        let grid = params.grid(&mut rng, cfl)?;
        let terminal = random_field(&mut rng, &grid, grid.n_time());
        let sol = solve_from_terminal(&problem, &grid, terminal.clone(), &SolverOptions::sequential())?;
        let mut worst: f64 = f64::NEG_INFINITY;
        for side in [Side::Plus, Side::Minus] {
            let mut u = difference(&terminal, 0, side);
            let scale = total_variation(&u).max(1.0);
            for j in (1..=grid.n_time()).rev() {
                let next = step_derivative(&problem, &[u.clone()], &[&sol.policy[0][j - 1]], side, false)?;
                let growth = total_variation(&next[0]) - total_variation(&u);
                worst = worst.max(growth / scale);
                u = next.into_iter().next().expect("one axis");
            }
        }
        tally.record(worst, || {
            json!({ "trial": trial, "problem": params, "grid": grid, "terminal": terminal.values() })
        });
    }
    Ok(tally.finish())
}

/// `|P(u_l, u_r) - p(ū)| <= sup|f| max(|u_l - ū|, |u_r - ū|)` on random
/// triples at every policy slice of a scalar solve.
pub fn flux_lipschitz_suite(
    problem: &dyn ControlProblem,
    sol: &SolveResult,
    seed: u64,
    trials: usize,
) -> Result<PropertyOutcome> {
    let mut rng = rng_for(seed, 7);
    let bound = problem.sup_speed()[0];
    let mut tally = Tally::new("flux_lipschitz", LIPSCHITZ_SLACK);
    for trial in 0..trials {
        let samples: Vec<(f64, f64, f64)> = (0..16)
            .map(|_| {
                let s = log_uniform(&mut rng, -3.0, 1.0);
                (
                    s * rng.gen_range(-1.0..1.0),
                    s * rng.gen_range(-1.0..1.0),
                    s * rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let j = rng.gen_range(1..=sol.grid.n_time());
        let slice = sol.policy_slice(j).expect("in range");
        let ratio = flux_lipschitz_probe(problem, &slice, &samples)?;
        tally.record(ratio - bound, || {
            json!({ "trial": trial, "time_index": j, "samples": samples, "ratio": ratio, "bound": bound })
        });
    }
    Ok(tally.finish())
}

/// Every policy entry of the solve lies in `E`; the margin is the largest
/// distance outside the box.
pub fn policy_in_set(problem: &dyn ControlProblem, sol: &SolveResult) -> PropertyOutcome {
    let e = problem.input_set();
    let mut tally = Tally::new("policy_in_input_set", 0.0);
    for (axis, series) in sol.policy.iter().enumerate() {
        let (lo, hi) = (e.lower()[axis], e.upper()[axis]);
        let mut worst = (f64::NEG_INFINITY, 0, 0);
        for s in series {
            for (k, a) in s.values().iter().enumerate() {
                let outside = (lo - a).max(a - hi);
                if outside > worst.0 || outside.is_nan() {
                    worst = (outside, s.time_index(), k);
                }
            }
        }
        tally.record(worst.0, || {
            json!({ "axis": axis, "time_index": worst.1, "node": worst.2 })
        });
    }
    tally.finish()
}

/// One-step residual of the scheme on `phi(x, t) = sin(pi x) e^{-t}` for the
/// scalar regulator, against `-phi_t - min_a {a phi_x + (x^2 + a^2) / 2}`.
#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub dx: Vec<f64>,
    pub errors: Vec<f64>,
    pub order: f64,
}

/// Residuals at interior nodes (`|x| <= L/2`) for one step ending at `t`.
pub fn consistency_probe(dxs: &[f64], alpha: f64, t: f64) -> Result<ConsistencyReport> {
    let problem = LqrBenchmark::default();
    let half_width = 1.0;
    let phi = |x: f64, t: f64| (PI * x).sin() * (-t).exp();
    let target = |x: f64, t: f64| {
        let p = PI * (PI * x).cos() * (-t).exp();
        // min over [-1, 1] of a p + a^2 / 2
        let h = if p.abs() <= 1.0 { -0.5 * p * p } else { 0.5 - p.abs() };
        phi(x, t) - h - 0.5 * x * x
    };
    let mut errors = Vec::with_capacity(dxs.len());
    for &dx in dxs {
        let n_space = (half_width / dx).round() as usize;
        let dt = alpha * dx;
        let grid = make_grid(1, half_width, n_space, dt, 1)?;
        if !check_cfl(&problem, &grid).satisfies_strict {
            return Err(HjbError::invalid("consistency probe needs strict CFL"));
        }
        let v = ScalarField::from_fn(grid, 1, |x| phi(x[0], t));
        let stepped = step_value(&problem, &grid, &v)?;
        let mut worst: f64 = 0.0;
        for k in 0..grid.node_count() {
            let x = grid.coord(k);
            if x.abs() > half_width / 2.0 + 1e-12 {
                continue;
            }
            let residual = (phi(x, t - dt) - stepped.get(k)) / dt;
            worst = worst.max((residual - target(x, t)).abs());
        }
        errors.push(worst);
    }
    let points: Vec<(f64, f64)> = dxs.iter().cloned().zip(errors.iter().cloned()).collect();
    Ok(ConsistencyReport {
        dx: dxs.to_vec(),
        order: fit_order(&points)?,
        errors,
    })
}

/// Runs [`solve`] and the solve-based suites for `problem` on `grid`.
pub fn solve_based_suites(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    seed: u64,
    trials: usize,
    opts: &SolverOptions,
) -> Result<Vec<PropertyOutcome>> {
    let sol = solve(problem, grid, opts)?;
    let mut out = vec![
        stability_suite(problem, grid, seed, trials, opts)?,
        derivative_correspondence(problem, &sol, opts.parallel)?,
        policy_in_set(problem, &sol),
    ];
    if grid.dim() == 1 {
        out.push(flux_lipschitz_suite(problem, &sol, seed, trials)?);
    }
    Ok(out)
}
