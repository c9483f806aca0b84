//! Finite-horizon optimal control problems.
//!
//! A problem is the tuple (dynamics `f`, running cost `g`, terminal cost `v_T`,
//! input box `E`). Implementations must be pure: the solver calls the
//! callbacks from several threads and in no particular order.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::grid::{extend_piecewise_constant, GridSpec, ScalarField, MAX_DIM};

/// Axis-aligned box of admissible controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl InputSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(HjbError::invalid(
                "input set bounds must be non-empty and of equal length",
            ));
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(HjbError::invalid(format!("input bound on axis {d} is not finite")));
            }
            if lo > hi {
                return Err(HjbError::invalid(format!(
                    "input lower bound {lo} exceeds upper bound {hi} on axis {d}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[-bound, bound]^dim`.
    pub fn symmetric(dim: usize, bound: f64) -> Result<Self> {
        Self::new(vec![-bound; dim], vec![bound; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, a: &[f64]) -> bool {
        a.len() == self.dim()
            && a
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// Control-affine, diagonally decoupled structure: `f_d(x, a) = gain_d * a_d`
/// and `g(x, a) = c(x) + sum_d weight_d * a_d^2`.
///
/// Problems that declare it get a closed-form per-node minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableControl {
    pub gain: Vec<f64>,
    pub weight: Vec<f64>,
}

pub trait ControlProblem: Sync {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize {
        self.input_set().dim()
    }

    /// Writes `f(x, a)` into `out` (length `state_dim`).
    fn dynamics(&self, x: &[f64], a: &[f64], out: &mut [f64]);

    fn running_cost(&self, x: &[f64], a: &[f64]) -> f64;

    fn terminal_cost(&self, x: &[f64]) -> f64;

    fn input_set(&self) -> &InputSet;

    /// Per-axis `sup_{x, a in E} |f_d(x, a)|`.
    fn sup_speed(&self) -> &[f64];

    fn separable_control(&self) -> Option<SeparableControl> {
        None
    }
}

type DynamicsFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
type CostFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type TerminalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A problem assembled from closures.
#[derive(Clone)]
pub struct FnProblem {
    state_dim: usize,
    input_set: InputSet,
    sup_speed: Vec<f64>,
    dynamics: Arc<DynamicsFn>,
    running_cost: Arc<CostFn>,
    terminal_cost: Arc<TerminalFn>,
    separable: Option<SeparableControl>,
}

impl std::fmt::Debug for FnProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnProblem")
            .field("state_dim", &self.state_dim)
            .field("input_set", &self.input_set)
            .field("sup_speed", &self.sup_speed)
            .finish_non_exhaustive()
    }
}

impl FnProblem {
    pub fn new(
        state_dim: usize,
        input_set: InputSet,
        sup_speed: Vec<f64>,
        dynamics: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        running_cost: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        terminal_cost: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if state_dim == 0 || state_dim > MAX_DIM {
            return Err(HjbError::invalid(format!("state_dim must be 1 or 2, got {state_dim}")));
        }
        if sup_speed.len() != state_dim || sup_speed.iter().any(|s| !(*s >= 0.0)) {
            return Err(HjbError::invalid(
                "sup_speed needs one non-negative entry per state axis",
            ));
        }
        Ok(Self {
            state_dim,
            input_set,
            sup_speed,
            dynamics: Arc::new(dynamics),
            running_cost: Arc::new(running_cost),
            terminal_cost: Arc::new(terminal_cost),
            separable: None,
        })
    }

    /// Declares the separable structure. The caller vouches that it matches
    /// the closures.
    pub fn with_separable(mut self, structure: SeparableControl) -> Result<Self> {
        let m = self.input_set.dim();
        if m != self.state_dim || structure.gain.len() != m || structure.weight.len() != m {
            return Err(HjbError::invalid(
                "separable structure needs one gain and weight per axis",
            ));
        }
        self.separable = Some(structure);
        Ok(self)
    }
}

impl ControlProblem for FnProblem {
    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn dynamics(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        (self.dynamics)(x, a, out)
    }

    fn running_cost(&self, x: &[f64], a: &[f64]) -> f64 {
        (self.running_cost)(x, a)
    }

    fn terminal_cost(&self, x: &[f64]) -> f64 {
        (self.terminal_cost)(x)
    }

    fn input_set(&self) -> &InputSet {
        &self.input_set
    }

    fn sup_speed(&self) -> &[f64] {
        &self.sup_speed
    }

    fn separable_control(&self) -> Option<SeparableControl> {
        self.separable.clone()
    }
}

/// Scalar linear-quadratic regulator: `f = a`, `g = (x^2 + a^2) / 2`,
/// `v_T = 0`, `E = [-1, 1]`.
#[derive(Debug, Clone, Serialize)]
pub struct LqrBenchmark {
    pub horizon: f64,
    input_set: InputSet,
    sup_speed: [f64; 1],
}

impl LqrBenchmark {
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            input_set: InputSet::symmetric(1, 1.0).expect("unit box"),
            sup_speed: [1.0],
        }
    }

    pub fn exact_value(&self, x: f64, t: f64) -> Result<f64> {
        exact_lqr_value(x, t, self.horizon)
    }

    pub fn exact_input(&self, x: f64, t: f64) -> Result<f64> {
        exact_lqr_input(x, t, self.horizon)
    }

    /// `d/dx` of the exact value function.
    pub fn exact_gradient(&self, x: f64, t: f64) -> Result<f64> {
        exact_lqr_input(x, t, self.horizon).map(|a| -a)
    }
}

impl Default for LqrBenchmark {
    fn default() -> Self {
        Self::new(1.0)
    }
}

impl ControlProblem for LqrBenchmark {
    fn state_dim(&self) -> usize {
        1
    }

    fn dynamics(&self, _x: &[f64], a: &[f64], out: &mut [f64]) {
        out[0] = a[0];
    }

    fn running_cost(&self, x: &[f64], a: &[f64]) -> f64 {
        0.5 * (x[0] * x[0] + a[0] * a[0])
    }

    fn terminal_cost(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn input_set(&self) -> &InputSet {
        &self.input_set
    }

    fn sup_speed(&self) -> &[f64] {
        &self.sup_speed
    }

    fn separable_control(&self) -> Option<SeparableControl> {
        Some(SeparableControl {
            gain: vec![1.0],
            weight: vec![0.5],
        })
    }
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if t > horizon || t < 0.0 || !t.is_finite() {
        return Err(HjbError::out_of_range(format!(
            "t = {t} outside [0, {horizon}]"
        )));
    }
    Ok(())
}

/// Exact LQR value `tanh(T - t) * x^2 / 2`.
pub fn exact_lqr_value(x: f64, t: f64, horizon: f64) -> Result<f64> {
    check_time(t, horizon)?;
    Ok((horizon - t).tanh() * x * x / 2.0)
}

/// Exact LQR feedback `-tanh(T - t) * x`.
pub fn exact_lqr_input(x: f64, t: f64, horizon: f64) -> Result<f64> {
    check_time(t, horizon)?;
    Ok(-(horizon - t).tanh() * x)
}

/// Two-dimensional reach-and-avoid problem with a Gaussian obstacle.
///
/// `f = B a`,
/// `g = (x - x_T)' Q (x - x_T) + S exp(-(x - x_O)' Σ_O^{-1} (x - x_O)) + a' R a`,
/// `v_T = (x - x_T)' Q_T (x - x_T) + S_T exp(-(x - x_O)' Σ_O^{-1} (x - x_O))`.
/// Matrices are diagonal and stored by their diagonals. `sigma_i` and `c` are
/// carried for configuration fidelity and do not enter any cost term.
#[derive(Debug, Clone, Serialize)]
pub struct ObstacleBenchmark2D {
    pub b: [f64; 2],
    pub r: [f64; 2],
    pub q: [f64; 2],
    pub q_t: [f64; 2],
    pub sigma_o: [f64; 2],
    pub sigma_i: [f64; 2],
    pub s: f64,
    pub s_t: f64,
    pub c: f64,
    pub x_t: [f64; 2],
    pub x_o: [f64; 2],
    #[serde(skip)]
    input_set: InputSet,
    #[serde(skip)]
    sup_speed: [f64; 2],
}

impl Default for ObstacleBenchmark2D {
    fn default() -> Self {
        Self::new(ObstacleParams::default()).expect("default parameters are valid")
    }
}

/// Parameters for [`ObstacleBenchmark2D`]; defaults reproduce the reference setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleParams {
    pub b: [f64; 2],
    pub r: [f64; 2],
    pub q: [f64; 2],
    pub q_t: [f64; 2],
    pub sigma_o: [f64; 2],
    pub sigma_i: [f64; 2],
    pub s: f64,
    pub s_t: f64,
    pub c: f64,
    pub x_t: [f64; 2],
    pub x_o: [f64; 2],
    pub input_bound: f64,
}

impl Default for ObstacleParams {
    fn default() -> Self {
        Self {
            b: [1.0, 1.0],
            r: [1.0, 1.0],
            q: [1.0, 1.0],
            q_t: [0.8, 0.8],
            sigma_o: [0.01, 0.01],
            sigma_i: [0.02, 0.02],
            s: 0.2,
            s_t: 0.2,
            c: 1.0,
            x_t: [0.5, 0.5],
            x_o: [-0.1, -0.1],
            input_bound: 1.0,
        }
    }
}

impl ObstacleBenchmark2D {
    pub fn new(p: ObstacleParams) -> Result<Self> {
        let diagonals = [
            ("b", p.b),
            ("r", p.r),
            ("q", p.q),
            ("q_t", p.q_t),
            ("sigma_o", p.sigma_o),
            ("sigma_i", p.sigma_i),
        ];
        for (name, diag) in diagonals {
            if diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(HjbError::invalid(format!(
                    "{name} must have positive diagonal entries"
                )));
            }
        }
        for (name, v) in [("s", p.s), ("s_t", p.s_t), ("c", p.c)] {
            if !(v > 0.0) {
                return Err(HjbError::invalid(format!("{name} must be positive")));
            }
        }
        if !(p.input_bound > 0.0) {
            return Err(HjbError::invalid("input_bound must be positive"));
        }
        Ok(Self {
            b: p.b,
            r: p.r,
            q: p.q,
            q_t: p.q_t,
            sigma_o: p.sigma_o,
            sigma_i: p.sigma_i,
            s: p.s,
            s_t: p.s_t,
            c: p.c,
            x_t: p.x_t,
            x_o: p.x_o,
            input_set: InputSet::symmetric(2, p.input_bound)?,
            sup_speed: [p.b[0].abs() * p.input_bound, p.b[1].abs() * p.input_bound],
        })
    }

    fn obstacle(&self, x: &[f64]) -> f64 {
        let e: f64 = (0..2)
            .map(|d| {
                let z = x[d] - self.x_o[d];
                z * z / self.sigma_o[d]
            })
            .sum();
        (-e).exp()
    }

    fn tracking(weights: &[f64; 2], x: &[f64], target: &[f64; 2]) -> f64 {
        (0..2)
            .map(|d| {
                let z = x[d] - target[d];
                weights[d] * z * z
            })
            .sum()
    }
}

impl ControlProblem for ObstacleBenchmark2D {
    fn state_dim(&self) -> usize {
        2
    }

    fn dynamics(&self, _x: &[f64], a: &[f64], out: &mut [f64]) {
        out[0] = self.b[0] * a[0];
        out[1] = self.b[1] * a[1];
    }

    fn running_cost(&self, x: &[f64], a: &[f64]) -> f64 {
        Self::tracking(&self.q, x, &self.x_t)
            + self.s * self.obstacle(x)
            + self.r[0] * a[0] * a[0]
            + self.r[1] * a[1] * a[1]
    }

    fn terminal_cost(&self, x: &[f64]) -> f64 {
        Self::tracking(&self.q_t, x, &self.x_t) + self.s_t * self.obstacle(x)
    }

    fn input_set(&self) -> &InputSet {
        &self.input_set
    }

    fn sup_speed(&self) -> &[f64] {
        &self.sup_speed
    }

    fn separable_control(&self) -> Option<SeparableControl> {
        Some(SeparableControl {
            gain: self.b.to_vec(),
            weight: self.r.to_vec(),
        })
    }
}

/// Closed-loop trajectory under a piecewise-constant policy.
#[derive(Debug, Clone, Serialize)]
pub struct Rollout {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Control applied on `[t_j, t_{j+1})`; one fewer entry than `states`.
    pub controls: Vec<Vec<f64>>,
    /// `g(X_j, a_j)` per step.
    pub running_costs: Vec<f64>,
    pub terminal_cost: f64,
    pub total_cost: f64,
    /// Set when the state crossed the periodic boundary and was wrapped.
    pub left_domain: bool,
}

/// Forward-Euler closed-loop simulation with zero-order-hold feedback.
///
/// `policy` is indexed `[axis][j - 1]` for `j = 1..=N_t`. On `[t_j, t_{j+1})`
/// the control is read from slice `j + 1`, the minimizer the backward step
/// from `t_{j+1}` to `t_j` used.
pub fn rollout(
    problem: &dyn ControlProblem,
    policy: &[Vec<ScalarField>],
    x0: &[f64],
) -> Result<Rollout> {
    let first = policy
        .first()
        .and_then(|axis| axis.first())
        .ok_or_else(|| HjbError::invalid("empty policy"))?;
    let grid: GridSpec = *first.grid();
    let n = grid.dim();
    if problem.state_dim() != n || x0.len() != n {
        return Err(HjbError::invalid("state dimension mismatch"));
    }
    if policy.len() != problem.control_dim() {
        return Err(HjbError::invalid("policy needs one series per control axis"));
    }
    if !grid.contains(x0) {
        return Err(HjbError::out_of_range(format!("x0 = {x0:?} outside domain")));
    }
    let dt = grid.dt();
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut out = Rollout {
        times: vec![0.0],
        states: vec![x.clone()],
        controls: Vec::with_capacity(grid.n_time()),
        running_costs: Vec::with_capacity(grid.n_time()),
        terminal_cost: 0.0,
        total_cost: 0.0,
        left_domain: false,
    };
    let mut total = 0.0;
    for j in 0..grid.n_time() {
        let t_next = grid.time(j + 1);
        let a = policy
            .iter()
            .map(|series| extend_piecewise_constant(series, &x, t_next))
            .collect::<Result<Vec<f64>>>()?;
        let g = problem.running_cost(&x, &a);
        total += dt * g;
        problem.dynamics(&x, &a, &mut f);
        for d in 0..n {
            x[d] += dt * f[d];
        }
        if !grid.contains(&x) {
            out.left_domain = true;
            for c in x.iter_mut() {
                *c = grid.wrap_coord(*c);
            }
        }
        out.times.push(grid.time(j + 1));
        out.states.push(x.clone());
        out.controls.push(a);
        out.running_costs.push(g);
    }
    out.terminal_cost = problem.terminal_cost(&x);
    out.total_cost = total + out.terminal_cost;
    Ok(out)
}
