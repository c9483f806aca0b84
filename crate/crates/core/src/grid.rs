//! Uniform space-time grids over a periodic box and piecewise-constant fields.
//!
//! Each spatial axis covers `[-L, L]` with `2 * N` stored nodes
//! `x_i = i * dx` for `i = -N..N-1`; the node `i = N` is identified with
//! `i = -N`. Storage index `k = i + N` runs over `0..2N`. Two-dimensional
//! fields are stored row-major with axis 0 outermost.

use serde::Serialize;

use crate::error::{HjbError, Result};

/// Largest supported state dimension.
pub const MAX_DIM: usize = 2;

/// Relative slack used when snapping a coordinate onto a cell boundary.
const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    n_space: usize,
    horizon: f64,
    n_time: usize,
    dx: f64,
    dt: f64,
    alpha: f64,
}

/// Builds a grid from partition counts.
///
/// `dx = half_width / n_space`, `dt = horizon / n_time`, `alpha = dt / dx`.
pub fn make_grid(
    dim: usize,
    half_width: f64,
    n_space: usize,
    horizon: f64,
    n_time: usize,
) -> Result<GridSpec> {
    if dim == 0 {
        return Err(HjbError::invalid("dim must be positive"));
    }
    if dim > MAX_DIM {
        return Err(HjbError::invalid(format!(
            "dim must be 1 or 2, got {dim}"
        )));
    }
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(HjbError::invalid("half_width must be positive"));
    }
    if n_space == 0 {
        return Err(HjbError::invalid("n_space must be positive"));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(HjbError::invalid("horizon must be positive"));
    }
    if n_time == 0 {
        return Err(HjbError::invalid("n_time must be positive"));
    }
    let dx = half_width / n_space as f64;
    let dt = horizon / n_time as f64;
    Ok(GridSpec {
        dim,
        half_width,
        n_space,
        horizon,
        n_time,
        dx,
        dt,
        alpha: dt / dx,
    })
}

impl GridSpec {
    /// Builds a grid from a spatial step and a CFL ratio `dt = alpha * dx`.
    ///
    /// `half_width / dx` and `horizon / dt` must both be (close to) integers.
    pub fn from_steps(dim: usize, half_width: f64, dx: f64, horizon: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(HjbError::invalid("dx must be positive"));
        }
        if !(dt > 0.0) {
            return Err(HjbError::invalid("dt must be positive"));
        }
        let n_space = whole_ratio(half_width, dx, "half_width / dx")?;
        let n_time = whole_ratio(horizon, dt, "horizon / dt")?;
        make_grid(dim, half_width, n_space, horizon, n_time)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `dt / dx`; identical on every axis.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn nodes_per_axis(&self) -> usize {
        2 * self.n_space
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    /// Coordinate of storage index `k` along any axis.
    pub fn coord(&self, k: usize) -> f64 {
        (k as i64 - self.n_space as i64) as f64 * self.dx
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    /// Storage index of the signed node index `i` (periodic).
    pub fn storage_index(&self, i: i64) -> usize {
        wrap_index(i + self.n_space as i64, self.nodes_per_axis())
    }

    /// Per-axis storage indices of a flat node index.
    pub fn unflatten(&self, flat: usize) -> [usize; MAX_DIM] {
        let n = self.nodes_per_axis();
        match self.dim {
            1 => [flat, 0],
            _ => [flat / n, flat % n],
        }
    }

    pub fn flatten(&self, idx: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => idx[0],
            _ => idx[0] * self.nodes_per_axis() + idx[1],
        }
    }

    /// Coordinates of a flat node index; only the first `dim` entries are used.
    pub fn node_point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unflatten(flat);
        let mut p = [0.0; MAX_DIM];
        for d in 0..self.dim {
            p[d] = self.coord(idx[d]);
        }
        p
    }

    /// Flat index of the neighbour `shift` nodes away along `axis`, wrapped.
    pub fn neighbor(&self, flat: usize, axis: usize, shift: i64) -> usize {
        let mut idx = self.unflatten(flat);
        idx[axis] = wrap_index(idx[axis] as i64 + shift, self.nodes_per_axis());
        self.flatten(idx)
    }

    /// Maps `x` into `[-L, L)` periodically.
    pub fn wrap_coord(&self, x: f64) -> f64 {
        let l = self.half_width;
        (x + l).rem_euclid(2.0 * l) - l
    }

    /// Whether `x` lies in the stored box `[-L, L)` on every axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .take(self.dim)
            .all(|&c| c >= -self.half_width && c < self.half_width)
    }

    /// Storage index of the half-open cell `[x_i - dx/2, x_i + dx/2)` containing `x`.
    pub fn cell_of(&self, x: f64) -> usize {
        let q = self.wrap_coord(x) / self.dx + 0.5;
        let i = snapped_floor(q);
        self.storage_index(i)
    }

    /// Index `j` of the time cell `[t_j, t_{j+1})` containing `t`; `t = T` maps to `N_t`.
    pub fn time_cell_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-12 * self.horizon;
        if !(t >= -tol && t <= self.horizon + tol) {
            return Err(HjbError::out_of_range(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        let j = snapped_floor(t / self.dt).max(0) as usize;
        Ok(j.min(self.n_time))
    }

    /// Flat index of the cell containing the point `x`.
    pub fn flat_cell_of(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; MAX_DIM];
        for d in 0..self.dim {
            idx[d] = self.cell_of(x[d]);
        }
        self.flatten(idx)
    }
}

/// `i mod n_nodes` in `0..n_nodes`.
pub fn wrap_index(i: i64, n_nodes: usize) -> usize {
    debug_assert!(n_nodes >= 1);
    i.rem_euclid(n_nodes as i64) as usize
}

fn snapped_floor(q: f64) -> i64 {
    let up = q.ceil();
    if up - q < SNAP * q.abs().max(1.0) {
        up as i64
    } else {
        q.floor() as i64
    }
}

fn whole_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-6 * n {
        return Err(HjbError::invalid(format!(
            "{what} = {r} is not a positive integer"
        )));
    }
    Ok(n as usize)
}

/// Values of one time slice, one per spatial node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    time_index: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, time_index: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(HjbError::invalid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Self {
            grid,
            time_index,
            values,
        })
    }

    pub fn constant(grid: GridSpec, time_index: usize, c: f64) -> Self {
        Self {
            grid,
            time_index,
            values: vec![c; grid.node_count()],
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: GridSpec, time_index: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|k| {
                let p = grid.node_point(k);
                f(&p[..grid.dim()])
            })
            .collect();
        Self {
            grid,
            time_index,
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, flat: usize) -> f64 {
        self.values[flat]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Piecewise-constant value at `x` (periodic wrap applied).
    pub fn sample(&self, x: &[f64]) -> f64 {
        self.values[self.grid.flat_cell_of(x)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Evaluates the piecewise-constant extension of a time series of slices at `(x, t)`.
///
/// The slices must share a grid and carry consecutive time indices. Queries
/// whose time cell is not covered by the series (a policy series starts at
/// `j = 1`) use the nearest covered slice.
pub fn extend_piecewise_constant(series: &[ScalarField], x: &[f64], t: f64) -> Result<f64> {
    let first = series
        .first()
        .ok_or_else(|| HjbError::invalid("empty field series"))?;
    let grid = first.grid();
    if x.len() < grid.dim() {
        return Err(HjbError::invalid(format!(
            "point has {} coordinates, grid dimension is {}",
            x.len(),
            grid.dim()
        )));
    }
    let j = grid.time_cell_of(t)?;
    let lo = first.time_index();
    let hi = lo + series.len() - 1;
    let slice = &series[j.clamp(lo, hi) - lo];
    debug_assert_eq!(slice.time_index(), j.clamp(lo, hi));
    Ok(slice.sample(x))
}
