use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::grid::{GridSpec, ScalarField};

/// Space-time box over which error sums are taken (bounds inclusive).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
}

impl MeasurementRegion {
    /// The whole stored grid.
    pub fn full(grid: &GridSpec) -> Self {
        let l = grid.half_width();
        Self {
            lower: vec![-l; grid.dim()],
            upper: vec![l; grid.dim()],
            t_start: 0.0,
            t_end: grid.horizon(),
        }
    }

    /// `[-L/2, L/2]^dim x [0, T]`.
    pub fn interior_half(dim: usize, half_width: f64, horizon: f64) -> Self {
        Self {
            lower: vec![-half_width / 2.0; dim],
            upper: vec![half_width / 2.0; dim],
            t_start: 0.0,
            t_end: horizon,
        }
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(x)
            .all(|((lo, hi), c)| *c >= lo - slack(*lo) && *c <= hi + slack(*hi))
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.t_start - slack(self.t_start) && t <= self.t_end + slack(self.t_end)
    }
}

fn slack(bound: f64) -> f64 {
    1e-9 * bound.abs().max(1.0)
}

/// Discrete L2 norm `{sum z^2 dx^dim dt}^{1/2}` over the nodes inside `region`.
///
/// `slices` are time slices of a pointwise error field on a common grid; a
/// slice at index `j` sits at `t_j`.
pub fn grid_norm(slices: &[ScalarField], region: &MeasurementRegion) -> Result<f64> {
    let grid = *slices
        .first()
        .ok_or_else(|| HjbError::invalid("no slices to measure"))?
        .grid();
    if region.lower.len() != grid.dim() || region.upper.len() != grid.dim() {
        return Err(HjbError::invalid("region dimension does not match grid"));
    }
    let inside: Vec<usize> = (0..grid.node_count())
        .filter(|&k| region.contains_point(&grid.node_point(k)[..grid.dim()]))
        .collect();
    let weight = grid.dx().powi(grid.dim() as i32) * grid.dt();
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in slices {
        if !region.contains_time(grid.time(s.time_index())) {
            continue;
        }
        for &k in &inside {
            let z = s.get(k);
            sum += z * z;
            count += 1;
        }
    }
    if count == 0 {
        return Err(HjbError::invalid("measurement region contains no nodes"));
    }
    Ok((sum * weight).sqrt())
}

/// Largest `|z|` over the nodes inside `region`.
pub fn sup_norm(slices: &[ScalarField], region: &MeasurementRegion) -> Result<f64> {
    let grid = *slices
        .first()
        .ok_or_else(|| HjbError::invalid("no slices to measure"))?
        .grid();
    let mut worst: Option<f64> = None;
    for s in slices {
        if !region.contains_time(grid.time(s.time_index())) {
            continue;
        }
        for k in 0..grid.node_count() {
            if region.contains_point(&grid.node_point(k)[..grid.dim()]) {
                let z = s.get(k).abs();
                worst = Some(worst.map_or(z, |w| w.max(z)));
            }
        }
    }
    worst.ok_or_else(|| HjbError::invalid("measurement region contains no nodes"))
}

/// Least-squares slope of `ln(error)` against `ln(dx)`.
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(HjbError::invalid("order fit needs at least two points"));
    }
    for &(h, e) in points {
        if !(h > 0.0) || !(e > 0.0) {
            return Err(HjbError::invalid(format!(
                "order fit needs positive step and error, got ({h}, {e})"
            )));
        }
    }
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(h, e)| (sx + h.ln(), sy + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(h, e) in points {
        let dx = h.ln() - mx;
        sxx += dx * dx;
        sxy += dx * (e.ln() - my);
    }
    if sxx == 0.0 {
        return Err(HjbError::invalid("order fit needs distinct step sizes"));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn zero_and_constant_fields() {
        let g = make_grid(1, 1.0, 20, 1.0, 40).unwrap();
        let region = MeasurementRegion::full(&g);
        let zero: Vec<_> = (0..=40).map(|j| ScalarField::constant(g, j, 0.0)).collect();
        assert_eq!(grid_norm(&zero, &region).unwrap(), 0.0);

        // 40 nodes x 41 slices at weight 0.05 * 0.025
        let ones: Vec<_> = (0..=40).map(|j| ScalarField::constant(g, j, 1.0)).collect();
        let expected = (40.0 * 41.0 * 0.05 * 0.025f64).sqrt();
        let got = grid_norm(&ones, &region).unwrap();
        assert!((got - expected).abs() < 1e-14, "{got}");
        assert!((got - 1.4318).abs() < 1e-4);

        let c = 3.5;
        let cs: Vec<_> = (0..=40).map(|j| ScalarField::constant(g, j, c)).collect();
        assert!((grid_norm(&cs, &region).unwrap() - c * expected).abs() < 1e-13);
    }

    #[test]
    fn empty_region_rejected() {
        let g = make_grid(1, 1.0, 4, 1.0, 4).unwrap();
        let s = vec![ScalarField::constant(g, 0, 1.0)];
        let region = MeasurementRegion {
            lower: vec![0.1],
            upper: vec![0.2],
            t_start: 0.0,
            t_end: 1.0,
        };
        assert!(grid_norm(&s, &region).is_err());
        assert!(sup_norm(&s, &region).is_err());
    }

    #[test]
    fn fit_order_examples() {
        assert!((fit_order(&[(0.1, 0.01), (0.05, 0.005)]).unwrap() - 1.0).abs() < 1e-12);
        assert!((fit_order(&[(0.1, 0.01), (0.05, 0.0025)]).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_order(&[(0.1, 0.3), (0.05, 0.3), (0.025, 0.3)]).unwrap().abs() < 1e-12);
        assert!(fit_order(&[(0.1, 0.0), (0.05, 0.1)]).is_err());
        assert!(fit_order(&[(0.1, 0.1)]).is_err());
    }

    #[test]
    fn fit_order_exact_on_power_laws() {
        for &p in &[0.46, 1.01, 1.26, 2.5] {
            let pts: Vec<_> = [0.2, 0.1, 0.05, 0.025, 0.0125]
                .iter()
                .map(|&h: &f64| (h, 0.7 * h.powf(p)))
                .collect();
            assert!((fit_order(&pts).unwrap() - p).abs() < 1e-10);
        }
    }
}
