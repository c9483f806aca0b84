//! Distance from the scheme's feedback to the argmin set of the exact
//! Hamiltonian `h(a; x, t) = f(x, a) . grad v(x, t) + g(x, a)`.

use serde::Serialize;

use crate::error::{HjbError, Result};
use crate::ocp::ControlProblem;
use crate::upwind::SolveResult;

/// Spacing of the dense scan of `E`.
pub const SCAN_SPACING: f64 = 1e-4;
/// Objective slack defining membership in the argmin set.
pub const MEMBERSHIP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct EpiDiagnostic {
    pub sample_points: Vec<(f64, f64)>,
    /// `distances[s][r]`: sample `s`, resolution `r` (ordered as the solves).
    pub distances: Vec<Vec<f64>>,
    pub skipped: Vec<(f64, f64)>,
    /// Fraction of kept samples whose finest-resolution distance does not
    /// exceed the coarsest-resolution one.
    pub non_increasing_fraction: f64,
    /// Median distance per resolution.
    pub medians: Vec<f64>,
}

/// Argmin set of `h` over a scalar input interval, as closed intervals.
pub fn argmin_set(h: impl Fn(f64) -> f64, lower: f64, upper: f64) -> Vec<(f64, f64)> {
    let n = ((upper - lower) / SCAN_SPACING).round().max(1.0) as usize;
    let point = |k: usize| {
        if k == n {
            upper
        } else {
            lower + k as f64 * (upper - lower) / n as f64
        }
    };
    let values: Vec<f64> = (0..=n).map(|k| h(point(k))).collect();
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut intervals = Vec::new();
    let mut open: Option<usize> = None;
    for (k, v) in values.iter().enumerate() {
        let member = *v <= best + MEMBERSHIP_TOLERANCE;
        match (member, open) {
            (true, None) => open = Some(k),
            (false, Some(start)) => {
                intervals.push((point(start), point(k - 1)));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        intervals.push((point(start), point(n)));
    }
    intervals
}

pub fn distance_to_set(a: f64, set: &[(f64, f64)]) -> f64 {
    set.iter()
        .map(|&(lo, hi)| {
            if a < lo {
                lo - a
            } else if a > hi {
                a - hi
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Computes argmin distances of the scheme's feedback at `samples` for each
/// solve (coarsest first). `gradient(x, t)` returns the exact `d/dx v`.
///
/// Scalar state and scalar control only. Samples outside the domain are
/// recorded in `skipped`.
pub fn epi_diagnostic(
    problem: &dyn ControlProblem,
    solves: &[SolveResult],
    samples: &[(f64, f64)],
    gradient: impl Fn(f64, f64) -> Result<f64>,
) -> Result<EpiDiagnostic> {
    if problem.state_dim() != 1 || problem.control_dim() != 1 {
        return Err(HjbError::invalid("epi diagnostic needs scalar state and control"));
    }
    let first = solves
        .first()
        .ok_or_else(|| HjbError::invalid("no solves supplied"))?;
    let e = problem.input_set();
    let (lo, hi) = (e.lower()[0], e.upper()[0]);
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    let mut distances = Vec::new();
    for &(x, t) in samples {
        let inside = first.grid.contains(&[x]) && t >= 0.0 && t <= first.grid.horizon();
        if !inside {
            log::info!("epi diagnostic: sample ({x}, {t}) outside the domain, skipped");
            skipped.push((x, t));
            continue;
        }
        let p = gradient(x, t)?;
        let h = |a: f64| {
            let mut f = [0.0];
            problem.dynamics(&[x], &[a], &mut f);
            f[0] * p + problem.running_cost(&[x], &[a])
        };
        let set = argmin_set(h, lo, hi);
        let row = solves
            .iter()
            .map(|s| Ok(distance_to_set(s.policy_at(&[x], t)?[0], &set)))
            .collect::<Result<Vec<f64>>>()?;
        kept.push((x, t));
        distances.push(row);
    }
    let last = solves.len() - 1;
    let non_increasing = distances.iter().filter(|d| d[last] <= d[0]).count();
    let non_increasing_fraction = if distances.is_empty() {
        f64::NAN
    } else {
        non_increasing as f64 / distances.len() as f64
    };
    let medians = (0..solves.len())
        .map(|r| {
            let mut col: Vec<f64> = distances.iter().map(|d| d[r]).collect();
            median(&mut col)
        })
        .collect();
    Ok(EpiDiagnostic {
        sample_points: kept,
        distances,
        skipped,
        non_increasing_fraction,
        medians,
    })
}
