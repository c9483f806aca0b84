//! Error norms, order fits, resolution studies, minimizer diagnostics and the
//! randomized property suites.

mod epi;
mod norms;
pub mod properties;
mod study;

pub use epi::{argmin_set, distance_to_set, epi_diagnostic, EpiDiagnostic};
pub use norms::{fit_order, grid_norm, sup_norm, MeasurementRegion};
pub use study::{
    convergence_study_lqr, lqr_errors, reference_errors, self_convergence_study,
    ConvergenceReport, Resolution,
};
