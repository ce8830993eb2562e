//! Manufactured solutions, error norms and the numerical studies.

mod cases;
mod norms;
mod studies;

pub use cases::{manufactured_case, ManufacturedCase, Profile, CASE_NAMES};
pub use norms::{
    error_norms_final_time, error_norms_spacetime, final_time_slice, spatial_errors, spatial_trace,
    FinalTimeErrors, SpaceTimeErrors,
};
pub use studies::{
    cfl_sweep, classify, compare_dof_matched, convergence_study, dof_matched_elements,
    expected_stability, median, observed_rate, plan_convergence, run_cell, stability_config,
    stability_row, stability_study, timing_study, CellOptions, CellResult, CflSweep, Clock,
    ComparisonRow, ConvergenceRow, ConvergenceTable, DofMatch, Rates, Stability, StabilityReport,
    StabilityRow, TimeRegularity, TimingRow, BLOWUP_LIMIT, GROWTH_LIMIT,
};
