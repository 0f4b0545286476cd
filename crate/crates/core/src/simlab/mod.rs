// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic scenarios and Monte-Carlo evaluation.

mod metrics;
mod scenario;
mod study;

pub use metrics::{hausdorff, matched_abs_errors};
pub use scenario::{
    generate_scenario, piecewise_constant, Innovation, LabeledSeries, ScenarioId, ScenarioSpec,
};
pub use study::{
    run_study, run_study_with, AlphaSummary, EvalReport, StudyConfig, REPORT_SCHEMA_VERSION,
};
