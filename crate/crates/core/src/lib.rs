// SPDX-License-Identifier: MIT OR Apache-2.0

#![forbid(unsafe_code)]

pub mod data;
pub mod error;
pub mod gram;
pub mod kernels;

pub use data::ObservationMatrix;
pub use error::{Error, Result};
pub use gram::{build_gram, GramContext};
pub use kernels::{kernel_value, pairwise_l2_inner, KernelFamily, KernelSpec};
pub mod detect;
pub mod seeded;
pub mod stats;

pub use detect::{detect, select_threshold, ChangePointSet, Detection, DetectionConfig, Threshold};
pub use seeded::{SeededInterval, SeededIntervalSet};
pub mod refine;

pub use refine::{refine, refinement_intervals, MeanAnchor, RefineConfig, RefinedEstimate};
pub mod lrv;

pub use lrv::{block_lrv, default_r, estimate_lrv, KappaSource, LrvConfig, LrvEstimate, LrvReport};
pub mod inference;

pub use inference::{
    confidence_interval, simulate_standard_quantiles, CiInputs, ConfidenceInterval, QuantileTable,
    SimulationGrid,
};
pub mod pipeline;
pub mod simlab;

pub use pipeline::{analyze, Analysis, Calibration, PipelineConfig};
