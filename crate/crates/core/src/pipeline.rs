// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detection, refinement, long-run variance and intervals in one call.

use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::detect::{detect, Detection, DetectionConfig};
use crate::error::Result;
use crate::inference::{
    confidence_interval, CiInputs, ConfidenceInterval, QuantileTable, SimulationGrid,
    OBJECTIVE_LAW_FACTOR, STATED_LAW_FACTOR,
};
use crate::lrv::{default_r, estimate_lrv, KappaSource, LrvConfig, LrvReport};
use crate::refine::{refine, refinement_intervals, RefineConfig, RefinedEstimate};

/// How the interval scale is formed from the plug-in estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub kappa: KappaSource,
    /// Multiplier on the long-run variance.
    pub law_factor: f64,
}

impl Calibration {
    /// Small-bandwidth jump estimate and the law `argmin sigma B(u) + |u|`.
    pub const STATED: Calibration = Calibration {
        kappa: KappaSource::JumpEstimate,
        law_factor: STATED_LAW_FACTOR,
    };
    /// Jump size at the refit bandwidth, so the direction, its norm and
    /// the projection variance share one bandwidth, and the law implied
    /// by the refinement objective.
    pub const MATCHED: Calibration = Calibration {
        kappa: KappaSource::Refit,
        law_factor: OBJECTIVE_LAW_FACTOR,
    };
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration::MATCHED
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detection: DetectionConfig,
    pub refine: RefineConfig,
    /// Number of LRV blocks; `None` uses [`default_r`].
    pub lrv_blocks: Option<usize>,
    pub alphas: Vec<f64>,
    pub grid: SimulationGrid,
    pub calibration: Calibration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let detection = DetectionConfig::default();
        Self {
            refine: RefineConfig::from_detection(&detection),
            detection,
            lrv_blocks: None,
            alphas: vec![0.05],
            grid: SimulationGrid::default(),
            calibration: Calibration::default(),
        }
    }
}

impl PipelineConfig {
    /// Sets the smoothness in both stages.
    pub fn with_smoothness(mut self, r: f64) -> Self {
        self.detection.smoothness = r;
        self.refine.smoothness = r;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub detection: Detection,
    pub refined: Vec<RefinedEstimate>,
    pub lrv: LrvReport,
    pub lrv_blocks: Option<usize>,
    pub intervals: Vec<ConfidenceInterval>,
}

impl Analysis {
    pub fn refined_points(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.refined.iter().map(|r| r.eta_tilde).collect();
        v.sort_unstable();
        v
    }

    pub fn intervals_for(&self, k: usize) -> impl Iterator<Item = &ConfidenceInterval> {
        self.intervals.iter().filter(move |c| c.k == k)
    }
}

/// Runs detection and refinement, and with a quantile table also the
/// long-run variance and intervals at every configured level.
pub fn analyze(
    obs: &ObservationMatrix,
    cfg: &PipelineConfig,
    table: Option<&QuantileTable>,
) -> Result<Analysis> {
    let detection = detect(obs, &cfg.detection)?;
    let mut analysis = Analysis {
        refined: Vec::new(),
        lrv: LrvReport::default(),
        lrv_blocks: None,
        intervals: Vec::new(),
        detection,
    };
    if analysis.detection.change_points.is_empty() {
        return Ok(analysis);
    }
    analysis.refined = refine(obs, &analysis.detection.change_points, &cfg.refine)?;
    let Some(table) = table else {
        return Ok(analysis);
    };
    let blocks = cfg
        .lrv_blocks
        .unwrap_or_else(|| default_r(&refinement_intervals(&analysis.detection.change_points)));
    analysis.lrv_blocks = Some(blocks);
    analysis.lrv = estimate_lrv(
        obs,
        &analysis.refined,
        blocks,
        &LrvConfig {
            kernel: cfg.refine.kernel,
            smoothness: cfg.refine.smoothness,
            kappa: cfg.calibration.kappa,
        },
    )?;
    for est in &analysis.lrv.estimates {
        let r = &analysis.refined[est.k - 1];
        if est.kappa_used <= 0.0 {
            continue;
        }
        let input = CiInputs {
            k: est.k,
            eta_tilde: r.eta_tilde,
            kappa_hat: est.kappa_used,
            sigma2_inf: est.sigma2_inf,
            dim: obs.dim(),
            smoothness: cfg.refine.smoothness,
            law_factor: cfg.calibration.law_factor,
            len: obs.len(),
        };
        for &alpha in &cfg.alphas {
            analysis
                .intervals
                .push(confidence_interval(&input, alpha, table)?);
        }
    }
    Ok(analysis)
}
