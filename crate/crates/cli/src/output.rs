// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON documents written by the subcommands.

use std::collections::BTreeMap;
use std::time::Duration;

use seedcp::simlab::ScenarioSpec;
use seedcp::{
    Analysis, ChangePointSet, Detection, DetectionConfig, KernelFamily, PipelineConfig,
    QuantileTable, RefineConfig, RefinedEstimate, Threshold,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub schema_version: u32,
    pub true_cps: Vec<usize>,
    pub scenario: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub len: usize,
    pub p: usize,
    pub ar_coef: f64,
    pub burn_in: usize,
}

impl TruthSidecar {
    pub fn new(spec: &ScenarioSpec, true_cps: &[usize]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            true_cps: true_cps.to_vec(),
            scenario: spec.id.to_string(),
            seed: spec.seed,
            len: spec.len,
            p: spec.dim,
            ar_coef: spec.ar_coef,
            burn_in: spec.burn_in,
        }
    }
}

/// Echo of every detection setting in force.
#[derive(Debug, Serialize, Deserialize)]
pub struct DetectionSettings {
    pub kernel: KernelFamily,
    pub r: f64,
    pub c_h: f64,
    pub threshold: Threshold,
    pub depth_multiplier: f64,
    pub trim_override: Option<usize>,
    pub min_segment: usize,
}

impl From<&DetectionConfig> for DetectionSettings {
    fn from(cfg: &DetectionConfig) -> Self {
        Self {
            kernel: cfg.kernel,
            r: cfg.smoothness,
            c_h: cfg.bandwidth_scale,
            threshold: cfg.threshold,
            depth_multiplier: cfg.depth_multiplier,
            trim_override: cfg.trim_override,
            min_segment: cfg.min_segment,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DetectOutput {
    pub schema_version: u32,
    #[serde(rename = "T")]
    pub len: usize,
    #[serde(rename = "K_hat")]
    pub k_hat: usize,
    pub estimates: Vec<usize>,
    pub tau_used: f64,
    pub rho_used: f64,
    pub h_used: f64,
    pub trim: usize,
    pub depth: u32,
    pub max_statistic: f64,
    pub settings: DetectionSettings,
    pub diagnostics: Vec<String>,
    pub runtime_ms: f64,
}

impl DetectOutput {
    pub fn new(d: &Detection, cfg: &DetectionConfig, elapsed: Duration) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            len: d.change_points.len,
            k_hat: d.change_points.k_hat(),
            estimates: d.change_points.estimates.clone(),
            tau_used: d.threshold,
            rho_used: d.rho,
            h_used: d.bandwidth,
            trim: d.trim,
            depth: d.depth,
            max_statistic: d.max_statistic,
            settings: cfg.into(),
            diagnostics: d.diagnostics.clone(),
            runtime_ms: millis(elapsed),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RefinedPoint {
    pub k: usize,
    pub eta_hat: usize,
    pub eta_tilde: usize,
    pub window: [usize; 2],
    pub kappa_hat: f64,
    pub h1: Option<f64>,
    pub degenerate: bool,
}

impl From<&RefinedEstimate> for RefinedPoint {
    fn from(r: &RefinedEstimate) -> Self {
        Self {
            k: r.k,
            eta_hat: r.eta_hat,
            eta_tilde: r.eta_tilde,
            window: [r.window.0, r.window.1],
            kappa_hat: r.kappa_hat,
            h1: r.h1,
            degenerate: r.degenerate,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RefineSettings {
    pub h_tilde: f64,
    pub c_kappa: f64,
    pub anchor: seedcp::MeanAnchor,
}

impl From<&RefineConfig> for RefineSettings {
    fn from(cfg: &RefineConfig) -> Self {
        Self {
            h_tilde: cfg.h_tilde,
            c_kappa: cfg.c_kappa,
            anchor: cfg.anchor,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RefineOutput {
    pub schema_version: u32,
    #[serde(rename = "T")]
    pub len: usize,
    #[serde(rename = "K_hat")]
    pub k_hat: usize,
    pub preliminary: Vec<usize>,
    /// `None` when the preliminary estimates were read from a file.
    pub tau_used: Option<f64>,
    pub refined: Vec<RefinedPoint>,
    pub settings: RefineSettings,
    pub runtime_ms: f64,
}

impl RefineOutput {
    pub fn new(
        prelim: &ChangePointSet,
        tau: Option<f64>,
        refined: &[RefinedEstimate],
        cfg: &RefineConfig,
        elapsed: Duration,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            len: prelim.len,
            k_hat: prelim.k_hat(),
            preliminary: prelim.estimates.clone(),
            tau_used: tau,
            refined: refined.iter().map(RefinedPoint::from).collect(),
            settings: cfg.into(),
            runtime_ms: millis(elapsed),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InferredPoint {
    pub k: usize,
    pub eta_hat: usize,
    pub eta_tilde: usize,
    pub window: [usize; 2],
    pub kappa_hat: f64,
    /// Jump size entering the interval scale.
    pub kappa_used: Option<f64>,
    pub h1: Option<f64>,
    pub sigma2_inf: Option<f64>,
    /// Intervals keyed by `alpha`.
    pub ci: BTreeMap<String, [usize; 2]>,
    pub flags: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QuantileInfo {
    pub seed: u64,
    pub n_draws: usize,
    pub grid_step: f64,
    pub grid_halfwidth: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InferOutput {
    pub schema_version: u32,
    #[serde(rename = "T")]
    pub len: usize,
    #[serde(rename = "K_hat")]
    pub k_hat: usize,
    pub tau_used: f64,
    pub h_used: f64,
    pub lrv_blocks: Option<usize>,
    pub alphas: Vec<f64>,
    pub calibration: seedcp::Calibration,
    pub quantiles: QuantileInfo,
    pub detection: DetectionSettings,
    pub refine: RefineSettings,
    pub change_points: Vec<InferredPoint>,
    pub notes: Vec<String>,
    pub runtime_ms: f64,
}

pub fn alpha_key(alpha: f64) -> String {
    format!("{alpha}")
}

impl InferOutput {
    pub fn new(
        a: &Analysis,
        cfg: &PipelineConfig,
        table: &QuantileTable,
        elapsed: Duration,
    ) -> Self {
        let mut notes = a.detection.diagnostics.clone();
        if a.refined.is_empty() {
            notes.push("no change points detected; nothing to refine or cover".into());
        }
        for s in &a.lrv.skipped {
            notes.push(format!("change point {}: {}", s.k, s.reason));
        }
        let change_points = a
            .refined
            .iter()
            .map(|r| {
                let lrv = a.lrv.get(r.k);
                let mut flags = Vec::new();
                if r.degenerate {
                    flags.push("degenerate_refinement".to_string());
                }
                let mut ci = BTreeMap::new();
                for c in a.intervals_for(r.k) {
                    if c.degenerate && !flags.iter().any(|f| f == "degenerate_interval") {
                        flags.push("degenerate_interval".into());
                    }
                    ci.insert(alpha_key(c.alpha), [c.lo, c.hi]);
                }
                if lrv.is_none() {
                    flags.push("no_variance_estimate".into());
                }
                InferredPoint {
                    k: r.k,
                    eta_hat: r.eta_hat,
                    eta_tilde: r.eta_tilde,
                    window: [r.window.0, r.window.1],
                    kappa_hat: r.kappa_hat,
                    kappa_used: lrv.map(|l| l.kappa_used),
                    h1: r.h1,
                    sigma2_inf: lrv.map(|l| l.sigma2_inf),
                    ci,
                    flags,
                }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            len: a.detection.change_points.len,
            k_hat: a.detection.change_points.k_hat(),
            tau_used: a.detection.threshold,
            h_used: a.detection.bandwidth,
            lrv_blocks: a.lrv_blocks,
            alphas: cfg.alphas.clone(),
            calibration: cfg.calibration,
            quantiles: QuantileInfo {
                seed: table.seed,
                n_draws: table.n_draws,
                grid_step: table.grid_step,
                grid_halfwidth: table.grid_halfwidth,
            },
            detection: (&cfg.detection).into(),
            refine: (&cfg.refine).into(),
            change_points,
            notes,
            runtime_ms: millis(elapsed),
        }
    }
}
