// SPDX-License-Identifier: MIT OR Apache-2.0

//! Seeded binary segmentation over kernel CUSUM statistics.
//!
//! Every seeded interval `I = (alpha, beta]` longer than twice the trimming
//! gets its best split `b_I` and the attained CUSUM norm `a_I`. Within the
//! current search span `(s, e]` the interval with the largest `a_I` wins; if
//! `a_I` exceeds the threshold, `b_I` is recorded and the search recurses on
//! `(s, b_I]` and `(b_I + 1, e]`. The per-interval statistics do not depend
//! on the span, so they are computed once up front.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::gram::GramContext;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::seeded::{SeededInterval, SeededIntervalSet, DEFAULT_DEPTH_MULTIPLIER};
use crate::stats::{quantile_sorted, sorted_copy};

/// How the detection threshold `tau` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Threshold {
    /// A fixed value.
    Value { tau: f64 },
    /// `c_tau T^{p / (4r + 2p)} sqrt(ln T)`.
    Theory { c_tau: f64 },
    /// `(1 - 1/T)` quantile of the top-level scan maximum over random
    /// time permutations of the sample.
    Permutation { permutations: usize, seed: u64 },
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Permutation {
            permutations: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Theory,
    Permutation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub kernel: KernelFamily,
    /// Smoothness `r` of the densities.
    pub smoothness: f64,
    /// Bandwidth `h`; `None` means `bandwidth_scale * T^{-1/(2r + p)}`.
    pub bandwidth: Option<f64>,
    pub bandwidth_scale: f64,
    pub threshold: Threshold,
    /// `C` in `ceil(C ln T)` seeded layers.
    pub depth_multiplier: f64,
    /// Replaces `ln(T) h^{-p}` as the trimming.
    pub trim_override: Option<usize>,
    /// Search spans shorter than this are not scanned.
    pub min_segment: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Gaussian,
            smoothness: 2.0,
            bandwidth: None,
            bandwidth_scale: 2.0,
            threshold: Threshold::default(),
            depth_multiplier: DEFAULT_DEPTH_MULTIPLIER,
            trim_override: None,
            min_segment: 2,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.smoothness.is_finite() && self.smoothness > 0.0) {
            return Err(Error::config(format!(
                "smoothness r must be positive, got {}",
                self.smoothness
            )));
        }
        if let Some(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::config(format!(
                    "bandwidth must be positive, got {h}"
                )));
            }
        }
        if !(self.bandwidth_scale.is_finite() && self.bandwidth_scale > 0.0) {
            return Err(Error::config("bandwidth scale must be positive"));
        }
        match self.threshold {
            Threshold::Value { tau } if !(tau.is_finite() && tau > 0.0) => {
                return Err(Error::config(format!(
                    "threshold must be positive, got {tau}"
                )))
            }
            Threshold::Theory { c_tau } if !(c_tau.is_finite() && c_tau > 0.0) => {
                return Err(Error::config("c_tau must be positive"))
            }
            Threshold::Permutation { permutations, .. } if permutations < 10 => {
                return Err(Error::config(format!(
                    "permutation calibration needs at least 10 permutations, got {permutations}"
                )))
            }
            _ => {}
        }
        if self.min_segment < 2 {
            return Err(Error::config("min_segment must be at least 2"));
        }
        Ok(())
    }

    /// `h`, either fixed or `c_h T^{-1/(2r + p)}`.
    pub fn resolve_bandwidth(&self, len: usize, dim: usize) -> f64 {
        self.bandwidth.unwrap_or_else(|| {
            self.bandwidth_scale * (len as f64).powf(-1.0 / (2.0 * self.smoothness + dim as f64))
        })
    }
}

/// Estimated change points, each the last index of the old regime.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangePointSet {
    pub estimates: Vec<usize>,
    pub len: usize,
}

impl ChangePointSet {
    pub fn new(mut estimates: Vec<usize>, len: usize) -> Result<Self> {
        estimates.sort_unstable();
        if estimates.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("duplicate change points"));
        }
        if let Some(&bad) = estimates.iter().find(|&&e| e < 1 || e >= len) {
            return Err(Error::input(format!(
                "change point {bad} outside 1..={}",
                len.saturating_sub(1)
            )));
        }
        Ok(Self { estimates, len })
    }

    pub fn k_hat(&self) -> usize {
        self.estimates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimates.is_empty()
    }

    /// `1, eta_1, ..., eta_K, T + 1`.
    pub fn augmented(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.estimates.len() + 2);
        v.push(1);
        v.extend_from_slice(&self.estimates);
        v.push(self.len + 1);
        v
    }

    /// Smallest gap between consecutive augmented points.
    pub fn min_spacing(&self) -> usize {
        self.augmented()
            .windows(2)
            .map(|w| w[1] - w[0])
            .min()
            .unwrap_or(self.len)
    }
}

/// Output of [`detect`], echoing every tuning value used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub change_points: ChangePointSet,
    pub threshold: f64,
    pub bandwidth: f64,
    /// `ln(T) h^{-p}` before any fallback.
    pub rho: f64,
    /// Integer trimming actually applied.
    pub trim: usize,
    pub depth: u32,
    /// Largest `a_I` over the whole sample.
    pub max_statistic: f64,
    pub diagnostics: Vec<String>,
}

/// Tuning values derived from the data shape.
#[derive(Clone, Debug)]
pub struct ScanPlan {
    pub bandwidth: f64,
    pub rho: f64,
    pub trim: usize,
    pub intervals: SeededIntervalSet,
    pub diagnostics: Vec<String>,
    /// Set when no interval can be scanned at all.
    pub exhausted: bool,
}

impl ScanPlan {
    pub fn new(len: usize, dim: usize, cfg: &DetectionConfig) -> Result<Self> {
        cfg.validate()?;
        if len < 4 {
            return Err(Error::input(format!("detection needs T >= 4, got {len}")));
        }
        let bandwidth = cfg.resolve_bandwidth(len, dim);
        let rho = (len as f64).ln() * bandwidth.powi(-(dim as i32));
        let intervals = SeededIntervalSet::generate(len, cfg.depth_multiplier)?;
        let mut diagnostics = Vec::new();
        let mut exhausted = false;
        let trim = match cfg.trim_override {
            Some(trim) => {
                if len <= 2 * trim {
                    diagnostics.push(format!(
                        "trimming exhausts sample: trim {trim} leaves no split in T = {len}"
                    ));
                    exhausted = true;
                }
                trim
            }
            None => {
                let trim = if rho.is_finite() {
                    rho.ceil() as usize
                } else {
                    usize::MAX
                };
                if trim >= len / 2 || len <= 2 * trim {
                    let cap = (len / 10).max(1);
                    diagnostics.push(format!(
                        "trimming ln(T) h^-p = {rho:.3} disables the full-sample interval; \
                         falling back to floor(T/10) = {cap}"
                    ));
                    cap
                } else {
                    trim
                }
            }
        };
        Ok(Self {
            bandwidth,
            rho,
            trim,
            intervals,
            diagnostics,
            exhausted,
        })
    }

    /// `(b_I, a_I)` for every seeded interval, `None` where the interval is
    /// too short for the trimming.
    pub fn scan(&self, ctx: &GramContext) -> Vec<Option<(usize, f64)>> {
        self.intervals
            .intervals
            .par_iter()
            .map(|iv| ctx.cusum_argmax(iv.start, iv.end, self.trim).ok())
            .collect()
    }
}

fn top_statistic(stats: &[Option<(usize, f64)>]) -> f64 {
    stats.iter().flatten().map(|&(_, a)| a).fold(0.0, f64::max)
}

fn segment(
    intervals: &[SeededInterval],
    stats: &[Option<(usize, f64)>],
    tau: f64,
    min_segment: usize,
    len: usize,
) -> Vec<usize> {
    let mut found = Vec::new();
    let mut spans = vec![(0usize, len)];
    while let Some((s, e)) = spans.pop() {
        if e <= s || e - s < min_segment {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (iv, stat) in intervals.iter().zip(stats) {
            if let Some((b, a)) = *stat {
                if iv.within(s, e) && best.is_none_or(|(_, top)| a > top) {
                    best = Some((b, a));
                }
            }
        }
        if let Some((b, a)) = best {
            if a > tau {
                found.push(b);
                // right first so the left span is processed next
                spans.push((b + 1, e));
                spans.push((s, b));
            }
        }
    }
    found.sort_unstable();
    found
}

/// `c_tau T^{p / (4r + 2p)} sqrt(ln T)`.
pub fn theory_threshold(len: usize, dim: usize, smoothness: f64, c_tau: f64) -> f64 {
    let t = len as f64;
    let p = dim as f64;
    c_tau * t.powf(p / (4.0 * smoothness + 2.0 * p)) * t.ln().sqrt()
}

fn permutation_threshold(
    obs: &ObservationMatrix,
    spec: &KernelSpec,
    plan: &ScanPlan,
    permutations: usize,
    seed: u64,
) -> Result<f64> {
    let maxima: Result<Vec<f64>> = (0..permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64 + 1);
            let mut order: Vec<usize> = (0..obs.len()).collect();
            order.shuffle(&mut rng);
            let mut data = Vec::with_capacity(obs.as_slice().len());
            for &t in &order {
                data.extend_from_slice(obs.row(t));
            }
            let permuted = ObservationMatrix::new(data, obs.len(), obs.dim())?;
            let ctx = GramContext::build(&permuted, spec)?;
            Ok(top_statistic(&plan.scan(&ctx)))
        })
        .collect();
    let sorted = sorted_copy(&maxima?);
    Ok(quantile_sorted(&sorted, 1.0 - 1.0 / obs.len() as f64))
}

/// Calibrates `tau` for this sample.
pub fn select_threshold(
    obs: &ObservationMatrix,
    cfg: &DetectionConfig,
    method: ThresholdMethod,
) -> Result<f64> {
    let plan = ScanPlan::new(obs.len(), obs.dim(), cfg)?;
    match method {
        ThresholdMethod::Theory => {
            let c_tau = match cfg.threshold {
                Threshold::Theory { c_tau } => c_tau,
                _ => 1.0,
            };
            Ok(theory_threshold(
                obs.len(),
                obs.dim(),
                cfg.smoothness,
                c_tau,
            ))
        }
        ThresholdMethod::Permutation => {
            let (permutations, seed) = match cfg.threshold {
                Threshold::Permutation { permutations, seed } => (permutations, seed),
                _ => (100, 0),
            };
            let spec = KernelSpec::new(cfg.kernel, plan.bandwidth, obs.dim())?;
            permutation_threshold(obs, &spec, &plan, permutations, seed)
        }
    }
}

/// Runs seeded binary segmentation on `obs`.
pub fn detect(obs: &ObservationMatrix, cfg: &DetectionConfig) -> Result<Detection> {
    let plan = ScanPlan::new(obs.len(), obs.dim(), cfg)?;
    let spec = KernelSpec::new(cfg.kernel, plan.bandwidth, obs.dim())?;
    let ctx = GramContext::build(obs, &spec)?;
    let stats = plan.scan(&ctx);
    let threshold = match cfg.threshold {
        Threshold::Value { tau } => tau,
        Threshold::Theory { c_tau } => {
            theory_threshold(obs.len(), obs.dim(), cfg.smoothness, c_tau)
        }
        Threshold::Permutation { permutations, seed } => {
            permutation_threshold(obs, &spec, &plan, permutations, seed)?
        }
    };
    let estimates = if plan.exhausted {
        Vec::new()
    } else {
        segment(
            &plan.intervals.intervals,
            &stats,
            threshold,
            cfg.min_segment,
            obs.len(),
        )
    };
    Ok(Detection {
        change_points: ChangePointSet::new(estimates, obs.len())?,
        threshold,
        bandwidth: plan.bandwidth,
        rho: plan.rho,
        trim: plan.trim,
        depth: plan.intervals.depth,
        max_statistic: top_statistic(&stats),
        diagnostics: plan.diagnostics,
    })
}
