// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local refinement of preliminary change points.
//!
//! Each preliminary estimate gets a window reaching 9/10 of the way to its
//! neighbours, a jump-size estimate `kappa_hat` at a small bandwidth, and a
//! least-squares re-fit inside the window at bandwidth `c_kappa * kappa_hat^{1/r}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::detect::{ChangePointSet, DetectionConfig};
use crate::error::{Error, Result};
use crate::gram::{streaming_mean_diff_sq, GramContext};
use crate::kernels::{KernelFamily, KernelSpec};

pub const DEFAULT_H_TILDE: f64 = 0.05;
pub const DEFAULT_C_KAPPA: f64 = 2.0;

/// Which segment means enter the refinement objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanAnchor {
    /// Means fixed at the preliminary split.
    #[default]
    Preliminary,
    /// Means recomputed for every candidate split.
    Candidate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub kernel: KernelFamily,
    pub smoothness: f64,
    pub h_tilde: f64,
    pub c_kappa: f64,
    pub anchor: MeanAnchor,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Gaussian,
            smoothness: 2.0,
            h_tilde: DEFAULT_H_TILDE,
            c_kappa: DEFAULT_C_KAPPA,
            anchor: MeanAnchor::Preliminary,
        }
    }
}

impl RefineConfig {
    pub fn from_detection(cfg: &DetectionConfig) -> Self {
        Self {
            kernel: cfg.kernel,
            smoothness: cfg.smoothness,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("smoothness", self.smoothness),
            ("h_tilde", self.h_tilde),
            ("c_kappa", self.c_kappa),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedEstimate {
    /// 1-based position among the preliminary estimates.
    pub k: usize,
    pub eta_hat: usize,
    pub eta_tilde: usize,
    pub kappa_hat: f64,
    /// `(s_k, e_k]`.
    pub window: (usize, usize),
    /// `None` when `kappa_hat` is zero and no re-fit took place.
    pub h1: Option<f64>,
    pub h_tilde: f64,
    pub c_kappa: f64,
    pub degenerate: bool,
}

/// `(s_k, e_k]` for every preliminary estimate, with `e_k` capped at `T`
/// and `s_k` kept below the estimate.
pub fn refinement_intervals(prelim: &ChangePointSet) -> Vec<(usize, usize)> {
    let aug = prelim.augmented();
    aug.windows(3)
        .map(|w| {
            let s = ((9 * w[0] + w[1]) / 10).min(w[1] - 1);
            let e = (9 * w[2] + w[1]).div_ceil(10);
            (s, e.min(prelim.len))
        })
        .collect()
}

/// `kappa_hat_k`: distance between the kernel-sum averages of the two
/// segments adjacent to the `k`-th estimate (1-based), with outer ends
/// `0` and `T`.
pub fn estimate_jump(
    obs: &ObservationMatrix,
    prelim: &ChangePointSet,
    h_tilde: f64,
    family: KernelFamily,
    k: usize,
) -> Result<f64> {
    let est = &prelim.estimates;
    if k == 0 || k > est.len() {
        return Err(Error::input(format!(
            "change point index {k} outside 1..={}",
            est.len()
        )));
    }
    let prev = if k == 1 { 0 } else { est[k - 2] };
    let cur = est[k - 1];
    let next = if k == est.len() { obs.len() } else { est[k] };
    if prev >= cur || cur >= next {
        return Err(Error::input(format!(
            "degenerate segment around change point {cur}"
        )));
    }
    let spec = KernelSpec::new(family, h_tilde, obs.dim())?;
    Ok(streaming_mean_diff_sq(obs, &spec, (prev, cur), (cur, next))?.sqrt())
}

/// Refinement objective over local candidates `1..n` of a window Gram
/// context; entry `i` holds the value at split `i + 1`.
pub fn objective(ctx: &GramContext, local_split: usize, anchor: MeanAnchor) -> Result<Vec<f64>> {
    let n = ctx.len();
    if n < 2 {
        return Err(Error::input(
            "refinement window needs at least two observations",
        ));
    }
    match anchor {
        MeanAnchor::Preliminary => {
            if local_split == 0 || local_split >= n {
                return Err(Error::input(format!(
                    "preliminary split {local_split} outside the window interior"
                )));
            }
            let left: Vec<f64> = (1..=n)
                .map(|t| ctx.segment_mean_sq_dist(t, 0, local_split))
                .collect::<Result<_>>()?;
            let right: Vec<f64> = (1..=n)
                .map(|t| ctx.segment_mean_sq_dist(t, local_split, n))
                .collect::<Result<_>>()?;
            let mut tail: f64 = right[1..].iter().sum();
            let mut head = left[0];
            let mut q = Vec::with_capacity(n - 1);
            for eta in 1..n {
                q.push(head + tail);
                if eta < n - 1 {
                    head += left[eta];
                    tail -= right[eta];
                }
            }
            Ok(q)
        }
        MeanAnchor::Candidate => (1..n)
            .map(|eta| Ok(ctx.within_scatter(0, eta)? + ctx.within_scatter(eta, n)?))
            .collect(),
    }
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] - 1e-10 * (1.0 + values[best].abs()) {
            best = i;
        }
    }
    best
}

fn refine_one(
    obs: &ObservationMatrix,
    prelim: &ChangePointSet,
    cfg: &RefineConfig,
    k: usize,
    window: (usize, usize),
) -> Result<RefinedEstimate> {
    let eta_hat = prelim.estimates[k - 1];
    let kappa_hat = estimate_jump(obs, prelim, cfg.h_tilde, cfg.kernel, k)?;
    let (s, e) = window;
    let mut out = RefinedEstimate {
        k,
        eta_hat,
        eta_tilde: eta_hat,
        kappa_hat,
        window,
        h1: None,
        h_tilde: cfg.h_tilde,
        c_kappa: cfg.c_kappa,
        degenerate: true,
    };
    if kappa_hat <= 0.0 || e - s < 2 {
        return Ok(out);
    }
    let h1 = cfg.c_kappa * kappa_hat.powf(1.0 / cfg.smoothness);
    let spec = KernelSpec::new(cfg.kernel, h1, obs.dim())?;
    let ctx = GramContext::build(&obs.slice_rows(s, e)?, &spec)?;
    let q = objective(&ctx, eta_hat - s, cfg.anchor)?;
    out.eta_tilde = s + 1 + argmin_first(&q);
    out.h1 = Some(h1);
    out.degenerate = false;
    Ok(out)
}

/// Refines every preliminary estimate independently.
pub fn refine(
    obs: &ObservationMatrix,
    prelim: &ChangePointSet,
    cfg: &RefineConfig,
) -> Result<Vec<RefinedEstimate>> {
    cfg.validate()?;
    if prelim.len != obs.len() {
        return Err(Error::input(format!(
            "change points refer to T = {} but data has {} rows",
            prelim.len,
            obs.len()
        )));
    }
    refinement_intervals(prelim)
        .into_par_iter()
        .enumerate()
        .map(|(i, w)| refine_one(obs, prelim, cfg, i + 1, w))
        .collect()
}
