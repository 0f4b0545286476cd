// SPDX-License-Identifier: MIT OR Apache-2.0

//! Block estimator of the long-run variance of the projected series around
//! each refined change point.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::gram::GramContext;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::refine::RefinedEstimate;

/// Which jump size scales the projection series.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaSource {
    /// `kappa_hat` from the small-bandwidth jump estimate.
    #[default]
    JumpEstimate,
    /// `|| mean_left - mean_right ||` at the refit bandwidth, split at `eta_tilde`.
    Refit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrvConfig {
    pub kernel: KernelFamily,
    pub smoothness: f64,
    pub kappa: KappaSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrvEstimate {
    pub k: usize,
    pub sigma2_inf: f64,
    /// Jump size used in the scaling.
    pub kappa_used: f64,
    /// Jump size at the refit bandwidth.
    pub kappa_refit: f64,
    /// Number of blocks `R`.
    pub blocks: usize,
    /// Block length `S`.
    pub block_len: usize,
    /// Centered projection series over the window.
    pub y_series: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedLrv {
    pub k: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LrvReport {
    pub estimates: Vec<LrvEstimate>,
    pub skipped: Vec<SkippedLrv>,
}

impl LrvReport {
    pub fn get(&self, k: usize) -> Option<&LrvEstimate> {
        self.estimates.iter().find(|e| e.k == k)
    }
}

/// `max(2, floor(max_k (e_k - s_k)^{3/5}))`.
pub fn default_r(windows: &[(usize, usize)]) -> usize {
    let longest = windows
        .iter()
        .map(|&(s, e)| e.saturating_sub(s))
        .max()
        .unwrap_or(0);
    // nudge so exact powers such as 32^0.6 = 8 are not floored to 7
    let r = ((longest as f64).powf(0.6) + 1e-9).floor() as usize;
    r.max(2)
}

/// `R^{-1} sum_r (S^{-1/2} sum_{i in block r} y_i)^2` over `R` consecutive
/// blocks of length `S = floor(len / R)` starting at the first element.
pub fn block_lrv(y: &[f64], blocks: usize) -> Result<f64> {
    if blocks < 2 {
        return Err(Error::config(format!(
            "need at least 2 blocks, got {blocks}"
        )));
    }
    let s = y.len() / blocks;
    if s < 2 {
        return Err(Error::input(format!(
            "series of length {} too short for {blocks} blocks",
            y.len()
        )));
    }
    let total: f64 = y[..s * blocks]
        .chunks_exact(s)
        .map(|b| {
            let sum: f64 = b.iter().sum();
            sum * sum / s as f64
        })
        .sum();
    Ok(total / blocks as f64)
}

/// Projection series `Y_t` over the window of `est`, centered per segment,
/// with the refit-bandwidth jump size.
pub fn projection_series(
    obs: &ObservationMatrix,
    est: &RefinedEstimate,
    cfg: &LrvConfig,
) -> Result<(Vec<f64>, f64, f64)> {
    let h1 = est
        .h1
        .ok_or_else(|| Error::input(format!("change point {} has no refit bandwidth", est.k)))?;
    let (s, e) = est.window;
    let n = e - s;
    let split = est.eta_tilde - s;
    if split == 0 || split >= n {
        return Err(Error::input("refined estimate on the window boundary"));
    }
    let spec = KernelSpec::new(cfg.kernel, h1, obs.dim())?;
    let ctx = GramContext::build(&obs.slice_rows(s, e)?, &spec)?;
    let kappa_refit = ctx.mean_diff_sq(0, split, split, n)?.sqrt();
    let kappa = match cfg.kappa {
        KappaSource::JumpEstimate => est.kappa_hat,
        KappaSource::Refit => kappa_refit,
    };
    // <F_t, d> with d = mean_left - mean_right
    let proj: Vec<f64> = (1..=n)
        .map(|t| {
            Ok(ctx.inner_with_segment_mean(t, 0, split)?
                - ctx.inner_with_segment_mean(t, split, n)?)
        })
        .collect::<Result<_>>()?;
    let scale = if kappa > 0.0 {
        kappa.powf(obs.dim() as f64 / (2.0 * cfg.smoothness) - 1.0)
    } else {
        0.0
    };
    let mut y = Vec::with_capacity(n);
    for (lo, hi) in [(0, split), (split, n)] {
        let seg = &proj[lo..hi];
        let m = seg.len() as f64;
        let total: f64 = seg.iter().sum();
        let start = y.len();
        for &v in seg {
            let anchor = if seg.len() > 1 {
                (total - v) / (m - 1.0)
            } else {
                total / m
            };
            y.push(scale * (v - anchor));
        }
        let centre = y[start..].iter().sum::<f64>() / m;
        for v in &mut y[start..] {
            *v -= centre;
        }
    }
    Ok((y, kappa, kappa_refit))
}

/// Long-run variance for every refined estimate; windows shorter than
/// `2R` and degenerate refinements are skipped with a reason.
pub fn estimate_lrv(
    obs: &ObservationMatrix,
    refined: &[RefinedEstimate],
    blocks: usize,
    cfg: &LrvConfig,
) -> Result<LrvReport> {
    if blocks < 2 {
        return Err(Error::config(format!(
            "need at least 2 blocks, got {blocks}"
        )));
    }
    let results: Vec<std::result::Result<LrvEstimate, SkippedLrv>> = refined
        .par_iter()
        .map(|est| {
            let skip = |reason: String| SkippedLrv { k: est.k, reason };
            if est.degenerate {
                return Err(skip("zero jump estimate".into()));
            }
            let n = est.window.1 - est.window.0;
            if n < 2 * blocks {
                return Err(skip(format!(
                    "window length {n} shorter than 2R = {}",
                    2 * blocks
                )));
            }
            let (y, kappa_used, kappa_refit) =
                projection_series(obs, est, cfg).map_err(|e| skip(e.to_string()))?;
            let sigma2_inf = block_lrv(&y, blocks).map_err(|e| skip(e.to_string()))?;
            Ok(LrvEstimate {
                k: est.k,
                sigma2_inf,
                kappa_used,
                kappa_refit,
                blocks,
                block_len: n / blocks,
                y_series: y,
            })
        })
        .collect();
    let mut report = LrvReport::default();
    for r in results {
        match r {
            Ok(e) => report.estimates.push(e),
            Err(s) => report.skipped.push(s),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LrvConfig {
        LrvConfig {
            kernel: KernelFamily::Gaussian,
            smoothness: 2.0,
            kappa: KappaSource::JumpEstimate,
        }
    }

    #[test]
    fn default_r_values() {
        assert_eq!(default_r(&[(0, 32)]), 8);
        assert_eq!(default_r(&[(0, 1)]), 2);
        assert_eq!(default_r(&[(5, 20), (0, 1000)]), 63);
    }

    #[test]
    fn block_sums_by_hand() {
        // blocks [1,2], [3,4]: (3^2 + 7^2) / 2 / 2
        let v = block_lrv(&[1.0, 2.0, 3.0, 4.0, 100.0], 2).unwrap();
        assert!((v - 14.5).abs() < 1e-12);
        assert_eq!(block_lrv(&[0.0; 10], 2).unwrap(), 0.0);
        assert!(block_lrv(&[0.0; 3], 2).is_err());
    }

    #[test]
    fn identical_segments_give_zero() {
        let obs = ObservationMatrix::from_column(&[1.0; 40]).unwrap();
        let est = RefinedEstimate {
            k: 1,
            eta_hat: 20,
            eta_tilde: 20,
            kappa_hat: 0.5,
            window: (2, 38),
            h1: Some(0.7),
            h_tilde: 0.05,
            c_kappa: 2.0,
            degenerate: false,
        };
        let rep = estimate_lrv(&obs, &[est], 4, &cfg()).unwrap();
        assert!(rep.estimates[0].sigma2_inf.abs() < 1e-20);
        assert_eq!(rep.estimates[0].block_len, 9);
    }

    #[test]
    fn short_window_is_skipped() {
        let obs = ObservationMatrix::from_column(&[1.0; 40]).unwrap();
        let est = RefinedEstimate {
            k: 1,
            eta_hat: 20,
            eta_tilde: 20,
            kappa_hat: 0.5,
            window: (15, 25),
            h1: Some(0.7),
            h_tilde: 0.05,
            c_kappa: 2.0,
            degenerate: false,
        };
        let rep = estimate_lrv(&obs, &[est], 8, &cfg()).unwrap();
        assert!(rep.estimates.is_empty());
        assert_eq!(rep.skipped[0].k, 1);
    }
}
