// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quantiles of `argmin_u B(u) + |u|` for a two-sided standard Brownian
//! motion, and the confidence intervals built from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, quantile_standard_error, sorted_copy};

pub const QUANTILE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DRAWS: usize = 10_000;
pub const DEFAULT_GRID_STEP: f64 = 0.01;
pub const DEFAULT_HALFWIDTH: f64 = 30.0;
pub const DEFAULT_ALPHAS: [f64; 13] = [
    0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99, 0.995,
];

/// Grid settings of the simulation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub n_draws: usize,
    pub step: f64,
    pub halfwidth: f64,
    pub seed: u64,
}

impl Default for SimulationGrid {
    fn default() -> Self {
        Self {
            n_draws: DEFAULT_DRAWS,
            step: DEFAULT_GRID_STEP,
            halfwidth: DEFAULT_HALFWIDTH,
            seed: 0,
        }
    }
}

/// Simulates `argmin_u sigma B(u) + |u|` on the grid `{-M, ..., -step, 0, step, ..., M}`.
///
/// Errors when more than 1% of the draws hit `+-M`.
pub fn simulate_argmin(sigma: f64, grid: &SimulationGrid) -> Result<Vec<f64>> {
    if !(grid.step > 0.0 && grid.halfwidth > grid.step) {
        return Err(Error::config(
            "grid step must be positive and below the halfwidth",
        ));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::config(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    let m = (grid.halfwidth / grid.step).round() as usize;
    let sd = sigma * grid.step.sqrt();
    let draws: Vec<(f64, bool)> = (0..grid.n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
            rng.set_stream(i as u64 + 1);
            let mut best = (0.0, 0i64);
            for side in [1i64, -1] {
                let mut b = 0.0;
                for j in 1..=m {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    b += sd * xi;
                    let w = b + j as f64 * grid.step;
                    if w < best.0 {
                        best = (w, side * j as i64);
                    }
                }
            }
            (
                best.1 as f64 * grid.step,
                best.1.unsigned_abs() as usize == m,
            )
        })
        .collect();
    let at_edge = draws.iter().filter(|d| d.1).count();
    if at_edge * 100 > grid.n_draws {
        return Err(Error::Numeric(format!(
            "halfwidth too small: {at_edge} of {} draws reached +-{}",
            grid.n_draws, grid.halfwidth
        )));
    }
    Ok(draws.into_iter().map(|d| d.0).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub schema_version: u32,
    pub seed: u64,
    pub n_draws: usize,
    pub grid_step: f64,
    pub grid_halfwidth: f64,
    pub alphas: Vec<f64>,
    pub q_star: Vec<f64>,
    /// Monte-Carlo standard error of each quantile.
    pub q_se: Vec<f64>,
    #[serde(skip)]
    sorted_draws: Vec<f64>,
}

impl QuantileTable {
    /// `q*(prob)`: from the draws when available, otherwise by linear
    /// interpolation in the stored table.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::config(format!("probability {prob} outside (0, 1)")));
        }
        if !self.sorted_draws.is_empty() {
            return Ok(quantile_sorted(&self.sorted_draws, prob));
        }
        let i = self.alphas.partition_point(|&a| a < prob);
        if i < self.alphas.len() && (self.alphas[i] - prob).abs() < 1e-12 {
            return Ok(self.q_star[i]);
        }
        if i == 0 || i == self.alphas.len() {
            return Err(Error::config(format!(
                "probability {prob} outside the tabulated range"
            )));
        }
        let (a0, a1) = (self.alphas[i - 1], self.alphas[i]);
        let w = (prob - a0) / (a1 - a0);
        Ok(self.q_star[i - 1] + w * (self.q_star[i] - self.q_star[i - 1]))
    }

    pub fn standard_error(&self, prob: f64) -> Option<f64> {
        if self.sorted_draws.is_empty() {
            let i = self.alphas.iter().position(|&a| (a - prob).abs() < 1e-12)?;
            return Some(self.q_se[i]);
        }
        Some(quantile_standard_error(&self.sorted_draws, prob))
    }

    pub fn draws(&self) -> &[f64] {
        &self.sorted_draws
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text).map_err(|e| Error::input(e.to_string()))?;
        if t.schema_version != QUANTILE_SCHEMA_VERSION {
            return Err(Error::input(format!(
                "unsupported quantile table schema version {}",
                t.schema_version
            )));
        }
        if t.alphas.len() != t.q_star.len() || t.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input(
                "quantile table alphas must be sorted and match q_star",
            ));
        }
        Ok(t)
    }
}

/// Standard-law quantile table at [`DEFAULT_ALPHAS`].
pub fn simulate_standard_quantiles(grid: &SimulationGrid) -> Result<QuantileTable> {
    if grid.n_draws < 1000 {
        return Err(Error::config(format!(
            "need at least 1000 draws, got {}",
            grid.n_draws
        )));
    }
    if grid.step > 0.05 || grid.halfwidth < 20.0 {
        return Err(Error::config(
            "grid step must be <= 0.05 and halfwidth >= 20",
        ));
    }
    let sorted = sorted_copy(&simulate_argmin(1.0, grid)?);
    let alphas = DEFAULT_ALPHAS.to_vec();
    Ok(QuantileTable {
        schema_version: QUANTILE_SCHEMA_VERSION,
        seed: grid.seed,
        n_draws: grid.n_draws,
        grid_step: grid.step,
        grid_halfwidth: grid.halfwidth,
        q_star: alphas
            .iter()
            .map(|&a| quantile_sorted(&sorted, a))
            .collect(),
        q_se: alphas
            .iter()
            .map(|&a| quantile_standard_error(&sorted, a))
            .collect(),
        alphas,
        sorted_draws: sorted,
    })
}

/// Multiplier on `sigma2_inf` in the interval: `1` for the law
/// `argmin sigma B(u) + |u|`, `4` for the law `argmin 2 sigma B(u) + |u|`
/// implied by the refinement objective, whose noise term carries a factor 2.
pub const STATED_LAW_FACTOR: f64 = 1.0;
pub const OBJECTIVE_LAW_FACTOR: f64 = 4.0;

/// Plug-in quantities for one change point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiInputs {
    pub k: usize,
    pub eta_tilde: usize,
    pub kappa_hat: f64,
    pub sigma2_inf: f64,
    pub dim: usize,
    pub smoothness: f64,
    /// See [`STATED_LAW_FACTOR`].
    pub law_factor: f64,
    /// Sample length, for clipping.
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub k: usize,
    pub alpha: f64,
    pub level: f64,
    /// Endpoints before rounding.
    pub lo_raw: f64,
    pub hi_raw: f64,
    pub lo: usize,
    pub hi: usize,
    pub degenerate: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, eta: usize) -> bool {
        self.lo <= eta && eta <= self.hi
    }

    pub fn width(&self) -> usize {
        self.hi - self.lo
    }
}

/// `eta_tilde + sigma2 q*(beta) / kappa^{p/r + 2}` at `beta = alpha/2, 1 - alpha/2`,
/// rounded outward and clipped to `[1, T]`.
pub fn confidence_interval(
    input: &CiInputs,
    alpha: f64,
    table: &QuantileTable,
) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(input.kappa_hat.is_finite() && input.kappa_hat > 0.0) {
        return Err(Error::config(format!(
            "kappa_hat must be positive, got {}",
            input.kappa_hat
        )));
    }
    if !(input.sigma2_inf.is_finite() && input.sigma2_inf >= 0.0) {
        return Err(Error::Numeric(format!(
            "long-run variance must be nonnegative, got {}",
            input.sigma2_inf
        )));
    }
    let eta = input.eta_tilde as f64;
    let mut ci = ConfidenceInterval {
        k: input.k,
        alpha,
        level: 1.0 - alpha,
        lo_raw: eta,
        hi_raw: eta,
        lo: input.eta_tilde,
        hi: input.eta_tilde,
        degenerate: input.sigma2_inf == 0.0,
    };
    if ci.degenerate {
        return Ok(ci);
    }
    let scale = input.law_factor * input.sigma2_inf
        / input
            .kappa_hat
            .powf(input.dim as f64 / input.smoothness + 2.0);
    ci.lo_raw = eta + scale * table.quantile(alpha / 2.0)?.min(0.0);
    ci.hi_raw = eta + scale * table.quantile(1.0 - alpha / 2.0)?.max(0.0);
    let last = input.len.max(1) as f64;
    ci.lo = ci.lo_raw.floor().clamp(1.0, last) as usize;
    ci.hi = ci.hi_raw.ceil().clamp(1.0, last) as usize;
    Ok(ci)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid(seed: u64) -> SimulationGrid {
        SimulationGrid {
            n_draws: 2000,
            step: 0.02,
            halfwidth: 20.0,
            seed,
        }
    }

    fn fixed_table(q: f64) -> QuantileTable {
        QuantileTable {
            schema_version: QUANTILE_SCHEMA_VERSION,
            seed: 0,
            n_draws: 0,
            grid_step: 0.01,
            grid_halfwidth: 30.0,
            alphas: vec![0.005, 0.025, 0.5, 0.975, 0.995],
            q_star: vec![-2.0 * q, -q, 0.0, q, 2.0 * q],
            q_se: vec![0.0; 5],
            sorted_draws: Vec::new(),
        }
    }

    fn inputs(kappa: f64, sigma2: f64) -> CiInputs {
        CiInputs {
            k: 1,
            eta_tilde: 100,
            kappa_hat: kappa,
            sigma2_inf: sigma2,
            dim: 1,
            smoothness: 1000.0,
            law_factor: STATED_LAW_FACTOR,
            len: 200,
        }
    }

    #[test]
    fn drift_only_argmin_is_zero() {
        let d = simulate_argmin(0.0, &small_grid(1)).unwrap();
        assert!(d.iter().all(|&u| u == 0.0));
    }

    #[test]
    fn table_is_deterministic() {
        let a = simulate_standard_quantiles(&small_grid(5)).unwrap();
        let b = simulate_standard_quantiles(&small_grid(5)).unwrap();
        assert_eq!(a.q_star, b.q_star);
    }

    #[test]
    fn narrow_halfwidth_rejected() {
        let grid = SimulationGrid {
            n_draws: 1000,
            step: 0.01,
            halfwidth: 0.05,
            seed: 0,
        };
        assert!(matches!(
            simulate_argmin(1.0, &grid),
            Err(Error::Numeric(_))
        ));
        assert!(simulate_standard_quantiles(&SimulationGrid {
            n_draws: 10,
            ..grid
        })
        .is_err());
    }

    #[test]
    fn json_round_trip_uses_table() {
        let t = simulate_standard_quantiles(&small_grid(2)).unwrap();
        let back = QuantileTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back.q_star, t.q_star);
        assert!((back.quantile(0.975).unwrap() - t.q_star[10]).abs() < 1e-12);
        assert!(back.quantile(0.001).is_err());
    }

    #[test]
    fn unit_scaling_is_symmetric() {
        let ci = confidence_interval(&inputs(1.0, 1.0), 0.05, &fixed_table(3.0)).unwrap();
        assert!((ci.lo_raw - 97.0).abs() < 1e-9 && (ci.hi_raw - 103.0).abs() < 1e-9);
        assert_eq!((ci.lo, ci.hi), (97, 103));
    }

    #[test]
    fn zero_variance_gives_point() {
        let ci = confidence_interval(&inputs(1.0, 0.0), 0.05, &fixed_table(3.0)).unwrap();
        assert!(ci.degenerate);
        assert_eq!((ci.lo, ci.hi), (100, 100));
    }

    #[test]
    fn width_monotone() {
        let t = fixed_table(3.0);
        let w = |k: f64, s: f64, a: f64| {
            let c = confidence_interval(&inputs(k, s), a, &t).unwrap();
            c.hi_raw - c.lo_raw
        };
        assert!(w(1.0, 2.0, 0.05) >= w(1.0, 1.0, 0.05));
        assert!(w(1.0, 1.0, 0.01) >= w(1.0, 1.0, 0.05));
        assert!(w(2.0, 1.0, 0.05) <= w(1.0, 1.0, 0.05));
    }

    #[test]
    fn clipped_and_outward_rounded() {
        let mut i = inputs(1.0, 1.0);
        i.eta_tilde = 2;
        let ci = confidence_interval(&i, 0.05, &fixed_table(3.5)).unwrap();
        assert_eq!(ci.lo, 1);
        assert_eq!(ci.hi, 6);
        assert!(confidence_interval(&i, 1.5, &fixed_table(1.0)).is_err());
        assert!(confidence_interval(&inputs(0.0, 1.0), 0.05, &fixed_table(1.0)).is_err());
    }
}
