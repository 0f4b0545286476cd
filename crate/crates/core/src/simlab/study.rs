// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{hausdorff, matched_abs_errors};
use super::scenario::{generate_scenario, LabeledSeries, ScenarioSpec};
use crate::detect::Threshold;
use crate::error::{Error, Result};
use crate::inference::{simulate_standard_quantiles, QuantileTable};
use crate::pipeline::{analyze, PipelineConfig};
use crate::stats::{mean, mix_seed, std_dev};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub reps: usize,
    pub master_seed: u64,
    pub pipeline: PipelineConfig,
    /// Build intervals as well as point estimates.
    pub inference: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    /// Mean of the per-change-point cover indicators over replicates with
    /// the correct number of change points.
    pub coverage: Option<f64>,
    pub width_mean: Option<f64>,
    pub width_sd: Option<f64>,
    pub n_intervals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub label: String,
    pub len: usize,
    pub dim: usize,
    pub master_seed: u64,
    pub reps: usize,
    pub failures: usize,
    pub failure_messages: Vec<String>,
    pub prop_k_wrong: f64,
    pub dh_mean: f64,
    pub dh_sd: f64,
    /// Hausdorff distance of the preliminary estimates.
    pub dh_prelim_mean: f64,
    /// Replicates with the correct number of change points.
    pub k_correct: usize,
    /// Mean absolute location error on those replicates, before and after refinement.
    pub mae_prelim: Option<f64>,
    pub mae_refined: Option<f64>,
    pub inference: Vec<AlphaSummary>,
}

/// Series shape and the outcome of one repetition.
type RepResult = (Option<(usize, usize)>, Result<RepOutcome>);

struct RepOutcome {
    k_wrong: bool,
    dh: f64,
    dh_prelim: f64,
    abs_prelim: Vec<f64>,
    abs_refined: Vec<f64>,
    /// Per alpha: cover indicators and widths.
    covers: Vec<Vec<bool>>,
    widths: Vec<Vec<f64>>,
}

fn run_rep(
    series: &LabeledSeries,
    cfg: &PipelineConfig,
    table: Option<&QuantileTable>,
) -> Result<RepOutcome> {
    let a = analyze(&series.obs, cfg, table)?;
    let len = series.obs.len();
    let prelim = &a.detection.change_points.estimates;
    let refined = a.refined_points();
    let truth = &series.true_cps;
    let k_wrong = prelim.len() != truth.len();
    let mut out = RepOutcome {
        k_wrong,
        dh: hausdorff(&refined, truth, len),
        dh_prelim: hausdorff(prelim, truth, len),
        abs_prelim: matched_abs_errors(prelim, truth).unwrap_or_default(),
        abs_refined: matched_abs_errors(&refined, truth).unwrap_or_default(),
        covers: vec![Vec::new(); cfg.alphas.len()],
        widths: vec![Vec::new(); cfg.alphas.len()],
    };
    if !k_wrong {
        for r in &a.refined {
            let eta = truth[r.k - 1];
            for ci in a.intervals_for(r.k) {
                let i = cfg
                    .alphas
                    .iter()
                    .position(|&x| x == ci.alpha)
                    .expect("interval at configured level");
                out.covers[i].push(ci.contains(eta));
                out.widths[i].push(ci.width() as f64);
            }
        }
    }
    Ok(out)
}

/// Monte-Carlo study over a scenario generator.
pub fn run_study(scenario: &ScenarioSpec, cfg: &StudyConfig) -> Result<EvalReport> {
    let mut report = run_study_with(
        |seed| generate_scenario(&ScenarioSpec { seed, ..*scenario }),
        cfg,
    )?;
    report.label = scenario.id.to_string();
    Ok(report)
}

/// Like [`run_study`] with a caller-supplied generator mapping a replicate
/// seed to a labelled series.
pub fn run_study_with<G>(generator: G, cfg: &StudyConfig) -> Result<EvalReport>
where
    G: Fn(u64) -> Result<LabeledSeries> + Sync,
{
    if cfg.reps == 0 {
        return Err(Error::config("a study needs at least one replicate"));
    }
    let table = if cfg.inference {
        Some(simulate_standard_quantiles(&cfg.pipeline.grid)?)
    } else {
        None
    };
    let results: Vec<RepResult> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = mix_seed(cfg.master_seed, rep as u64);
            let mut pipeline = cfg.pipeline.clone();
            if let Threshold::Permutation { permutations, .. } = pipeline.detection.threshold {
                pipeline.detection.threshold = Threshold::Permutation {
                    permutations,
                    seed: mix_seed(seed, 1),
                };
            }
            match generator(seed) {
                Ok(series) => {
                    let shape = Some((series.obs.len(), series.obs.dim()));
                    (shape, run_rep(&series, &pipeline, table.as_ref()))
                }
                Err(e) => (None, Err(e)),
            }
        })
        .collect();

    let shape = results.iter().find_map(|r| r.0).unwrap_or((0, 0));
    let mut failure_messages = Vec::new();
    let mut ok = Vec::new();
    for (rep, (_, r)) in results.into_iter().enumerate() {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => failure_messages.push(format!("replicate {rep}: {e}")),
        }
    }
    let dh: Vec<f64> = ok.iter().map(|o| o.dh).collect();
    let dh_prelim: Vec<f64> = ok.iter().map(|o| o.dh_prelim).collect();
    let correct: Vec<&RepOutcome> = ok.iter().filter(|o| !o.k_wrong).collect();
    let abs_prelim: Vec<f64> = correct.iter().flat_map(|o| o.abs_prelim.clone()).collect();
    let abs_refined: Vec<f64> = correct.iter().flat_map(|o| o.abs_refined.clone()).collect();
    let non_empty = |v: &[f64]| (!v.is_empty()).then(|| mean(v));
    let inference = if cfg.inference {
        cfg.pipeline
            .alphas
            .iter()
            .enumerate()
            .map(|(i, &alpha)| {
                let covers: Vec<f64> = correct
                    .iter()
                    .flat_map(|o| o.covers[i].iter().map(|&c| if c { 1.0 } else { 0.0 }))
                    .collect();
                let widths: Vec<f64> = correct.iter().flat_map(|o| o.widths[i].clone()).collect();
                AlphaSummary {
                    alpha,
                    coverage: non_empty(&covers),
                    width_mean: non_empty(&widths),
                    width_sd: (!widths.is_empty()).then(|| std_dev(&widths)),
                    n_intervals: widths.len(),
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let k_wrong = ok.iter().filter(|o| o.k_wrong).count();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label: "custom".into(),
        len: shape.0,
        dim: shape.1,
        master_seed: cfg.master_seed,
        reps: cfg.reps,
        failures: failure_messages.len(),
        failure_messages,
        prop_k_wrong: if ok.is_empty() {
            f64::NAN
        } else {
            k_wrong as f64 / ok.len() as f64
        },
        dh_mean: mean(&dh),
        dh_sd: std_dev(&dh),
        dh_prelim_mean: mean(&dh_prelim),
        k_correct: correct.len(),
        mae_prelim: non_empty(&abs_prelim),
        mae_refined: non_empty(&abs_refined),
        inference,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numeric(e.to_string()))
    }

    /// Plain-text summary in `mean (sd)` layout.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} (T = {}, p = {}), {} reps, {} failed",
            self.label, self.len, self.dim, self.reps, self.failures
        );
        let _ = writeln!(s, "{:<12} {:<18} {:<12}", "K_hat != K", "d_H", "d_H prelim");
        let _ = writeln!(
            s,
            "{:<12} {:<18} {:<12}",
            format!("{:.3}", self.prop_k_wrong),
            format!("{:.3} ({:.3})", self.dh_mean, self.dh_sd),
            format!("{:.3}", self.dh_prelim_mean)
        );
        let _ = writeln!(
            s,
            "mean |error| on {} reps with K_hat = K: preliminary {}, refined {}",
            self.k_correct,
            fmt_opt(self.mae_prelim),
            fmt_opt(self.mae_refined)
        );
        if !self.inference.is_empty() {
            let _ = writeln!(s, "{:<8} {:<10} {:<18} n", "alpha", "coverage", "width");
            for a in &self.inference {
                let width = match (a.width_mean, a.width_sd) {
                    (Some(m), Some(sd)) => format!("{m:.3} ({sd:.3})"),
                    _ => "-".into(),
                };
                let _ = writeln!(
                    s,
                    "{:<8} {:<10} {:<18} {}",
                    a.alpha,
                    fmt_opt(a.coverage),
                    width,
                    a.n_intervals
                );
            }
        }
        s
    }
}
