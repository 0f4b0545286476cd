// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use seedcp::inference::SimulationGrid;
use seedcp::simlab::{ScenarioId, ScenarioSpec};
use seedcp::{
    Calibration, DetectionConfig, Error, KernelFamily, MeanAnchor, PipelineConfig, RefineConfig,
    Threshold,
};

use crate::Failure;

/// Smoothness used for the INFER scenario when `--r` is not given.
const INFER_SMOOTHNESS: f64 = 1000.0;

#[derive(Parser, Debug)]
#[command(
    name = "seedcp",
    version,
    about = "Kernel-based change-point localization and inference for multivariate series"
)]
pub struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic scenario as CSV plus a truth sidecar.
    Simulate(SimulateArgs),
    /// Preliminary change-point detection.
    Detect(DetectArgs),
    /// Detection followed by local refinement.
    Refine(RefineArgs),
    /// Refined estimates with long-run variances and confidence intervals.
    Infer(InferArgs),
    /// Monte Carlo study on a synthetic scenario.
    Evaluate(EvaluateArgs),
}

fn parse_scenario(s: &str) -> Result<ScenarioId, String> {
    ScenarioId::from_str(s).map_err(|e| e.to_string())
}

fn parse_kernel(s: &str) -> Result<KernelFamily, String> {
    KernelFamily::from_str(s).map_err(|e| e.to_string())
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("expected a positive number, got `{s}`")),
    }
}

fn probability(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!(
            "expected a level strictly between 0 and 1, got `{s}`"
        )),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauChoice {
    Value(f64),
    Theory,
    Permutation,
}

fn parse_tau(s: &str) -> Result<TauChoice, String> {
    match s.to_ascii_lowercase().as_str() {
        "theory" => Ok(TauChoice::Theory),
        "permutation" => Ok(TauChoice::Permutation),
        _ => positive(s).map(TauChoice::Value).map_err(|_| {
            format!("--tau takes a positive number, `theory` or `permutation`, got `{s}`")
        }),
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// S1..S5 or INFER.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: ScenarioId,
    /// Series length.
    #[arg(long = "T")]
    pub len: usize,
    /// Dimension.
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Truth sidecar path; defaults to `<stem>.truth.json` next to the CSV.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn scenario_spec(&self) -> ScenarioSpec {
        ScenarioSpec::new(self.scenario, self.len, self.p, self.seed)
    }
}

#[derive(Args, Debug, Clone)]
pub struct DetectionArgs {
    #[arg(long, value_parser = parse_kernel, default_value = "gaussian")]
    pub kernel: KernelFamily,
    /// Smoothness r.
    #[arg(long, value_parser = positive)]
    pub r: Option<f64>,
    /// Bandwidth; defaults to c_h T^{-1/(2r+p)}.
    #[arg(long, value_parser = positive)]
    pub h: Option<f64>,
    #[arg(long, value_parser = positive, default_value_t = 2.0)]
    pub c_h: f64,
    /// A positive value, `theory` or `permutation`.
    #[arg(long, value_parser = parse_tau, default_value = "permutation")]
    pub tau: TauChoice,
    #[arg(long, value_parser = positive, default_value_t = 1.0)]
    pub c_tau: f64,
    #[arg(long, default_value_t = 100)]
    pub permutations: usize,
    /// Seeded depth multiplier C in ceil(C ln T).
    #[arg(long, value_parser = positive)]
    pub depth_multiplier: Option<f64>,
    /// Fixed trimming instead of ln(T) h^{-p}.
    #[arg(long)]
    pub trim: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub min_segment: usize,
    /// Seed for the permutation threshold.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl DetectionArgs {
    pub fn smoothness(&self, fallback: f64) -> f64 {
        self.r.unwrap_or(fallback)
    }

    pub fn config_with(&self, fallback_r: f64) -> Result<DetectionConfig, Failure> {
        let mut cfg = DetectionConfig {
            kernel: self.kernel,
            smoothness: self.smoothness(fallback_r),
            bandwidth: self.h,
            bandwidth_scale: self.c_h,
            threshold: match self.tau {
                TauChoice::Value(tau) => Threshold::Value { tau },
                TauChoice::Theory => Threshold::Theory { c_tau: self.c_tau },
                TauChoice::Permutation => Threshold::Permutation {
                    permutations: self.permutations,
                    seed: self.seed,
                },
            },
            trim_override: self.trim,
            min_segment: self.min_segment,
            ..DetectionConfig::default()
        };
        if let Some(c) = self.depth_multiplier {
            cfg.depth_multiplier = c;
        }
        cfg.validate().map_err(Failure::from)?;
        Ok(cfg)
    }

    pub fn config(&self) -> Result<DetectionConfig, Failure> {
        self.config_with(DetectionConfig::default().smoothness)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AnchorArg {
    Preliminary,
    Candidate,
}

#[derive(Args, Debug, Clone)]
pub struct RefineParams {
    /// Bandwidth of the jump-size estimate.
    #[arg(long, value_parser = positive, default_value_t = seedcp::refine::DEFAULT_H_TILDE)]
    pub h_tilde: f64,
    /// Constant in the refit bandwidth c_kappa kappa_hat^{1/r}.
    #[arg(long, value_parser = positive, default_value_t = seedcp::refine::DEFAULT_C_KAPPA)]
    pub c_kappa: f64,
    #[arg(long, value_enum, default_value_t = AnchorArg::Preliminary)]
    pub anchor: AnchorArg,
}

impl RefineParams {
    pub fn config(&self, detection: &DetectionConfig) -> RefineConfig {
        RefineConfig {
            h_tilde: self.h_tilde,
            c_kappa: self.c_kappa,
            anchor: match self.anchor {
                AnchorArg::Preliminary => MeanAnchor::Preliminary,
                AnchorArg::Candidate => MeanAnchor::Candidate,
            },
            ..RefineConfig::from_detection(detection)
        }
    }
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub detection: DetectionArgs,
}

#[derive(Args, Debug)]
pub struct RefineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Take preliminary estimates from a `detect` output instead of detecting.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub refine: RefineParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CalibrationArg {
    /// Refit-bandwidth jump size with the objective's limiting law.
    Matched,
    /// Small-bandwidth jump estimate with the unit-scale law.
    Stated,
}

impl CalibrationArg {
    pub fn resolve(self) -> Calibration {
        match self {
            CalibrationArg::Matched => Calibration::MATCHED,
            CalibrationArg::Stated => Calibration::STATED,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct InferenceParams {
    /// Significance level; repeat for several intervals.
    #[arg(long = "alpha", value_parser = probability, default_values_t = [0.05])]
    pub alphas: Vec<f64>,
    /// Number of LRV blocks; defaults to a window-length rule.
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long, value_enum, default_value_t = CalibrationArg::Matched)]
    pub calibration: CalibrationArg,
    /// Monte Carlo draws for the limiting-law quantiles.
    #[arg(long, default_value_t = seedcp::inference::DEFAULT_DRAWS)]
    pub draws: usize,
    #[arg(long, value_parser = positive, default_value_t = seedcp::inference::DEFAULT_GRID_STEP)]
    pub grid_step: f64,
    #[arg(long, value_parser = positive, default_value_t = seedcp::inference::DEFAULT_HALFWIDTH)]
    pub halfwidth: f64,
    /// Seed for the quantile simulation.
    #[arg(long, default_value_t = 0)]
    pub quantile_seed: u64,
}

impl InferenceParams {
    pub fn grid(&self) -> SimulationGrid {
        SimulationGrid {
            n_draws: self.draws,
            step: self.grid_step,
            halfwidth: self.halfwidth,
            seed: self.quantile_seed,
        }
    }

    pub fn pipeline(
        &self,
        detection: DetectionConfig,
        refine: RefineConfig,
    ) -> Result<PipelineConfig, Failure> {
        if self.blocks.is_some_and(|r| r < 2) {
            return Err(Error::Config("--blocks must be at least 2".into()).into());
        }
        Ok(PipelineConfig {
            detection,
            refine,
            lrv_blocks: self.blocks,
            alphas: self.alphas.clone(),
            grid: self.grid(),
            calibration: self.calibration.resolve(),
        })
    }
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reuse a saved quantile table instead of simulating one.
    #[arg(long)]
    pub quantiles: Option<PathBuf>,
    /// Write the quantile table used.
    #[arg(long)]
    pub save_quantiles: Option<PathBuf>,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub refine: RefineParams,
    #[command(flatten)]
    pub inference: InferenceParams,
}

impl InferArgs {
    pub fn grid(&self) -> SimulationGrid {
        self.inference.grid()
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, Failure> {
        let detection = self.detection.config()?;
        let refine = self.refine.config(&detection);
        self.inference.pipeline(detection, refine)
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: ScenarioId,
    #[arg(long = "T")]
    pub len: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Also build confidence intervals in every repetition.
    #[arg(long)]
    pub inference: bool,
    /// Write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub detection: DetectionArgs,
    #[command(flatten)]
    pub refine: RefineParams,
    #[command(flatten)]
    pub params: InferenceParams,
}

impl EvaluateArgs {
    /// Master seed of the study; per-repetition seeds derive from it.
    pub fn master_seed(&self) -> u64 {
        self.detection.seed
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        ScenarioSpec::new(self.scenario, self.len, self.p, self.master_seed())
    }

    pub fn pipeline(&self, spec: &ScenarioSpec) -> Result<PipelineConfig, Failure> {
        let fallback = match spec.id {
            ScenarioId::Infer => INFER_SMOOTHNESS,
            _ => DetectionConfig::default().smoothness,
        };
        let detection = self.detection.config_with(fallback)?;
        let refine = self.refine.config(&detection);
        self.params.pipeline(detection, refine)
    }
}
