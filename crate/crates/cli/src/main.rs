// SPDX-License-Identifier: MIT OR Apache-2.0

//! `seedcp` command-line tool.

mod args;
mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use seedcp::inference::simulate_standard_quantiles;
use seedcp::simlab::{generate_scenario, run_study, ScenarioSpec, StudyConfig};
use seedcp::{analyze, detect, refine, ChangePointSet, Error, ObservationMatrix, QuantileTable};

use args::{Cli, Command, DetectArgs, EvaluateArgs, InferArgs, RefineArgs, SimulateArgs};
use output::{DetectOutput, InferOutput, RefineOutput, TruthSidecar};

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 1,
            Error::Numeric(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
    .into()
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| io_failure(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| io_failure(Path::new("<stdout>"), e))
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 3,
        message: format!("could not serialize output: {e}"),
    })
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv.with_file_name(format!("{stem}.truth.json"))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let spec = a.scenario_spec();
    let series = generate_scenario(&spec)?;
    let file = fs::File::create(&a.out).map_err(|e| io_failure(&a.out, e))?;
    series.obs.write_csv(file)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| sidecar_path(&a.out));
    let sidecar = TruthSidecar::new(&spec, &series.true_cps);
    write_output(Some(&truth_path), &to_json(&sidecar)?)
}

fn read_input(path: &Path) -> Result<ObservationMatrix, Failure> {
    Ok(ObservationMatrix::read_csv(path)?)
}

fn cmd_detect(a: &DetectArgs) -> Result<(), Failure> {
    let cfg = a.detection.config()?;
    let obs = read_input(&a.input)?;
    let start = Instant::now();
    let d = detect(&obs, &cfg)?;
    let out = DetectOutput::new(&d, &cfg, start.elapsed());
    write_output(a.out.as_deref(), &to_json(&out)?)
}

fn load_estimates(path: &Path, len: usize) -> Result<ChangePointSet, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let det: DetectOutput = serde_json::from_str(&text)
        .map_err(|e| Failure::from(Error::Input(format!("{}: {e}", path.display()))))?;
    Ok(ChangePointSet::new(det.estimates, len)?)
}

fn cmd_refine(a: &RefineArgs) -> Result<(), Failure> {
    let det_cfg = a.detection.config()?;
    let cfg = a.refine.config(&det_cfg);
    let obs = read_input(&a.input)?;
    let start = Instant::now();
    let (prelim, tau) = match &a.from {
        Some(path) => (load_estimates(path, obs.len())?, None),
        None => {
            let d = detect(&obs, &det_cfg)?;
            (d.change_points.clone(), Some(d.threshold))
        }
    };
    let refined = if prelim.is_empty() {
        Vec::new()
    } else {
        refine(&obs, &prelim, &cfg)?
    };
    let out = RefineOutput::new(&prelim, tau, &refined, &cfg, start.elapsed());
    write_output(a.out.as_deref(), &to_json(&out)?)
}

fn quantile_table(a: &InferArgs) -> Result<QuantileTable, Failure> {
    let table = match &a.quantiles {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            QuantileTable::from_json(&text)?
        }
        None => simulate_standard_quantiles(&a.grid())?,
    };
    if let Some(path) = &a.save_quantiles {
        write_output(Some(path), &table.to_json()?)?;
    }
    Ok(table)
}

fn cmd_infer(a: &InferArgs) -> Result<(), Failure> {
    let cfg = a.pipeline()?;
    let obs = read_input(&a.input)?;
    let table = quantile_table(a)?;
    let start = Instant::now();
    let analysis = analyze(&obs, &cfg, Some(&table))?;
    let out = InferOutput::new(&analysis, &cfg, &table, start.elapsed());
    write_output(a.out.as_deref(), &to_json(&out)?)
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), Failure> {
    let spec: ScenarioSpec = a.scenario_spec();
    let cfg = StudyConfig {
        reps: a.reps,
        master_seed: a.master_seed(),
        pipeline: a.pipeline(&spec)?,
        inference: a.inference,
    };
    if cfg.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let report = run_study(&spec, &cfg)?;
    if let Some(path) = &a.json {
        write_output(Some(path), &report.to_json()?)?;
    }
    write_output(None, report.to_table().trim_end())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("could not set up {n} threads: {e}")))?;
    }
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("seedcp: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
