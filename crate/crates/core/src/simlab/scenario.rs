// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::ObservationMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
    S5,
    #[serde(rename = "INFER")]
    Infer,
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ScenarioId::S1 => "S1",
            ScenarioId::S2 => "S2",
            ScenarioId::S3 => "S3",
            ScenarioId::S4 => "S4",
            ScenarioId::S5 => "S5",
            ScenarioId::Infer => "INFER",
        };
        f.write_str(s)
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(ScenarioId::S1),
            "S2" => Ok(ScenarioId::S2),
            "S3" => Ok(ScenarioId::S3),
            "S4" => Ok(ScenarioId::S4),
            "S5" => Ok(ScenarioId::S5),
            "INFER" => Ok(ScenarioId::Infer),
            _ => Err(Error::config(format!(
                "unknown scenario '{s}' (expected S1..S5 or INFER)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub len: usize,
    pub dim: usize,
    pub seed: u64,
    pub ar_coef: f64,
    pub burn_in: usize,
}

impl ScenarioSpec {
    /// Defaults: AR coefficient 0.3 and burn-in 500, except for the
    /// inference scenario whose noise is i.i.d.
    pub fn new(id: ScenarioId, len: usize, dim: usize, seed: u64) -> Self {
        Self {
            id,
            len,
            dim,
            seed,
            ar_coef: if id == ScenarioId::Infer { 0.0 } else { 0.3 },
            burn_in: 500,
        }
    }

    /// Last index of each old regime.
    pub fn true_change_points(&self) -> Vec<usize> {
        match self.id {
            ScenarioId::Infer => vec![self.len / 2],
            _ => vec![self.len / 3, 2 * self.len / 3],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.len < 30 {
            return Err(Error::config(format!(
                "scenario needs T >= 30, got {}",
                self.len
            )));
        }
        if self.dim == 0 {
            return Err(Error::config("scenario needs p >= 1"));
        }
        if !(self.ar_coef.is_finite() && self.ar_coef.abs() < 1.0) {
            return Err(Error::config("AR coefficient must lie in (-1, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSeries {
    pub obs: ObservationMatrix,
    pub true_cps: Vec<usize>,
    pub scenario: Option<ScenarioSpec>,
}

/// Innovation laws used by the scenarios, all with mean zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Innovation {
    Normal,
    /// `Unif(-a, a)`.
    Uniform(f64),
    /// `(X - 1.5) / sqrt(0.75)`, `X ~ Pareto(3, 1)`.
    Pareto,
    /// `(X - e^{1/2}) / sqrt(e (e - 1))`, `X ~ LogNormal(0, 1)`.
    LogNormal,
}

impl Innovation {
    pub fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Innovation::Normal => StandardNormal.sample(rng),
            Innovation::Uniform(a) => rng.random_range(-a..a),
            Innovation::Pareto => {
                let x: f64 = Pareto::new(1.0, 3.0).expect("valid Pareto").sample(rng);
                (x - 1.5) / 0.75f64.sqrt()
            }
            Innovation::LogNormal => {
                let e = std::f64::consts::E;
                let x: f64 = LogNormal::new(0.0, 1.0)
                    .expect("valid LogNormal")
                    .sample(rng);
                (x - e.sqrt()) / (e * (e - 1.0)).sqrt()
            }
        }
    }
}

/// Vector AR(1) `x_t = phi x_{t-1} + eps_t + drift`, started at zero and
/// run through a burn-in.
struct ArPath {
    state: Vec<f64>,
    phi: f64,
    innovation: Innovation,
    drift: f64,
}

impl ArPath {
    fn new(dim: usize, phi: f64, innovation: Innovation, drift: f64) -> Self {
        Self {
            state: vec![0.0; dim],
            phi,
            innovation,
            drift,
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        for x in &mut self.state {
            *x = self.phi * *x + self.innovation.draw(rng) + self.drift;
        }
        &self.state
    }
}

/// Draws one series for `spec`.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<LabeledSeries> {
    spec.validate()?;
    let (t_len, p) = (spec.len, spec.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sqrt3 = 3f64.sqrt();
    let noise_law = match spec.id {
        ScenarioId::S1 | ScenarioId::S4 | ScenarioId::Infer => Innovation::Normal,
        ScenarioId::S2 => Innovation::Uniform(sqrt3),
        ScenarioId::S3 => Innovation::LogNormal,
        ScenarioId::S5 => Innovation::Pareto,
    };
    let phi = spec.ar_coef;
    let mut noise = ArPath::new(p, phi, noise_law, 0.0);
    let mut signal = match spec.id {
        ScenarioId::S2 => Some(ArPath::new(p, phi, Innovation::Uniform(1.0), 0.0)),
        ScenarioId::S3 => Some(ArPath::new(p, phi, Innovation::Pareto, 0.0)),
        ScenarioId::S5 => Some(ArPath::new(p, phi, Innovation::Uniform(sqrt3), 0.5)),
        _ => None,
    };
    for _ in 0..spec.burn_in {
        noise.step(&mut rng);
        if let Some(z) = signal.as_mut() {
            z.step(&mut rng);
        }
    }
    let half = p.div_ceil(2);
    let s1_mean: Vec<f64> = (0..p).map(|j| if j < half { 0.0 } else { 2.0 }).collect();
    let (lo, hi) = match spec.id {
        ScenarioId::Infer => (t_len / 2, t_len),
        _ => (t_len / 3, 2 * t_len / 3),
    };
    let mut data = Vec::with_capacity(t_len * p);
    let mut z = vec![0.0; p];
    for t in 1..=t_len {
        let x = noise.step(&mut rng).to_vec();
        match spec.id {
            ScenarioId::S1 => z.copy_from_slice(&s1_mean),
            ScenarioId::S4 => {
                let sign = if rng.random_bool(0.5) { 1.5 } else { -1.5 };
                z.fill(sign);
            }
            ScenarioId::Infer => z.fill(1.0),
            _ => z.copy_from_slice(signal.as_mut().expect("signal path").step(&mut rng)),
        }
        let active = lo < t && t <= hi;
        data.extend(
            x.iter()
                .zip(&z)
                .map(|(xi, zi)| if active { xi + zi } else { *xi }),
        );
    }
    Ok(LabeledSeries {
        obs: ObservationMatrix::new(data, t_len, p)?,
        true_cps: spec.true_change_points(),
        scenario: Some(*spec),
    })
}

/// Noise-free series of consecutive constant segments `(length, value)`.
pub fn piecewise_constant(segments: &[(usize, Vec<f64>)]) -> Result<LabeledSeries> {
    let dim = segments
        .first()
        .map(|s| s.1.len())
        .ok_or_else(|| Error::input("no segments"))?;
    let mut rows = Vec::new();
    let mut cps = Vec::new();
    for (n, v) in segments {
        if v.len() != dim || *n == 0 {
            return Err(Error::input(
                "segments need equal dimensions and positive lengths",
            ));
        }
        if !rows.is_empty() {
            cps.push(rows.len());
        }
        rows.extend(std::iter::repeat_n(v.clone(), *n));
    }
    Ok(LabeledSeries {
        obs: ObservationMatrix::from_rows(&rows)?,
        true_cps: cps,
        scenario: None,
    })
}
