// SPDX-License-Identifier: MIT OR Apache-2.0

//! Kernel families and exact L2 inner products between kernel bumps.
//!
//! Every L2 functional used by the detector reduces to inner products
//! `<K_h(. - a), K_h(. - b)>`, which have closed forms for all supported
//! families. The adaptive cubature in [`cubature`] is kept as an independent
//! numerical check of those closed forms.

pub mod cubature;

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use cubature::{cubature_l2_norm, CubatureEstimate};

/// Supported kernel families. The compact families are coordinate products
/// of their one-dimensional versions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Gaussian,
    UniformProduct,
    EpanechnikovProduct,
}

impl KernelFamily {
    /// Half-width of the support of the unit-bandwidth kernel, `None` when unbounded.
    pub fn support_radius(self) -> Option<f64> {
        match self {
            KernelFamily::Gaussian => None,
            KernelFamily::UniformProduct | KernelFamily::EpanechnikovProduct => Some(1.0),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "uniform" | "uniform-product" => Ok(KernelFamily::UniformProduct),
            "epanechnikov" | "epanechnikov-product" => Ok(KernelFamily::EpanechnikovProduct),
            other => Err(Error::config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A kernel family at a fixed bandwidth in a fixed dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, dim: usize) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::config(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if dim == 0 {
            return Err(Error::config("kernel dimension must be at least 1"));
        }
        Ok(Self {
            family,
            bandwidth,
            dim,
        })
    }

    pub fn gaussian(bandwidth: f64, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth, dim)
    }

    /// Same family and dimension at another bandwidth.
    pub fn with_bandwidth(&self, bandwidth: f64) -> Result<Self> {
        Self::new(self.family, bandwidth, self.dim)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::input(format!(
                "expected a vector of length {}, got {len}",
                self.dim
            )));
        }
        Ok(())
    }

    /// `K_h(x) = h^{-p} K(x / h)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let h = self.bandwidth;
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                (2.0 * PI * h * h).powf(-(self.dim as f64) / 2.0) * (-sq / (2.0 * h * h)).exp()
            }
            KernelFamily::UniformProduct => x
                .iter()
                .map(|v| if v.abs() <= h { 0.5 / h } else { 0.0 })
                .product(),
            KernelFamily::EpanechnikovProduct => x
                .iter()
                .map(|v| {
                    let u = v / h;
                    if u.abs() <= 1.0 {
                        0.75 * (1.0 - u * u) / h
                    } else {
                        0.0
                    }
                })
                .product(),
        }
    }

    /// `integral K_h(x - a) K_h(x - b) dx`, in closed form.
    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_len(a.len())?;
        self.check_len(b.len())?;
        Ok(self.l2_inner_unchecked(a, b))
    }

    pub(crate) fn l2_inner_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let h = self.bandwidth;
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (4.0 * PI * h * h).powf(-(self.dim as f64) / 2.0) * (-sq / (4.0 * h * h)).exp()
            }
            KernelFamily::UniformProduct => a
                .iter()
                .zip(b)
                .map(|(x, y)| uniform_self_convolution((x - y).abs() / h) / h)
                .product(),
            KernelFamily::EpanechnikovProduct => a
                .iter()
                .zip(b)
                .map(|(x, y)| epanechnikov_self_convolution((x - y).abs() / h) / h)
                .product(),
        }
    }

    /// `|| K_h(. - a) - K_h(. - b) ||^2_{L2}`, evaluated without the
    /// cancellation of `2 <K_h, K_h> - 2 <K_h(. - a), K_h(. - b)>` for
    /// nearby centers. Exactly zero when `a == b`.
    pub(crate) fn l2_sq_distance_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let h = self.bandwidth;
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                -2.0 * self.self_inner() * (-sq / (4.0 * h * h)).exp_m1()
            }
            _ => {
                if a == b {
                    0.0
                } else {
                    (2.0 * (self.self_inner() - self.l2_inner_unchecked(a, b))).max(0.0)
                }
            }
        }
    }

    /// Squared L2 norm of a single bump, `<K_h, K_h>`.
    pub fn self_inner(&self) -> f64 {
        let h = self.bandwidth;
        let per_coord = match self.family {
            KernelFamily::Gaussian => (4.0 * PI * h * h).sqrt().recip(),
            KernelFamily::UniformProduct => uniform_self_convolution(0.0) / h,
            KernelFamily::EpanechnikovProduct => epanechnikov_self_convolution(0.0) / h,
        };
        per_coord.powi(self.dim as i32)
    }
}

/// `(K * K)(u)` for the unit uniform kernel on [-1, 1].
fn uniform_self_convolution(u: f64) -> f64 {
    if u >= 2.0 {
        0.0
    } else {
        (2.0 - u) / 4.0
    }
}

/// `(K * K)(u)` for the unit Epanechnikov kernel, `u >= 0`.
fn epanechnikov_self_convolution(u: f64) -> f64 {
    if u >= 2.0 {
        0.0
    } else {
        let w = 2.0 - u;
        3.0 / 160.0 * w * w * w * (u * u + 6.0 * u + 4.0)
    }
}

/// Point evaluation of `K_h(x)`.
pub fn kernel_value(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    spec.value(x)
}

/// Exact `<K_h(. - a), K_h(. - b)>_{L2}`.
pub fn pairwise_l2_inner(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.l2_inner(a, b)
}
