// SPDX-License-Identifier: MIT OR Apache-2.0

//! h-adaptive cubature over boxes: Gauss-Kronrod 7/15 in one dimension,
//! the Genz-Malik 7/5 embedded rule in two or more. Used only to check the
//! closed-form Gram algebra, never on the detection path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::KernelSpec;
use crate::error::{Error, Result};

/// Evaluation budget used when none is given.
pub const DEFAULT_MAX_EVALS: usize = 100_000;

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubatureEstimate {
    pub value: f64,
    /// Estimated absolute error of `value`.
    pub error: f64,
    pub evaluations: usize,
    /// `false` when the budget ran out before the tolerance was met.
    pub converged: bool,
}

struct Region {
    center: Vec<f64>,
    half: Vec<f64>,
    integral: f64,
    error: f64,
    split_axis: usize,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Region {}

impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Region {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GK_GAUSS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn eval_gk15(f: &mut impl FnMut(&[f64]) -> f64, center: &[f64], half: &[f64]) -> (f64, f64) {
    let c = center[0];
    let w = half[0];
    let f0 = f(&[c]);
    let mut kronrod = GK_KRONROD[7] * f0;
    let mut gauss = GK_GAUSS[3] * f0;
    for i in 0..7 {
        let x = GK_NODES[i] * w;
        let pair = f(&[c - x]) + f(&[c + x]);
        kronrod += GK_KRONROD[i] * pair;
        if i % 2 == 1 {
            gauss += GK_GAUSS[i / 2] * pair;
        }
    }
    (kronrod * w, ((kronrod - gauss) * w).abs())
}

fn eval_genz_malik(
    f: &mut impl FnMut(&[f64]) -> f64,
    center: &[f64],
    half: &[f64],
) -> (f64, f64, usize) {
    let n = center.len();
    let nf = n as f64;
    let lambda2 = (9.0f64 / 70.0).sqrt();
    let lambda4 = (9.0f64 / 10.0).sqrt();
    let lambda5 = (9.0f64 / 19.0).sqrt();
    let ratio = (lambda2 * lambda2) / (lambda4 * lambda4);

    let w1 = (12824.0 - 9120.0 * nf + 400.0 * nf * nf) / 19683.0;
    let w2 = 980.0 / 6561.0;
    let w3 = (1820.0 - 400.0 * nf) / 19683.0;
    let w4 = 200.0 / 19683.0;
    let w5 = 6859.0 / 19683.0 / (1u64 << n) as f64;
    let v1 = (729.0 - 950.0 * nf + 50.0 * nf * nf) / 729.0;
    let v2 = 245.0 / 486.0;
    let v3 = (265.0 - 100.0 * nf) / 1458.0;
    let v4 = 25.0 / 729.0;

    let volume: f64 = half.iter().map(|w| 2.0 * w).product();
    let mut x = center.to_vec();
    let f0 = f(&x);

    let mut sum2 = 0.0;
    let mut sum3 = 0.0;
    let mut best_axis = 0;
    let mut best_diff = -1.0;
    for i in 0..n {
        x[i] = center[i] - lambda2 * half[i];
        let mut f2 = f(&x);
        x[i] = center[i] + lambda2 * half[i];
        f2 += f(&x);
        x[i] = center[i] - lambda4 * half[i];
        let mut f3 = f(&x);
        x[i] = center[i] + lambda4 * half[i];
        f3 += f(&x);
        x[i] = center[i];
        sum2 += f2;
        sum3 += f3;
        let diff = ((f2 - 2.0 * f0) - ratio * (f3 - 2.0 * f0)).abs();
        // prefer the wider side when fourth differences are comparable
        if diff > best_diff * (1.0 + 1e-10)
            || ((diff - best_diff).abs() <= 1e-10 * best_diff.abs() && half[i] > half[best_axis])
        {
            best_diff = diff;
            best_axis = i;
        }
    }

    let mut sum4 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                x[i] = center[i] + si * lambda4 * half[i];
                x[j] = center[j] + sj * lambda4 * half[j];
                sum4 += f(&x);
            }
            x[i] = center[i];
            x[j] = center[j];
        }
    }

    let mut sum5 = 0.0;
    for mask in 0..(1usize << n) {
        for (i, xi) in x.iter_mut().enumerate() {
            let sign = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
            *xi = center[i] + sign * lambda5 * half[i];
        }
        sum5 += f(&x);
    }

    let deg7 = volume * (w1 * f0 + w2 * sum2 + w3 * sum3 + w4 * sum4 + w5 * sum5);
    let deg5 = volume * (v1 * f0 + v2 * sum2 + v3 * sum3 + v4 * sum4);
    (deg7, (deg7 - deg5).abs(), best_axis)
}

/// Adaptively integrates `f` over the box `[lo, hi]` until the estimated
/// error is at most `rel_tol * |value|` or `max_evals` is reached.
pub fn integrate_box(
    f: impl FnMut(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    rel_tol: f64,
    max_evals: usize,
) -> Result<CubatureEstimate> {
    integrate_box_partitioned(f, lo, hi, &vec![1; lo.len()], rel_tol, max_evals)
}

/// [`integrate_box`] starting from a uniform grid of `cells[i]` pieces per
/// axis. A fine enough start keeps the error estimate honest for integrands
/// with several narrow peaks, which a single coarse rule can step over.
pub fn integrate_box_partitioned(
    mut f: impl FnMut(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    cells: &[usize],
    rel_tol: f64,
    max_evals: usize,
) -> Result<CubatureEstimate> {
    let n = lo.len();
    if n == 0 || hi.len() != n || cells.len() != n {
        return Err(Error::input(
            "integration box bounds must be non-empty and of equal length",
        ));
    }
    if cells.contains(&0) {
        return Err(Error::input("every axis needs at least one cell"));
    }
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(Error::config("cubature tolerance must be positive"));
    }
    if lo
        .iter()
        .zip(hi)
        .any(|(a, b)| a.is_nan() || b.is_nan() || a >= b)
    {
        return Err(Error::input(
            "integration box must have lo < hi on every axis",
        ));
    }

    let mut evals = 0usize;
    let mut counted = |x: &[f64]| {
        evals += 1;
        f(x)
    };
    let mut evaluate = |center: Vec<f64>, half: Vec<f64>| -> Region {
        let (integral, error, split_axis) = if n == 1 {
            let (i, e) = eval_gk15(&mut counted, &center, &half);
            (i, e, 0)
        } else {
            eval_genz_malik(&mut counted, &center, &half)
        };
        Region {
            center,
            half,
            integral,
            error,
            split_axis,
        }
    };

    let per_region = if n == 1 {
        15
    } else {
        (1 << n) + 2 * n * n + 2 * n + 1
    };
    let half: Vec<f64> = (0..n)
        .map(|i| 0.5 * (hi[i] - lo[i]) / cells[i] as f64)
        .collect();
    let mut heap = BinaryHeap::new();
    let mut index = vec![0usize; n];
    loop {
        let center: Vec<f64> = (0..n)
            .map(|i| lo[i] + (2 * index[i] + 1) as f64 * half[i])
            .collect();
        heap.push(evaluate(center, half.clone()));
        // odometer over the cell grid
        let mut axis = 0;
        while axis < n {
            index[axis] += 1;
            if index[axis] < cells[axis] {
                break;
            }
            index[axis] = 0;
            axis += 1;
        }
        if axis == n {
            break;
        }
    }
    let mut used = per_region * heap.len();
    let mut total: f64 = heap.iter().map(|r| r.integral).sum();
    let mut total_err: f64 = heap.iter().map(|r| r.error).sum();

    while total_err > rel_tol * total.abs() && used + 2 * per_region <= max_evals {
        let worst = heap.pop().expect("heap holds at least one region");
        let axis = worst.split_axis;
        let mut half = worst.half.clone();
        half[axis] *= 0.5;
        let mut left_c = worst.center.clone();
        left_c[axis] -= half[axis];
        let mut right_c = worst.center;
        right_c[axis] += half[axis];
        let left = evaluate(left_c, half.clone());
        let right = evaluate(right_c, half);
        used += 2 * per_region;
        total += left.integral + right.integral - worst.integral;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // re-sum to shed the drift of the running updates
    let value: f64 = heap.iter().map(|r| r.integral).sum();
    let error: f64 = heap.iter().map(|r| r.error).sum();
    Ok(CubatureEstimate {
        value,
        error,
        evaluations: used,
        converged: error <= rel_tol * value.abs(),
    })
}

/// Numerical `|| sum_i w_i K_h(. - c_i) ||_{L2}` with the default budget.
pub fn cubature_l2_norm(
    spec: &KernelSpec,
    centers: &[Vec<f64>],
    weights: &[f64],
    tol: f64,
) -> Result<CubatureEstimate> {
    cubature_l2_norm_with_budget(spec, centers, weights, tol, DEFAULT_MAX_EVALS)
}

/// Numerical L2 norm of a weighted bump mixture. `tol` is the relative
/// accuracy requested on the norm.
pub fn cubature_l2_norm_with_budget(
    spec: &KernelSpec,
    centers: &[Vec<f64>],
    weights: &[f64],
    tol: f64,
    max_evals: usize,
) -> Result<CubatureEstimate> {
    if centers.is_empty() || centers.len() != weights.len() {
        return Err(Error::input(format!(
            "need as many weights as centers and at least one of each (got {} and {})",
            centers.len(),
            weights.len()
        )));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != spec.dim) {
        return Err(Error::input(format!(
            "center of length {} does not match kernel dimension {}",
            c.len(),
            spec.dim
        )));
    }
    let reach = spec.bandwidth * spec.family.support_radius().unwrap_or(8.0);
    let lo: Vec<f64> = (0..spec.dim)
        .map(|j| centers.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min) - reach)
        .collect();
    let hi: Vec<f64> = (0..spec.dim)
        .map(|j| {
            centers
                .iter()
                .map(|c| c[j])
                .fold(f64::NEG_INFINITY, f64::max)
                + reach
        })
        .collect();

    let mut shifted = vec![0.0; spec.dim];
    let integrand = |x: &[f64]| {
        let mut acc = 0.0;
        for (c, w) in centers.iter().zip(weights) {
            for ((s, xi), ci) in shifted.iter_mut().zip(x).zip(c) {
                *s = xi - ci;
            }
            acc += w * spec.value_unchecked(&shifted);
        }
        acc * acc
    };
    // start from cells about two bandwidths wide, within a quarter of the budget
    let per_region = if spec.dim == 1 {
        15
    } else {
        (1 << spec.dim) + 2 * spec.dim * spec.dim + 2 * spec.dim + 1
    };
    let mut per_axis = 1usize;
    let widest = (0..spec.dim).map(|j| hi[j] - lo[j]).fold(0.0, f64::max);
    let wanted = (widest / (2.0 * spec.bandwidth)).ceil().max(1.0) as usize;
    while per_axis < wanted && (per_axis + 1).pow(spec.dim as u32) * per_region * 4 <= max_evals {
        per_axis += 1;
    }
    let cells: Vec<usize> = (0..spec.dim)
        .map(|j| {
            (((hi[j] - lo[j]) / widest) * per_axis as f64)
                .ceil()
                .max(1.0) as usize
        })
        .collect();
    // the norm is a square root, so its relative error is half the integral's
    let sq = integrate_box_partitioned(integrand, &lo, &hi, &cells, 2.0 * tol, max_evals)?;
    let value = sq.value.max(0.0).sqrt();
    let error = if value > 0.0 {
        sq.error / (2.0 * value)
    } else {
        sq.error.sqrt()
    };
    Ok(CubatureEstimate {
        value,
        error,
        evaluations: sq.evaluations,
        converged: sq.converged,
    })
}
