// SPDX-License-Identifier: MIT OR Apache-2.0

//! Gram-matrix engine for kernel CUSUM statistics.
//!
//! Every functional used by detection and refinement is a quadratic form in
//! the kernel bumps `F_t = K_h(. - X_t)`. The context keeps 2-D prefix sums
//! of the squared bump distances `D_ij = ||F_i - F_j||^2` together with the
//! diagonal `G_tt = <F_t, F_t>`; any block sum of the Gram matrix follows
//! from `G_ij = (G_ii + G_jj - D_ij) / 2`. Only `O(T^2)` prefix storage is
//! kept, rows of `D` are streamed into it during the build.
//!
//! Times are 1-based and segments are half-open, `(a, b]` meaning
//! observations `a + 1 ..= b`.

use rayon::prelude::*;

use crate::data::ObservationMatrix;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Kernel Gram context over one sample at one bandwidth.
#[derive(Clone, Debug)]
pub struct GramContext {
    spec: KernelSpec,
    obs: ObservationMatrix,
    diag_prefix: Vec<f64>,
    // (T + 1) x (T + 1), dist_prefix[i][j] = sum_{a <= i, b <= j} D_ab
    dist_prefix: Vec<f64>,
}

impl GramContext {
    /// Builds the context in `O(T^2 p)` time.
    pub fn build(obs: &ObservationMatrix, spec: &KernelSpec) -> Result<Self> {
        if spec.dim != obs.dim() {
            return Err(Error::input(format!(
                "kernel dimension {} does not match data dimension {}",
                spec.dim,
                obs.dim()
            )));
        }
        let n = obs.len();
        let stride = n + 1;
        let mut dist_prefix = vec![0.0; stride * stride];
        // row i + 1 first receives the running row sums of D_i.
        dist_prefix[stride..]
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i, out)| {
                let xi = obs.row(i);
                let mut acc = 0.0;
                for j in 0..n {
                    acc += spec.l2_sq_distance_unchecked(xi, obs.row(j));
                    out[j + 1] = acc;
                }
            });
        for i in 1..=n {
            let (prev, cur) = dist_prefix.split_at_mut(i * stride);
            let prev = &prev[(i - 1) * stride..];
            for j in 1..=n {
                cur[j] += prev[j];
            }
        }
        let self_inner = spec.self_inner();
        let mut diag_prefix = Vec::with_capacity(stride);
        diag_prefix.push(0.0);
        for t in 0..n {
            // every supported family has a translation-invariant diagonal
            diag_prefix.push(self_inner * (t + 1) as f64);
        }
        Ok(Self {
            spec: *spec,
            obs: obs.clone(),
            diag_prefix,
            dist_prefix,
        })
    }

    /// Sample size `T`.
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn observations(&self) -> &ObservationMatrix {
        &self.obs
    }

    fn check_segment(&self, a: usize, b: usize) -> Result<()> {
        if a >= b || b > self.len() {
            return Err(Error::input(format!(
                "segment ({a}, {b}] is empty or exceeds T = {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// `G_ij` for 1-based `i, j`, computed directly from the kernel.
    pub fn gram_entry(&self, i: usize, j: usize) -> f64 {
        self.spec
            .l2_inner_unchecked(self.obs.row(i - 1), self.obs.row(j - 1))
    }

    /// `sum_{i in (a, b], j in (c, d]} D_ij`.
    pub fn dist_block_sum(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let s = self.len() + 1;
        let p = &self.dist_prefix;
        p[b * s + d] - p[a * s + d] - p[b * s + c] + p[a * s + c]
    }

    /// `sum_{t in (a, b]} G_tt`.
    pub fn diag_sum(&self, a: usize, b: usize) -> f64 {
        self.diag_prefix[b] - self.diag_prefix[a]
    }

    /// `sum_{i in (a, b], j in (c, d]} G_ij`.
    pub fn gram_block_sum(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let rows = (b - a) as f64;
        let cols = (d - c) as f64;
        0.5 * (cols * self.diag_sum(a, b) + rows * self.diag_sum(c, d)
            - self.dist_block_sum(a, b, c, d))
    }

    /// The 2-D prefix sum of the Gram matrix, `sum_{i <= s, j <= t} G_ij`.
    pub fn gram_prefix(&self, s: usize, t: usize) -> f64 {
        if s == 0 || t == 0 {
            0.0
        } else {
            self.gram_block_sum(0, s, 0, t)
        }
    }

    /// `|| mean_{(a,b]} F - mean_{(c,d]} F ||^2_{L2}`.
    pub fn mean_diff_sq(&self, a: usize, b: usize, c: usize, d: usize) -> Result<f64> {
        self.check_segment(a, b)?;
        self.check_segment(c, d)?;
        let m = (b - a) as f64;
        let n = (d - c) as f64;
        let v = self.dist_block_sum(a, b, c, d) / (m * n)
            - self.dist_block_sum(a, b, a, b) / (2.0 * m * m)
            - self.dist_block_sum(c, d, c, d) / (2.0 * n * n);
        Ok(v.max(0.0))
    }

    /// CUSUM weights `(a, b)` of the left and right kernel sums.
    pub fn cusum_weights(s: usize, t: usize, e: usize) -> (f64, f64) {
        let n = (e - s) as f64;
        let left = (t - s) as f64;
        let right = (e - t) as f64;
        ((right / (n * left)).sqrt(), (left / (n * right)).sqrt())
    }

    fn cusum_sq(&self, s: usize, t: usize, e: usize) -> f64 {
        let n = (e - s) as f64;
        let left = (t - s) as f64;
        let right = (e - t) as f64;
        // (left * right / n) * || mean_left - mean_right ||^2
        let v = self.dist_block_sum(s, t, t, e) / n
            - right / (2.0 * n * left) * self.dist_block_sum(s, t, s, t)
            - left / (2.0 * n * right) * self.dist_block_sum(t, e, t, e);
        v.max(0.0)
    }

    /// `|| F~_{t,h}^{(s,e]} ||_{L2}` for `0 <= s < t < e <= T`.
    pub fn cusum_norm(&self, s: usize, t: usize, e: usize) -> Result<f64> {
        if !(s < t && t < e && e <= self.len()) {
            return Err(Error::input(format!(
                "CUSUM needs 0 <= s < t < e <= T, got s={s}, t={t}, e={e}, T={}",
                self.len()
            )));
        }
        Ok(self.cusum_sq(s, t, e).sqrt())
    }

    /// Maximizes the CUSUM norm over `t` in `[s + trim, e - trim]` (and
    /// strictly inside `(s, e)`). Ties go to the smallest `t`.
    pub fn cusum_argmax(&self, s: usize, e: usize, trim: usize) -> Result<(usize, f64)> {
        if s >= e || e > self.len() {
            return Err(Error::input(format!(
                "interval ({s}, {e}] is empty or exceeds T = {}",
                self.len()
            )));
        }
        if e - s <= 2 * trim {
            return Err(Error::IntervalTooShort { s, e, trim });
        }
        let lo = (s + trim).max(s + 1);
        let hi = (e - trim).min(e - 1);
        if lo > hi {
            return Err(Error::IntervalTooShort { s, e, trim });
        }
        let mut best = (lo, self.cusum_sq(s, lo, e));
        for t in (lo + 1)..=hi {
            let v = self.cusum_sq(s, t, e);
            if v > best.1 {
                best = (t, v);
            }
        }
        Ok((best.0, best.1.sqrt()))
    }

    /// `|| F_t - mean_{(a,b]} F ||^2_{L2}`.
    pub fn segment_mean_sq_dist(&self, t: usize, a: usize, b: usize) -> Result<f64> {
        self.check_segment(a, b)?;
        if t == 0 || t > self.len() {
            return Err(Error::input(format!("time {t} outside 1..={}", self.len())));
        }
        let m = (b - a) as f64;
        let v = self.dist_block_sum(t - 1, t, a, b) / m
            - self.dist_block_sum(a, b, a, b) / (2.0 * m * m);
        Ok(v.max(0.0))
    }

    /// `<F_t, mean_{(a,b]} F>_{L2}`.
    pub fn inner_with_segment_mean(&self, t: usize, a: usize, b: usize) -> Result<f64> {
        self.check_segment(a, b)?;
        if t == 0 || t > self.len() {
            return Err(Error::input(format!("time {t} outside 1..={}", self.len())));
        }
        Ok(self.gram_block_sum(t - 1, t, a, b) / (b - a) as f64)
    }

    /// `sum_{t in (a,b]} || F_t - mean_{(a,b]} F ||^2`.
    pub fn within_scatter(&self, a: usize, b: usize) -> Result<f64> {
        self.check_segment(a, b)?;
        Ok((self.dist_block_sum(a, b, a, b) / (2.0 * (b - a) as f64)).max(0.0))
    }
}

/// Builds a [`GramContext`].
pub fn build_gram(obs: &ObservationMatrix, spec: &KernelSpec) -> Result<GramContext> {
    GramContext::build(obs, spec)
}

/// `|| mean_{(a,b]} F - mean_{(c,d]} F ||^2_{L2}` computed by streaming the
/// required kernel blocks with compensated sums, without any `O(T^2)`
/// storage.
pub fn streaming_mean_diff_sq(
    obs: &ObservationMatrix,
    spec: &KernelSpec,
    left: (usize, usize),
    right: (usize, usize),
) -> Result<f64> {
    if spec.dim != obs.dim() {
        return Err(Error::input(format!(
            "kernel dimension {} does not match data dimension {}",
            spec.dim,
            obs.dim()
        )));
    }
    for &(a, b) in &[left, right] {
        if a >= b || b > obs.len() {
            return Err(Error::input(format!(
                "segment ({a}, {b}] is empty or exceeds T = {}",
                obs.len()
            )));
        }
    }
    let block = |(a, b): (usize, usize), (c, d): (usize, usize)| -> f64 {
        let partial: Vec<CompensatedSum> = (a..b)
            .into_par_iter()
            .map(|i| {
                let xi = obs.row(i);
                let mut acc = CompensatedSum::default();
                for j in c..d {
                    acc.add(spec.l2_sq_distance_unchecked(xi, obs.row(j)));
                }
                acc
            })
            .collect();
        let mut total = CompensatedSum::default();
        for p in &partial {
            total.add(p.sum);
            total.add(p.carry);
        }
        total.value()
    };
    let m = (left.1 - left.0) as f64;
    let n = (right.1 - right.0) as f64;
    let v = block(left, right) / (m * n)
        - block(left, left) / (2.0 * m * m)
        - block(right, right) / (2.0 * n * n);
    Ok(v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_obs(n: usize, p: usize, seed: u64) -> ObservationMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.0..2.0)).collect();
        ObservationMatrix::new(data, n, p).unwrap()
    }

    /// Direct `a^2 S11 - 2ab S12 + b^2 S22` with explicit Gram entries.
    fn cusum_direct(ctx: &GramContext, s: usize, t: usize, e: usize) -> f64 {
        let (a, b) = GramContext::cusum_weights(s, t, e);
        let block = |r0: usize, r1: usize, c0: usize, c1: usize| {
            let mut acc = 0.0;
            for i in r0 + 1..=r1 {
                for j in c0 + 1..=c1 {
                    acc += ctx.gram_entry(i, j);
                }
            }
            acc
        };
        (a * a * block(s, t, s, t) - 2.0 * a * b * block(s, t, t, e) + b * b * block(t, e, t, e))
            .max(0.0)
            .sqrt()
    }

    #[test]
    fn singleton_gram() {
        let obs = ObservationMatrix::from_column(&[0.7]).unwrap();
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let ctx = GramContext::build(&obs, &k).unwrap();
        assert_relative_eq!(ctx.gram_prefix(1, 1), k.self_inner(), max_relative = 1e-15);
    }

    #[test]
    fn identical_rows_have_constant_gram() {
        let obs = ObservationMatrix::from_column(&[1.5, 1.5, 1.5]).unwrap();
        let k = KernelSpec::gaussian(1.0, 1).unwrap();
        let ctx = GramContext::build(&obs, &k).unwrap();
        for i in 1..=3 {
            for j in 1..=3 {
                assert_relative_eq!(
                    ctx.gram_block_sum(i - 1, i, j - 1, j),
                    0.282_094_791_773_878_1,
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn prefix_matches_direct_sum() {
        for fam in [
            KernelFamily::Gaussian,
            KernelFamily::UniformProduct,
            KernelFamily::EpanechnikovProduct,
        ] {
            let obs = random_obs(10, 2, 3);
            let k = KernelSpec::new(fam, 0.9, 2).unwrap();
            let ctx = GramContext::build(&obs, &k).unwrap();
            let mut direct = 0.0;
            for i in 1..=10 {
                for j in 1..=10 {
                    direct += ctx.gram_entry(i, j);
                }
            }
            assert_relative_eq!(ctx.gram_prefix(10, 10), direct, max_relative = 1e-12);
            assert_relative_eq!(
                ctx.gram_prefix(4, 7),
                {
                    let mut acc = 0.0;
                    for i in 1..=4 {
                        for j in 1..=7 {
                            acc += ctx.gram_entry(i, j);
                        }
                    }
                    acc
                },
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        // Gershgorin is too weak here; use the Cholesky attempt with a tiny shift.
        let obs = random_obs(12, 2, 11);
        let k = KernelSpec::gaussian(0.6, 2).unwrap();
        let ctx = GramContext::build(&obs, &k).unwrap();
        let n = 12;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = ctx.gram_entry(i + 1, j + 1);
            }
            a[i * n + i] += 1e-10;
        }
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            assert!(d > 0.0, "pivot {j} = {d}");
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = v / d;
            }
        }
    }

    #[test]
    fn cusum_matches_direct_expansion() {
        for fam in [
            KernelFamily::Gaussian,
            KernelFamily::UniformProduct,
            KernelFamily::EpanechnikovProduct,
        ] {
            let obs = random_obs(9, 2, 5);
            let k = KernelSpec::new(fam, 1.1, 2).unwrap();
            let ctx = GramContext::build(&obs, &k).unwrap();
            for s in 0..7 {
                for t in (s + 1)..9 {
                    for e in (t + 1)..=9 {
                        let fast = ctx.cusum_norm(s, t, e).unwrap();
                        let slow = cusum_direct(&ctx, s, t, e);
                        assert!(
                            (fast - slow).abs() <= 1e-10 * (1.0 + slow),
                            "{fam:?} {s} {t} {e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn constant_data_has_zero_cusum() {
        let obs = ObservationMatrix::from_rows(&vec![vec![0.3, -1.0]; 10]).unwrap();
        let ctx = GramContext::build(&obs, &KernelSpec::gaussian(0.5, 2).unwrap()).unwrap();
        for t in 1..10 {
            assert!(ctx.cusum_norm(0, t, 10).unwrap() <= 1e-10);
        }
        let (b, a) = ctx.cusum_argmax(0, 10, 2).unwrap();
        assert_eq!(b, 2);
        assert!(a <= 1e-10);
    }

    #[test]
    fn symmetric_midpoint_weights() {
        let (a, b) = GramContext::cusum_weights(0, 2, 4);
        assert_relative_eq!(a, 0.5);
        assert_relative_eq!(b, 0.5);
    }

    #[test]
    fn argmax_finds_two_atom_split() {
        let vals: Vec<f64> = (1..=10).map(|t| if t <= 5 { 0.0 } else { 10.0 }).collect();
        let obs = ObservationMatrix::from_column(&vals).unwrap();
        let ctx = GramContext::build(&obs, &KernelSpec::gaussian(1.0, 1).unwrap()).unwrap();
        // exhaustive oracle over the admissible candidates
        let oracle = (1..=9)
            .map(|t| (t, cusum_direct(&ctx, 0, t, 10)))
            .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        assert_eq!(oracle.0, 5);
        assert_eq!(ctx.cusum_argmax(0, 10, 1).unwrap().0, 5);
    }

    #[test]
    fn argmax_rejects_overtrimmed_interval() {
        let obs = random_obs(10, 1, 1);
        let ctx = GramContext::build(&obs, &KernelSpec::gaussian(1.0, 1).unwrap()).unwrap();
        assert!(matches!(
            ctx.cusum_argmax(2, 8, 3),
            Err(Error::IntervalTooShort { .. })
        ));
        assert!(ctx.cusum_argmax(2, 9, 3).is_ok());
        assert!(ctx.cusum_argmax(3, 4, 0).is_err());
    }

    #[test]
    fn index_order_violations() {
        let obs = random_obs(6, 1, 1);
        let ctx = GramContext::build(&obs, &KernelSpec::gaussian(1.0, 1).unwrap()).unwrap();
        assert!(ctx.cusum_norm(2, 2, 5).is_err());
        assert!(ctx.cusum_norm(0, 3, 7).is_err());
        assert!(ctx.segment_mean_sq_dist(1, 3, 3).is_err());
    }

    #[test]
    fn segment_distance_edge_cases() {
        let obs = ObservationMatrix::from_column(&[2.0; 6]).unwrap();
        let ctx = GramContext::build(&obs, &KernelSpec::gaussian(0.3, 1).unwrap()).unwrap();
        assert_eq!(ctx.segment_mean_sq_dist(3, 1, 5).unwrap(), 0.0);
        let obs = random_obs(6, 2, 9);
        let ctx = GramContext::build(&obs, &KernelSpec::gaussian(0.3, 2).unwrap()).unwrap();
        assert!(ctx.segment_mean_sq_dist(4, 3, 4).unwrap() < 1e-12);
    }

    #[test]
    fn reversal_mirrors_cusum() {
        let obs = random_obs(12, 2, 21);
        let k = KernelSpec::gaussian(0.8, 2).unwrap();
        let fwd = GramContext::build(&obs, &k).unwrap();
        let rev = GramContext::build(&obs.reversed(), &k).unwrap();
        let n = 12;
        for s in 0..n {
            for t in (s + 1)..n {
                for e in (t + 1)..=n {
                    let a = fwd.cusum_norm(s, t, e).unwrap();
                    let b = rev.cusum_norm(n - e, n - t, n - s).unwrap();
                    assert!((a - b).abs() <= 1e-12 * (1.0 + a));
                }
            }
        }
    }

    #[test]
    fn streaming_agrees_with_prefix_context() {
        let obs = random_obs(40, 2, 4);
        let k = KernelSpec::gaussian(0.4, 2).unwrap();
        let ctx = GramContext::build(&obs, &k).unwrap();
        let a = ctx.mean_diff_sq(0, 17, 17, 40).unwrap();
        let b = streaming_mean_diff_sq(&obs, &k, (0, 17), (17, 40)).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn dimension_mismatch() {
        let obs = random_obs(5, 2, 1);
        assert!(GramContext::build(&obs, &KernelSpec::gaussian(1.0, 3).unwrap()).is_err());
    }
}
