// SPDX-License-Identifier: MIT OR Apache-2.0

fn augment(points: &[usize], len: usize) -> Vec<usize> {
    let mut v = Vec::with_capacity(points.len() + 2);
    v.push(1);
    v.extend_from_slice(points);
    v.push(len + 1);
    v
}

fn directed(from: &[usize], to: &[usize]) -> usize {
    from.iter()
        .map(|&x| to.iter().map(|&y| x.abs_diff(y)).min().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Scaled Hausdorff distance between two change-point sets, both augmented
/// with `1` and `T + 1`.
pub fn hausdorff(estimate: &[usize], truth: &[usize], len: usize) -> f64 {
    let a = augment(estimate, len);
    let b = augment(truth, len);
    directed(&a, &b).max(directed(&b, &a)) as f64 / len as f64
}

/// `|estimate_i - truth_i|` after sorting both; `None` when sizes differ.
pub fn matched_abs_errors(estimate: &[usize], truth: &[usize]) -> Option<Vec<f64>> {
    if estimate.len() != truth.len() {
        return None;
    }
    let mut e = estimate.to_vec();
    let mut t = truth.to_vec();
    e.sort_unstable();
    t.sort_unstable();
    Some(
        e.iter()
            .zip(&t)
            .map(|(a, b)| a.abs_diff(*b) as f64)
            .collect(),
    )
}
