// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use seedcp::refine::{estimate_jump, objective};
use seedcp::simlab::{generate_scenario, ScenarioId, ScenarioSpec};
use seedcp::{
    refine, ChangePointSet, GramContext, KernelFamily, KernelSpec, MeanAnchor, ObservationMatrix,
    RefineConfig,
};

fn noisy_two_segment(len: usize, split: usize, seed: u64) -> ObservationMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|t| {
            let shift = if t < split { 0.0 } else { 1.5 };
            (0..2)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    shift + z
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    ObservationMatrix::from_rows(&rows).unwrap()
}

// Q from explicit kernel inner products, no prefix sums.
fn objective_by_loops(
    obs: &ObservationMatrix,
    spec: &KernelSpec,
    split: usize,
    anchor: MeanAnchor,
) -> Vec<f64> {
    let n = obs.len();
    let g = |i: usize, j: usize| spec.l2_inner(obs.row(i), obs.row(j)).unwrap();
    let dist_to_mean = |t: usize, a: usize, b: usize| {
        let m = (b - a) as f64;
        let mut cross = 0.0;
        let mut within = 0.0;
        for i in a..b {
            cross += g(t, i);
            for j in a..b {
                within += g(i, j);
            }
        }
        g(t, t) - 2.0 * cross / m + within / (m * m)
    };
    (1..n)
        .map(|eta| {
            let (l, r) = match anchor {
                MeanAnchor::Preliminary => (split, split),
                MeanAnchor::Candidate => (eta, eta),
            };
            (0..eta).map(|t| dist_to_mean(t, 0, l)).sum::<f64>()
                + (eta..n).map(|t| dist_to_mean(t, r, n)).sum::<f64>()
        })
        .collect()
}

#[test]
fn objective_matches_double_loop() {
    for (seed, anchor) in [(1, MeanAnchor::Preliminary), (2, MeanAnchor::Candidate)] {
        let obs = noisy_two_segment(60, 25, seed);
        let spec = KernelSpec::gaussian(0.7, 2).unwrap();
        let ctx = GramContext::build(&obs, &spec).unwrap();
        let fast = objective(&ctx, 28, anchor).unwrap();
        let slow = objective_by_loops(&obs, &spec, 28, anchor);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-12), "{a} vs {b}");
        }
    }
}

#[test]
fn refinement_stays_inside_windows() {
    for seed in 0..10 {
        let s = generate_scenario(&ScenarioSpec::new(ScenarioId::S1, 150, 3, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prelim = ChangePointSet::new(
            vec![50 + rng.random_range(0..8), 100 - rng.random_range(0..8)],
            150,
        )
        .unwrap();
        for r in refine(&s.obs, &prelim, &RefineConfig::default()).unwrap() {
            assert!(r.window.0 < r.eta_tilde && r.eta_tilde < r.window.1);
            let h1 = r.h1.unwrap();
            assert!((h1 - r.c_kappa * r.kappa_hat.powf(0.5)).abs() < 1e-12);
        }
    }
}

#[test]
fn noiseless_offset_estimate_snaps_back() {
    let mut rows = vec![vec![0.0, 0.0]; 24];
    rows.extend(vec![vec![3.0, -3.0]; 26]);
    let obs = ObservationMatrix::from_rows(&rows).unwrap();
    for start in [21, 27] {
        let prelim = ChangePointSet::new(vec![start], 50).unwrap();
        let r = refine(&obs, &prelim, &RefineConfig::default()).unwrap();
        assert_eq!(r[0].eta_tilde, 24);
    }
}

#[test]
fn jump_estimate_converges_to_gaussian_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let values: Vec<f64> = (0..10_000)
        .map(|t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if t < 5000 {
                z
            } else {
                z + 2.0
            }
        })
        .collect();
    let obs = ObservationMatrix::from_column(&values).unwrap();
    let prelim = ChangePointSet::new(vec![5000], 10_000).unwrap();
    let kappa = estimate_jump(&obs, &prelim, 0.05, KernelFamily::Gaussian, 1).unwrap();
    let target = (2.0 * (4.0 * std::f64::consts::PI).powf(-0.5) * (1.0 - (-1.0f64).exp())).sqrt();
    assert!(
        (kappa - target).abs() <= 0.1 * target,
        "{kappa} vs {target}"
    );
}

#[test]
fn empty_segments_and_bad_indices_are_rejected() {
    let obs = ObservationMatrix::from_column(&[0.0, 1.0, 2.0, 3.0]).unwrap();
    // a change point at T would leave an empty right segment
    assert!(ChangePointSet::new(vec![4], 4).is_err());
    let prelim = ChangePointSet::new(vec![2], 4).unwrap();
    assert!(estimate_jump(&obs, &prelim, 0.1, KernelFamily::Gaussian, 0).is_err());
    assert!(estimate_jump(&obs, &prelim, 0.1, KernelFamily::Gaussian, 2).is_err());
    let wrong_len = ChangePointSet::new(vec![2], 10).unwrap();
    assert!(refine(&obs, &wrong_len, &RefineConfig::default()).is_err());
}
