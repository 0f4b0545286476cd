// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;

use seedcp::detect::{theory_threshold, ThresholdMethod};
use seedcp::simlab::{
    generate_scenario, piecewise_constant, run_study, ScenarioId, ScenarioSpec, StudyConfig,
};
use seedcp::{
    detect, select_threshold, DetectionConfig, GramContext, KernelFamily, KernelSpec,
    ObservationMatrix, PipelineConfig, Threshold,
};

#[test]
fn noiseless_atoms_found_with_permutation_threshold() {
    let s = piecewise_constant(&[(50, vec![0.0]), (50, vec![10.0]), (50, vec![0.0])]).unwrap();
    let d = detect(&s.obs, &DetectionConfig::default()).unwrap();
    assert_eq!(d.change_points.estimates, vec![50, 100]);
}

#[test]
fn permutation_threshold_is_reproducible() {
    let s = generate_scenario(&ScenarioSpec::new(ScenarioId::S2, 120, 2, 4)).unwrap();
    let cfg = DetectionConfig {
        threshold: Threshold::Permutation {
            permutations: 20,
            seed: 8,
        },
        ..Default::default()
    };
    let a = select_threshold(&s.obs, &cfg, ThresholdMethod::Permutation).unwrap();
    let b = select_threshold(&s.obs, &cfg, ThresholdMethod::Permutation).unwrap();
    assert_eq!(a, b);
    assert!(a > 0.0);
}

#[test]
fn study_is_deterministic() {
    let cfg = StudyConfig {
        reps: 3,
        master_seed: 12,
        pipeline: PipelineConfig::default(),
        inference: false,
    };
    let spec = ScenarioSpec::new(ScenarioId::S1, 90, 2, 0);
    let a = run_study(&spec, &cfg).unwrap();
    let b = run_study(&spec, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

fn small_obs() -> impl Strategy<Value = (ObservationMatrix, f64)> {
    (6usize..24, 1usize..3, 0.2f64..2.0).prop_flat_map(|(t, p, h)| {
        proptest::collection::vec(-3.0f64..3.0, t * p)
            .prop_map(move |v| (ObservationMatrix::new(v, t, p).unwrap(), h))
    })
}

proptest! {
    #[test]
    fn gram_is_symmetric_and_diagonal_dominant((obs, h) in small_obs()) {
        let spec = KernelSpec::new(KernelFamily::Gaussian, h, obs.dim()).unwrap();
        let ctx = GramContext::build(&obs, &spec).unwrap();
        for i in 1..=obs.len() {
            for j in 1..=obs.len() {
                let (a, b) = (ctx.gram_entry(i, j), ctx.gram_entry(j, i));
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
                prop_assert!(a <= spec.self_inner() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn cusum_is_translation_invariant((obs, h) in small_obs(), shift in -5.0f64..5.0) {
        let shifted: Vec<f64> = obs.as_slice().iter().map(|v| v + shift).collect();
        let moved = ObservationMatrix::new(shifted, obs.len(), obs.dim()).unwrap();
        let spec = KernelSpec::new(KernelFamily::Gaussian, h, obs.dim()).unwrap();
        let a = GramContext::build(&obs, &spec).unwrap();
        let b = GramContext::build(&moved, &spec).unwrap();
        let t = obs.len() / 2;
        let (x, y) = (a.cusum_norm(0, t, obs.len()).unwrap(), b.cusum_norm(0, t, obs.len()).unwrap());
        prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x));
    }

    #[test]
    fn theory_threshold_grows_with_length(t in 10usize..5000, p in 1usize..6, r in 0.5f64..5.0) {
        prop_assert!(theory_threshold(t + 1, p, r, 1.0) > theory_threshold(t, p, r, 1.0));
    }

    #[test]
    fn estimates_are_sorted_and_inside((obs, _h) in small_obs(), tau in 0.01f64..1.0) {
        let cfg = DetectionConfig { threshold: Threshold::Value { tau }, trim_override: Some(1), ..Default::default() };
        let d = detect(&obs, &cfg).unwrap();
        let e = &d.change_points.estimates;
        prop_assert!(e.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(e.iter().all(|&x| x >= 1 && x < obs.len()));
    }
}
