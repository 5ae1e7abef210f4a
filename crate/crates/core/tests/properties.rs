#[path = "support/props.rs"]
mod props;

use aoaloc::detector::{detect, detect_labeled, DetectorConfig};
use aoaloc::linalg::{CMatrix, C64};
use aoaloc::rng::{complex_normal, stream, Purpose};

const CASES: u32 = 64;

#[test]
fn ksvd_update_never_increases_the_restricted_residual() {
    props::ksvd_residual_non_increase(CASES).unwrap();
}

#[test]
fn anchor_recursion_equals_batch() {
    props::anchor_recursion_equals_batch(CASES).unwrap();
}

#[test]
fn beamforming_readout_ignores_column_phase() {
    props::readout_phase_invariance(CASES).unwrap();
}

#[test]
fn phase_smoothing_only_removes_entries() {
    props::phase_smoothing_shrinks_support(CASES).unwrap();
}

#[test]
fn thresholds_are_monotone() {
    props::detector_threshold_monotone(CASES).unwrap();
}

#[test]
fn same_seed_gives_identical_tables() {
    props::seed_determinism(3).unwrap();
}

#[test]
fn detector_is_idempotent_on_its_output() {
    let mut rng = stream(4, Purpose::Noise, 0, 0);
    let mut y = CMatrix::from_fn(6, 3000, |_, _| complex_normal(&mut rng, 1.0));
    for c in 1000..1030 {
        for k in 0..6 {
            y[(k, c)] += C64::new(8.0, 0.0);
        }
    }
    let cfg = DetectorConfig::default();
    let first = detect(&y, &cfg).unwrap();
    let again = detect_labeled(&first.filtered, &first.kept, &cfg, Some(first.noise_var)).unwrap();
    assert_eq!(again.kept, first.kept);
}
