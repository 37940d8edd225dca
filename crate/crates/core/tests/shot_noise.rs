mod common;

use common::{analytic_mitigation_worst, finite_shot_mitigation, shot_realism};
use hybridq::qsim::NoiseSpec;

#[test]
fn shot_estimates_stay_within_band_under_default_noise() {
    let noise = NoiseSpec::depolarizing(1e-3, 1e-2);
    let r = shot_realism(4, 2, 1000, 1024, &noise, 71);
    assert!(r.fraction() >= 0.99, "{r:?}");
    assert!(r.mean_bias > 0.0);
}

#[test]
fn noiseless_shot_estimates_stay_within_band() {
    let r = shot_realism(2, 1, 500, 1024, &NoiseSpec::noiseless(), 72);
    assert!(r.mean_bias < 1e-12);
    assert!(r.fraction() >= 0.99, "{r:?}");
}

#[test]
fn analytic_mitigation_recovers_exact_distributions() {
    let noise = NoiseSpec::depolarizing(0.0, 0.0).with_readout(0.03, 0.06);
    assert!(analytic_mitigation_worst(4, 2, 100, &noise, 73) <= 1e-12);
    let mut skewed = NoiseSpec::noiseless();
    skewed.readout_flip_01 = vec![0.01, 0.02, 0.04];
    skewed.readout_flip_10 = vec![0.05, 0.03, 0.08];
    assert!(analytic_mitigation_worst(3, 1, 100, &skewed, 74) <= 1e-12);
}

#[test]
fn mitigation_reduces_finite_shot_error() {
    let noise = NoiseSpec::depolarizing(0.0, 0.0).with_readout(0.03, 0.06);
    let (raw, mitigated) = finite_shot_mitigation(4, 2, 200, 1024, &noise);
    assert!(mitigated < raw, "raw {raw} mitigated {mitigated}");
}
