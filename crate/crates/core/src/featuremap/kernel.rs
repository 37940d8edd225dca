use super::{build_feature_map, AngleVector, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::qsim::{
    apply_readout_error, mitigate_readout, sample_distribution, CircuitProgram, DensityState, NoiseSpec, PureState,
    ShotResult,
};
use crate::rng::derive_seed;

/// `|φ(θ)⟩ = U_ZZ(θ)|0…0⟩`.
pub fn prepare_state(theta: &AngleVector, spec: &FeatureMapSpec) -> Result<PureState> {
    PureState::zero(spec.num_qubits)?.apply_circuit(&build_feature_map(theta, spec)?)
}

/// `k(a, b) = |⟨φ(a)|φ(b)⟩|²`.
pub fn fidelity_kernel(theta_a: &AngleVector, theta_b: &AngleVector, spec: &FeatureMapSpec) -> Result<f64> {
    prepare_state(theta_a, spec)?.fidelity(&prepare_state(theta_b, spec)?)
}

/// `U(b)† U(a)`: the all-zeros probability of its output equals `k(a, b)`.
pub fn compute_uncompute(
    theta_a: &AngleVector,
    theta_b: &AngleVector,
    spec: &FeatureMapSpec,
) -> Result<CircuitProgram> {
    let mut program = build_feature_map(theta_a, spec)?;
    program.extend(&build_feature_map(theta_b, spec)?.inverse())?;
    Ok(program)
}

/// Shot estimate of `k(a, b)` as the empirical frequency of `0^q` after compute-uncompute.
///
/// Gate noise switches to density-matrix evolution. Readout flips are sampled per shot and,
/// with `mitigate`, inverted before reading off `p(0^q)`.
pub fn fidelity_kernel_shots(
    theta_a: &AngleVector,
    theta_b: &AngleVector,
    spec: &FeatureMapSpec,
    shots: u64,
    noise: &NoiseSpec,
    mitigate: bool,
    seed: u64,
) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("shot count must be at least 1"));
    }
    noise.validate_for(spec.num_qubits)?;
    let program = compute_uncompute(theta_a, theta_b, spec)?;
    let probs = if noise.has_gate_noise() {
        DensityState::zero(spec.num_qubits)?.apply_circuit_noisy(&program, noise)?.probabilities()
    } else {
        PureState::zero(spec.num_qubits)?.apply_circuit(&program)?.probabilities()
    };
    let counts = sample_distribution(&probs, shots, derive_seed(seed, &[0]))?;
    let mut result = ShotResult::from_counts(spec.num_qubits, counts)?;
    if noise.has_readout_noise() {
        result = apply_readout_error(&result, noise, derive_seed(seed, &[1]))?;
    }
    let p0 = if mitigate && noise.has_readout_noise() {
        mitigate_readout(&result, noise)?.get(0)
    } else {
        result.frequencies()[0]
    };
    Ok(p0.clamp(0.0, 1.0))
}
