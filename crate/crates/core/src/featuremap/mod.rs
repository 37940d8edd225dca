//! Angle encoding, the ZZ feature map, fidelity kernels and Gram-matrix handling.

mod gram;
mod kernel;

pub use gram::{
    build_gram, center_gram, center_test_row, cross_block, linear_gram, psd_project, train_gram, CenteringStats,
    GramBundle, KernelReference, PsdReport, PSD_CLAMP_THRESHOLD,
};
pub use kernel::{compute_uncompute, fidelity_kernel, fidelity_kernel_shots, prepare_state};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{CircuitProgram, GateOp};

/// Which qubit pairs receive a ZZ coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entanglement {
    /// Every pair `i < j`.
    Full,
    /// Nearest neighbours `(i, i+1)`.
    Linear,
}

impl Entanglement {
    pub fn pairs(self, num_qubits: usize) -> Vec<(usize, usize)> {
        match self {
            Entanglement::Full => (0..num_qubits).flat_map(|i| (i + 1..num_qubits).map(move |j| (i, j))).collect(),
            Entanglement::Linear => (0..num_qubits.saturating_sub(1)).map(|i| (i, i + 1)).collect(),
        }
    }
}

/// Convention for the second-order phase `φ_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairPhase {
    /// `φ_ij = (π − θ_i)(π − θ_j)`
    PiMinusProduct,
    /// `φ_ij = θ_i θ_j`
    Product,
}

impl PairPhase {
    pub fn phase(self, a: f64, b: f64) -> f64 {
        match self {
            PairPhase::PiMinusProduct => (PI - a) * (PI - b),
            PairPhase::Product => a * b,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            PairPhase::PiMinusProduct => "pi_minus_product",
            PairPhase::Product => "product",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub num_qubits: usize,
    pub reps: usize,
    pub entanglement: Entanglement,
    pub pair_phase: PairPhase,
}

impl FeatureMapSpec {
    pub const MIN_QUBITS: usize = 2;
    pub const MAX_QUBITS: usize = 6;

    pub fn new(num_qubits: usize, reps: usize) -> Result<Self> {
        let spec = FeatureMapSpec {
            num_qubits,
            reps,
            entanglement: Entanglement::Full,
            pair_phase: PairPhase::PiMinusProduct,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_pair_phase(mut self, pair_phase: PairPhase) -> Self {
        self.pair_phase = pair_phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(Self::MIN_QUBITS..=Self::MAX_QUBITS).contains(&self.num_qubits) {
            return Err(Error::invalid(format!(
                "feature map needs {}..={} qubits, got {}",
                Self::MIN_QUBITS,
                Self::MAX_QUBITS,
                self.num_qubits
            )));
        }
        if self.reps == 0 {
            return Err(Error::invalid("feature map needs at least one repetition"));
        }
        Ok(())
    }
}

/// Rotation angles `θ ∈ [−π, π]^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleVector(Vec<f64>);

impl AngleVector {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if let Some(bad) = angles.iter().find(|a| !(a.abs() <= PI + 1e-12)) {
            return Err(Error::invalid(format!("angle {bad} outside [-pi, pi]")));
        }
        Ok(AngleVector(angles))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for AngleVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        AngleVector::new(v)
    }
}

impl From<AngleVector> for Vec<f64> {
    fn from(a: AngleVector) -> Self {
        a.0
    }
}

/// First `q` coordinates of a unit-norm embedding, clipped to `[−1, 1]` and scaled by π.
pub fn encode_angles(embedding: &[f64], q: usize) -> Result<AngleVector> {
    if q > embedding.len() {
        return Err(Error::DimensionMismatch { expected: q, got: embedding.len() });
    }
    let norm = embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("embedding norm {norm} is not 1")));
    }
    Ok(AngleVector(embedding[..q].iter().map(|&u| PI * u.clamp(-1.0, 1.0)).collect()))
}

/// `reps × [H on all; RZ(2θ_i); RZZ(2φ_ij) on each entangled pair]`.
pub fn build_feature_map(theta: &AngleVector, spec: &FeatureMapSpec) -> Result<CircuitProgram> {
    spec.validate()?;
    if theta.len() != spec.num_qubits {
        return Err(Error::DimensionMismatch { expected: spec.num_qubits, got: theta.len() });
    }
    let q = spec.num_qubits;
    let t = theta.as_slice();
    let pairs = spec.entanglement.pairs(q);
    let mut ops = Vec::with_capacity(spec.reps * (2 * q + pairs.len()));
    for _ in 0..spec.reps {
        ops.extend((0..q).map(GateOp::h));
        ops.extend((0..q).map(|i| GateOp::rz(i, 2.0 * t[i])));
        ops.extend(pairs.iter().map(|&(i, j)| GateOp::rzz(i, j, 2.0 * spec.pair_phase.phase(t[i], t[j]))));
    }
    CircuitProgram::with_ops(q, ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::GateKind;

    #[test]
    fn unit_coordinate_encodes_to_pi() {
        let a = encode_angles(&[1.0, 0.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(a.as_slice(), &[PI, 0.0]);
    }

    #[test]
    fn overshoot_is_clipped_before_scaling() {
        let a = encode_angles(&[1.0000003, 0.0], 1).unwrap();
        assert_eq!(a.as_slice(), &[PI]);
        assert!(encode_angles(&[1.0, 0.0], 3).is_err());
        assert!(encode_angles(&[0.5, 0.0], 1).is_err());
    }

    #[test]
    fn gate_sequences() {
        let spec = FeatureMapSpec::new(2, 1).unwrap();
        let c = build_feature_map(&AngleVector::new(vec![0.1, 0.2]).unwrap(), &spec).unwrap();
        let kinds: Vec<GateKind> = c.ops.iter().map(|o| o.kind).collect();
        use GateKind::*;
        assert_eq!(kinds, vec![H, H, Rz, Rz, Rzz]);

        let theta = AngleVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let one = build_feature_map(&theta, &FeatureMapSpec::new(4, 1).unwrap()).unwrap();
        let two = build_feature_map(&theta, &FeatureMapSpec::new(4, 2).unwrap()).unwrap();
        assert_eq!(one.count(Rzz), 6);
        for k in [H, Rz, Rzz] {
            assert_eq!(two.count(k), 2 * one.count(k));
        }
    }

    #[test]
    fn spec_bounds() {
        assert!(FeatureMapSpec::new(1, 1).is_err());
        assert!(FeatureMapSpec::new(7, 1).is_err());
        assert!(FeatureMapSpec::new(4, 0).is_err());
        let spec = FeatureMapSpec::new(3, 1).unwrap();
        assert!(build_feature_map(&AngleVector::new(vec![0.0; 2]).unwrap(), &spec).is_err());
        assert!(AngleVector::new(vec![4.0]).is_err());
    }

    #[test]
    fn linear_pairs() {
        assert_eq!(Entanglement::Linear.pairs(4), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(Entanglement::Full.pairs(3), vec![(0, 1), (0, 2), (1, 2)]);
    }
}
