use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::CircuitProgram;
use crate::error::{Error, Result};

/// Registers wider than this are rejected.
pub const MAX_QUBITS: usize = 8;

/// Statevector of a `num_qubits` register.
///
/// Basis index `z` has qubit 0 as its least-significant bit, so the bitstring
/// `z_{q-1} … z_1 z_0` reads with qubit 0 rightmost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

pub(crate) fn check_width(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::invalid(format!("register width {num_qubits} outside 1..={MAX_QUBITS}")));
    }
    Ok(())
}

impl PureState {
    /// `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        check_width(num_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(PureState { num_qubits, amplitudes })
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(num_qubits)?;
        if index >= s.amplitudes.len() {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        s.amplitudes[0] = Complex64::new(0.0, 0.0);
        s.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Builds a state from raw amplitudes; the vector must be unit-norm within 1e-10.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("amplitude vector length {len} is not a power of two ≥ 2")));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_width(num_qubits)?;
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Numerical(format!("state norm² {norm} differs from 1")));
        }
        Ok(PureState { num_qubits, amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Runs `program` on a copy of this state.
    pub fn apply_circuit(&self, program: &CircuitProgram) -> Result<PureState> {
        let mut out = self.clone();
        out.apply_in_place(program)?;
        Ok(out)
    }

    pub fn apply_in_place(&mut self, program: &CircuitProgram) -> Result<()> {
        if program.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, got: program.num_qubits });
        }
        program.validate()?;
        let dim = self.dim();
        for op in &program.ops {
            op.apply_strided(&mut self.amplitudes, 0, 1, dim);
        }
        Ok(())
    }

    /// Born-rule outcome distribution.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.num_qubits != other.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, got: other.num_qubits });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Squared overlap `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: f64) -> PureState {
        let p = Complex64::from_polar(1.0, phi);
        PureState { num_qubits: self.num_qubits, amplitudes: self.amplitudes.iter().map(|a| a * p).collect() }
    }

    /// `⟨⊗_{j∈qubits} Z_j⟩ = Σ_z (−1)^{parity(z restricted to qubits)} |α_z|²`.
    pub fn expectation_pauli_z(&self, qubits: &[usize]) -> Result<f64> {
        let mask = z_mask(qubits, self.num_qubits)?;
        Ok(parity_expectation(&self.probabilities(), mask))
    }

    /// Separability test for two qubits via the determinant `α₀₀α₁₁ − α₀₁α₁₀`.
    ///
    /// Returns `(separable, |det|)`.
    pub fn is_separable_two_qubit(&self) -> Result<(bool, f64)> {
        if self.num_qubits != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.num_qubits });
        }
        let a = &self.amplitudes;
        // index = z1·2 + z0, so α_{z1 z0}: α00=a[0], α01=a[1], α10=a[2], α11=a[3]
        let det = (a[0] * a[3] - a[1] * a[2]).norm();
        Ok((det <= 1e-10, det))
    }
}

/// Bitmask for a non-empty set of valid, distinct qubits.
pub(crate) fn z_mask(qubits: &[usize], num_qubits: usize) -> Result<usize> {
    if qubits.is_empty() {
        return Err(Error::Empty("Pauli-Z qubit set"));
    }
    let mut mask = 0usize;
    for &q in qubits {
        if q >= num_qubits {
            return Err(Error::InvalidQubit { index: q, num_qubits });
        }
        mask |= 1 << q;
    }
    Ok(mask)
}

pub(crate) fn parity_expectation(probs: &[f64], mask: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(z, p)| if (z & mask).count_ones() % 2 == 0 { *p } else { -*p })
        .sum::<f64>()
        .clamp(-1.0, 1.0)
}

/// Renders a basis index as a bitstring with qubit 0 rightmost.
pub fn index_to_bitstring(index: usize, num_qubits: usize) -> String {
    (0..num_qubits).rev().map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn bitstring_to_index(bits: &str) -> Result<usize> {
    let mut index = 0usize;
    for c in bits.chars() {
        index <<= 1;
        match c {
            '0' => {}
            '1' => index |= 1,
            _ => return Err(Error::invalid(format!("invalid bitstring {bits:?}"))),
        }
    }
    Ok(index)
}
