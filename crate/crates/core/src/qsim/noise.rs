use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate and readout noise parameters.
///
/// Readout flip vectors are per-qubit; an empty vector means no readout error and a
/// single entry is broadcast to every qubit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Depolarizing probability after every single-qubit gate.
    pub depol_1q: f64,
    /// Depolarizing probability applied independently to both targets after every two-qubit gate.
    pub depol_2q: f64,
    /// `P(read 1 | true 0)` per qubit.
    #[serde(default)]
    pub readout_flip_01: Vec<f64>,
    /// `P(read 0 | true 1)` per qubit.
    #[serde(default)]
    pub readout_flip_10: Vec<f64>,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::invalid(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn depolarizing(depol_1q: f64, depol_2q: f64) -> Self {
        NoiseSpec { depol_1q, depol_2q, ..Default::default() }
    }

    pub fn with_readout(mut self, flip_01: f64, flip_10: f64) -> Self {
        self.readout_flip_01 = vec![flip_01];
        self.readout_flip_10 = vec![flip_10];
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_prob("depol_1q", self.depol_1q)?;
        check_prob("depol_2q", self.depol_2q)?;
        for p in self.readout_flip_01.iter().chain(&self.readout_flip_10) {
            check_prob("readout flip", *p)?;
        }
        Ok(())
    }

    /// Checks per-qubit vectors are empty, broadcast, or exactly `num_qubits` long.
    pub fn validate_for(&self, num_qubits: usize) -> Result<()> {
        self.validate()?;
        for v in [&self.readout_flip_01, &self.readout_flip_10] {
            if v.len() > 1 && v.len() != num_qubits {
                return Err(Error::DimensionMismatch { expected: num_qubits, got: v.len() });
            }
        }
        Ok(())
    }

    pub fn has_gate_noise(&self) -> bool {
        self.depol_1q > 0.0 || self.depol_2q > 0.0
    }

    pub fn has_readout_noise(&self) -> bool {
        self.readout_flip_01.iter().chain(&self.readout_flip_10).any(|&p| p > 0.0)
    }

    fn per_qubit(v: &[f64], qubit: usize) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            _ => v[qubit],
        }
    }

    pub fn flip_01(&self, qubit: usize) -> f64 {
        Self::per_qubit(&self.readout_flip_01, qubit)
    }

    pub fn flip_10(&self, qubit: usize) -> f64 {
        Self::per_qubit(&self.readout_flip_10, qubit)
    }
}
