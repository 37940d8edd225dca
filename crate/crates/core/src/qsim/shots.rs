use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::noise::NoiseSpec;
use super::state::{index_to_bitstring, PureState};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Measurement counts of a `num_qubits` register, indexed by basis index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotResult {
    num_qubits: usize,
    counts: Vec<u64>,
    shots: u64,
}

impl ShotResult {
    pub fn from_counts(num_qubits: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != 1 << num_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << num_qubits, got: counts.len() });
        }
        let shots = counts.iter().sum();
        Ok(ShotResult { num_qubits, counts, shots })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(index).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Non-zero counts keyed by bitstring (qubit 0 rightmost).
    pub fn bitstring_counts(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (index_to_bitstring(i, self.num_qubits), c))
            .collect()
    }

    /// Empirical frequencies `ĉ(b) / max(S, 1)`.
    pub fn frequencies(&self) -> Vec<f64> {
        let s = self.shots.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / s).collect()
    }

    /// Shot-averaged parity `(−1)^{popcount(z & mask)}`.
    pub fn parity_mean(&self, mask: usize) -> f64 {
        let s = self.shots.max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .map(|(z, &c)| if (z & mask).count_ones() % 2 == 0 { c as f64 } else { -(c as f64) })
            .sum::<f64>()
            / s
    }
}

/// Draws `shots` outcomes from an outcome distribution (need not be exactly normalized).
pub fn sample_distribution(probs: &[f64], shots: u64, seed: u64) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::invalid("shots must be ≥ 1"));
    }
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    if acc <= 0.0 {
        return Err(Error::Numerical("outcome distribution has zero mass".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..shots {
        let u = rng.random::<f64>() * acc;
        // first index whose cumulative mass exceeds u; zero-probability outcomes are never chosen
        let mut k = cdf.partition_point(|&c| c <= u);
        if k >= probs.len() {
            k = cdf.iter().rposition(|&c| c > 0.0).unwrap_or(0);
        }
        while probs[k] <= 0.0 {
            k += 1;
        }
        counts[k] += 1;
    }
    Ok(counts)
}

/// Born-rule sampling of a pure state.
pub fn sample_shots(state: &PureState, shots: u64, seed: u64) -> Result<ShotResult> {
    let counts = sample_distribution(&state.probabilities(), shots, seed)?;
    ShotResult::from_counts(state.num_qubits(), counts)
}

/// Shots needed so a ±1-valued mean is within `epsilon` with probability ≥ `1 − delta`
/// (Hoeffding): `⌈ln(2/δ) / (2ε²)⌉`.
pub fn required_shots(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon {epsilon} not in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta {delta} not in (0, 1)")));
    }
    let s = (2.0 / delta).ln() / (2.0 * epsilon * epsilon);
    Ok((s.ceil() as u64).max(1))
}

/// Flips every measured bit independently with its asymmetric readout probability.
pub fn apply_readout_error(result: &ShotResult, noise: &NoiseSpec, seed: u64) -> Result<ShotResult> {
    let q = result.num_qubits;
    noise.validate_for(q)?;
    if !noise.has_readout_noise() {
        return Ok(result.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; result.counts.len()];
    for (z, &c) in result.counts.iter().enumerate() {
        for _ in 0..c {
            let mut out = z;
            for qubit in 0..q {
                let bit = 1usize << qubit;
                let p = if z & bit == 0 { noise.flip_01(qubit) } else { noise.flip_10(qubit) };
                if p > 0.0 && rng.random::<f64>() < p {
                    out ^= bit;
                }
            }
            counts[out] += 1;
        }
    }
    ShotResult::from_counts(q, counts)
}

/// Per-qubit 2×2 confusion matrix `A[measured][true]`.
fn confusion(noise: &NoiseSpec, qubit: usize) -> [[f64; 2]; 2] {
    let (p01, p10) = (noise.flip_01(qubit), noise.flip_10(qubit));
    [[1.0 - p01, p10], [p01, 1.0 - p10]]
}

fn apply_per_qubit(dist: &mut [f64], qubit: usize, m: [[f64; 2]; 2]) {
    let bit = 1usize << qubit;
    for i in 0..dist.len() {
        if i & bit != 0 {
            continue;
        }
        let (a, b) = (dist[i], dist[i | bit]);
        dist[i] = m[0][0] * a + m[0][1] * b;
        dist[i | bit] = m[1][0] * a + m[1][1] * b;
    }
}

/// Expected measured distribution when `true_dist` passes through the readout channel.
pub fn corrupt_distribution(true_dist: &[f64], noise: &NoiseSpec) -> Result<Vec<f64>> {
    let q = true_dist.len().trailing_zeros() as usize;
    if true_dist.len() != 1 << q {
        return Err(Error::invalid("distribution length is not a power of two"));
    }
    noise.validate_for(q)?;
    let mut out = true_dist.to_vec();
    for qubit in 0..q {
        apply_per_qubit(&mut out, qubit, confusion(noise, qubit));
    }
    Ok(out)
}

/// Applies the tensor-product inverse confusion matrix without clamping.
pub fn invert_readout(measured: &[f64], noise: &NoiseSpec) -> Result<Vec<f64>> {
    let q = measured.len().trailing_zeros() as usize;
    if measured.len() != 1 << q {
        return Err(Error::invalid("distribution length is not a power of two"));
    }
    noise.validate_for(q)?;
    let mut out = measured.to_vec();
    for qubit in 0..q {
        let [[a, b], [c, d]] = confusion(noise, qubit);
        let det = a * d - b * c;
        if det.abs() < 1e-12 {
            return Err(Error::SingularConfusion(qubit));
        }
        apply_per_qubit(&mut out, qubit, [[d / det, -b / det], [-c / det, a / det]]);
    }
    Ok(out)
}

/// Readout-mitigated quasi-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiDistribution {
    pub num_qubits: usize,
    pub probs: Vec<f64>,
}

impl QuasiDistribution {
    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn by_bitstring(&self) -> BTreeMap<String, f64> {
        self.probs.iter().enumerate().map(|(i, &p)| (index_to_bitstring(i, self.num_qubits), p)).collect()
    }

    pub fn parity_mean(&self, mask: usize) -> f64 {
        self.probs.iter().enumerate().map(|(z, &p)| if (z & mask).count_ones() % 2 == 0 { p } else { -p }).sum()
    }
}

/// Inverts the known readout model on empirical frequencies, clamps to `[0, 1]`
/// and renormalizes to unit mass.
pub fn mitigate_readout(result: &ShotResult, noise: &NoiseSpec) -> Result<QuasiDistribution> {
    let mut probs = invert_readout(&result.frequencies(), noise)?;
    for p in probs.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        for p in probs.iter_mut() {
            *p /= total;
        }
    }
    Ok(QuasiDistribution { num_qubits: result.num_qubits, probs })
}
