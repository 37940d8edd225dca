use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{AngleVector, Entanglement, PairPhase};
use crate::persist;
use crate::qsim::{
    apply_readout_error, corrupt_distribution, invert_readout, mitigate_readout, sample_distribution, CircuitProgram,
    DensityState, GateOp, NoiseSpec, PureState, ShotResult,
};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqcSpec {
    pub num_qubits: usize,
    pub layers: usize,
    pub pair_phase: PairPhase,
}

impl VqcSpec {
    pub const MAX_QUBITS: usize = 6;
    pub const MAX_LAYERS: usize = 4;
    pub const ENTANGLEMENT: Entanglement = Entanglement::Linear;

    pub fn new(num_qubits: usize, layers: usize) -> Result<Self> {
        let spec = VqcSpec { num_qubits, layers, pair_phase: PairPhase::PiMinusProduct };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=Self::MAX_QUBITS).contains(&self.num_qubits) {
            return Err(Error::invalid(format!("VQC needs 2..={} qubits, got {}", Self::MAX_QUBITS, self.num_qubits)));
        }
        if !(1..=Self::MAX_LAYERS).contains(&self.layers) {
            return Err(Error::invalid(format!("VQC needs 1..={} layers, got {}", Self::MAX_LAYERS, self.layers)));
        }
        Ok(())
    }

    /// `L·2·n_q`; CZ entanglers carry no parameters.
    pub fn num_params(&self) -> usize {
        self.layers * 2 * self.num_qubits
    }
}

/// How expectations are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Execution {
    Exact,
    Shots {
        shots: u64,
        noise: NoiseSpec,
        mitigate: bool,
        seed: u64,
    },
    /// Infinite-shot limit of `Shots`: the measured distribution in expectation.
    Analytic {
        noise: NoiseSpec,
        mitigate: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcModel {
    pub spec: VqcSpec,
    /// Per layer: `n_q` RY angles then `n_q` RZ angles.
    pub theta: Vec<f64>,
    pub scale: f64,
    pub bias: f64,
}

/// Derivatives of the logit at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitGradient {
    pub logit: f64,
    pub expectation: f64,
    pub theta: Vec<f64>,
    pub scale: f64,
    pub bias: f64,
    /// With respect to the input angles `α`.
    pub angles: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Role {
    Fixed,
    Theta(usize),
    /// `gate angle = 2α_i`
    Single(usize),
    /// `gate angle = 2φ(α_i, α_j)`
    Pair(usize, usize),
}

fn build(angles: &[f64], model: &VqcModel) -> Result<(CircuitProgram, Vec<Role>)> {
    let n = model.spec.num_qubits;
    if angles.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: angles.len() });
    }
    if model.theta.len() != model.spec.num_params() {
        return Err(Error::DimensionMismatch { expected: model.spec.num_params(), got: model.theta.len() });
    }
    let pairs = VqcSpec::ENTANGLEMENT.pairs(n);
    let mut ops = Vec::new();
    let mut roles = Vec::new();
    for layer in 0..model.spec.layers {
        for i in 0..n {
            ops.push(GateOp::h(i));
            roles.push(Role::Fixed);
        }
        for i in 0..n {
            ops.push(GateOp::rz(i, 2.0 * angles[i]));
            roles.push(Role::Single(i));
        }
        for &(i, j) in &pairs {
            ops.push(GateOp::rzz(i, j, 2.0 * model.spec.pair_phase.phase(angles[i], angles[j])));
            roles.push(Role::Pair(i, j));
        }
        let base = layer * 2 * n;
        for i in 0..n {
            ops.push(GateOp::ry(i, model.theta[base + i]));
            roles.push(Role::Theta(base + i));
        }
        for i in 0..n {
            ops.push(GateOp::rz(i, model.theta[base + n + i]));
            roles.push(Role::Theta(base + n + i));
        }
        for &(i, j) in &pairs {
            ops.push(GateOp::cz(i, j));
            roles.push(Role::Fixed);
        }
    }
    Ok((CircuitProgram::with_ops(n, ops)?, roles))
}

/// `L × [H; RZ(2α_i); RZZ(2φ_{i,i+1}); RY(θ); RZ(θ′); CZ chain]`.
pub fn build_vqc_circuit(angles: &AngleVector, model: &VqcModel) -> Result<CircuitProgram> {
    Ok(build(angles.as_slice(), model)?.0)
}

fn parity_mask(n: usize) -> usize {
    (1 << n) - 1
}

fn exact_expectation(program: &CircuitProgram) -> Result<f64> {
    let state = PureState::zero(program.num_qubits)?.apply_circuit(program)?;
    Ok(state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(z, a)| if z.count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum())
}

fn noisy_probabilities(program: &CircuitProgram, noise: &NoiseSpec) -> Result<Vec<f64>> {
    let q = program.num_qubits;
    noise.validate_for(q)?;
    Ok(if noise.has_gate_noise() {
        DensityState::zero(q)?.apply_circuit_noisy(program, noise)?.probabilities()
    } else {
        PureState::zero(q)?.apply_circuit(program)?.probabilities()
    })
}

fn parity(probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(z, p)| if z.count_ones() % 2 == 0 { *p } else { -*p }).sum()
}

fn analytic_expectation(program: &CircuitProgram, noise: &NoiseSpec, mitigate: bool) -> Result<f64> {
    let mut probs = noisy_probabilities(program, noise)?;
    if noise.has_readout_noise() {
        probs = corrupt_distribution(&probs, noise)?;
        if mitigate {
            probs = invert_readout(&probs, noise)?;
        }
    }
    Ok(parity(&probs))
}

fn shot_expectation(program: &CircuitProgram, shots: u64, noise: &NoiseSpec, mitigate: bool, seed: u64) -> Result<f64> {
    if shots == 0 {
        return Err(Error::invalid("shot count must be at least 1"));
    }
    let q = program.num_qubits;
    let probs = noisy_probabilities(program, noise)?;
    let mut result = ShotResult::from_counts(q, sample_distribution(&probs, shots, derive_seed(seed, &[0]))?)?;
    if noise.has_readout_noise() {
        result = apply_readout_error(&result, noise, derive_seed(seed, &[1]))?;
        if mitigate {
            return Ok(mitigate_readout(&result, noise)?.parity_mean(parity_mask(q)));
        }
    }
    Ok(result.parity_mean(parity_mask(q)))
}

impl VqcModel {
    /// `θ ~ U(−0.1, 0.1)`, scale 1, bias 0.
    pub fn init(spec: VqcSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_from_seed(derive_seed(seed, &[0]));
        let theta = (0..spec.num_params()).map(|_| rng.random_range(-0.1..0.1)).collect();
        Ok(VqcModel { spec, theta, scale: 1.0, bias: 0.0 })
    }

    /// Raw `⟨Z^⊗q⟩ ∈ [−1, 1]`.
    pub fn expectation(&self, angles: &AngleVector, execution: &Execution) -> Result<f64> {
        let program = build_vqc_circuit(angles, self)?;
        match execution {
            Execution::Exact => exact_expectation(&program),
            Execution::Shots { shots, noise, mitigate, seed } => {
                shot_expectation(&program, *shots, noise, *mitigate, *seed)
            }
            Execution::Analytic { noise, mitigate } => analytic_expectation(&program, noise, *mitigate),
        }
    }

    pub fn forward_logit(&self, angles: &AngleVector, execution: &Execution) -> Result<f64> {
        Ok(self.scale * self.expectation(angles, execution)? + self.bias)
    }

    /// Exact logit gradient by the parameter-shift rule applied to each gate occurrence.
    pub fn logit_gradient(&self, angles: &AngleVector) -> Result<LogitGradient> {
        let (program, roles) = build(angles.as_slice(), self)?;
        let a = angles.as_slice();
        let expectation = exact_expectation(&program)?;
        let mut theta = vec![0.0; self.theta.len()];
        let mut d_angles = vec![0.0; a.len()];
        let mut shifted = program.clone();
        for (k, role) in roles.iter().enumerate() {
            if matches!(role, Role::Fixed) {
                continue;
            }
            let original = program.ops[k].angle;
            shifted.ops[k].angle = original + FRAC_PI_2;
            let plus = exact_expectation(&shifted)?;
            shifted.ops[k].angle = original - FRAC_PI_2;
            let minus = exact_expectation(&shifted)?;
            shifted.ops[k].angle = original;
            let d_gate = 0.5 * (plus - minus) * self.scale;
            match *role {
                Role::Theta(p) => theta[p] += d_gate,
                Role::Single(i) => d_angles[i] += 2.0 * d_gate,
                Role::Pair(i, j) => {
                    let (di, dj) = match self.spec.pair_phase {
                        PairPhase::PiMinusProduct => (-(PI - a[j]), -(PI - a[i])),
                        PairPhase::Product => (a[j], a[i]),
                    };
                    d_angles[i] += 2.0 * di * d_gate;
                    d_angles[j] += 2.0 * dj * d_gate;
                }
                Role::Fixed => unreachable!(),
            }
        }
        Ok(LogitGradient {
            logit: self.scale * expectation + self.bias,
            expectation,
            theta,
            scale: expectation,
            bias: 1.0,
            angles: d_angles,
        })
    }

    pub fn save(&self, path: &Path, metadata: serde_json::Value) -> Result<()> {
        let mut flat = self.theta.clone();
        flat.push(self.scale);
        flat.push(self.bias);
        let bytes = persist::f64_to_le_bytes(&flat);
        let header = serde_json::json!({
            "spec": self.spec,
            "entanglement": VqcSpec::ENTANGLEMENT,
            "num_params": self.spec.num_params(),
            "circuit": format!("{}", self.summary()),
            "sha256": persist::sha256_hex(&bytes),
            "metadata": metadata,
        });
        persist::write_json(&path.with_extension("json"), &header)?;
        persist::write_bytes(&path.with_extension("f64"), &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let header: serde_json::Value = persist::read_json(&path.with_extension("json"))?;
        let spec: VqcSpec = serde_json::from_value(header["spec"].clone())?;
        spec.validate()?;
        let bytes = persist::read_bytes(&path.with_extension("f64"))?;
        if header["sha256"].as_str() != Some(persist::sha256_hex(&bytes).as_str()) {
            return Err(Error::Integrity("VQC parameter hash mismatch".into()));
        }
        let mut flat = persist::f64_from_le_bytes(&bytes)?;
        if flat.len() != spec.num_params() + 2 {
            return Err(Error::Integrity("VQC parameter count mismatch".into()));
        }
        let bias = flat.pop().expect("length checked");
        let scale = flat.pop().expect("length checked");
        Ok(VqcModel { spec, theta: flat, scale, bias })
    }

    /// Depth and gate counts of the circuit at zero input angles.
    pub fn summary(&self) -> crate::qsim::CircuitSummary {
        build(&vec![0.0; self.spec.num_qubits], self).expect("valid model").0.summary()
    }
}
