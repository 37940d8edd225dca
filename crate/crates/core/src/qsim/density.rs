use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gate::{CircuitProgram, GateOp};
use super::noise::NoiseSpec;
use super::state::{check_width, parity_expectation, z_mask, PureState};
use crate::error::{Error, Result};

/// Density matrix of a `num_qubits` register, row-major `2^q × 2^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityState {
    num_qubits: usize,
    matrix: Vec<Complex64>,
}

impl DensityState {
    pub fn zero(num_qubits: usize) -> Result<Self> {
        Ok(Self::from_pure(&PureState::zero(num_qubits)?))
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(state: &PureState) -> Self {
        let a = state.amplitudes();
        let dim = a.len();
        let mut matrix = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                matrix[r * dim + c] = a[r] * a[c].conj();
            }
        }
        DensityState { num_qubits: state.num_qubits(), matrix }
    }

    /// Builds from a raw row-major matrix after checking Hermiticity, unit trace and PSD.
    pub fn from_matrix(num_qubits: usize, matrix: Vec<Complex64>) -> Result<Self> {
        check_width(num_qubits)?;
        let dim = 1usize << num_qubits;
        if matrix.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, got: matrix.len() });
        }
        let rho = DensityState { num_qubits, matrix };
        rho.check_physical(1e-10)?;
        Ok(rho)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.matrix[r * self.dim() + c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// Diagonal of ρ, i.e. computational-basis outcome probabilities (clamped at 0).
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re.max(0.0)).collect()
    }

    pub fn expectation_pauli_z(&self, qubits: &[usize]) -> Result<f64> {
        let mask = z_mask(qubits, self.num_qubits)?;
        Ok(parity_expectation(&self.probabilities(), mask))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let dim = self.dim();
        let m = DMatrix::from_fn(dim, dim, |r, c| self.get(r, c));
        SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
    }

    /// Hermitian within `tol`, trace one within `tol`, eigenvalues ≥ −1e-9.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let dim = self.dim();
        for r in 0..dim {
            for c in 0..dim {
                if (self.get(r, c) - self.get(c, r).conj()).norm() > tol {
                    return Err(Error::Numerical(format!("density matrix not Hermitian at ({r},{c})")));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Numerical(format!("density matrix trace {tr}")));
        }
        if let Some(min) = self.eigenvalues().into_iter().reduce(f64::min) {
            if min < -1e-9 {
                return Err(Error::Numerical(format!("density matrix eigenvalue {min} < 0")));
            }
        }
        Ok(())
    }

    /// `ρ ← U ρ U†` for a single gate.
    fn apply_gate(&mut self, op: &GateOp) {
        let dim = self.dim();
        // U ρ: act on every column
        for c in 0..dim {
            op.apply_strided(&mut self.matrix, c, dim, dim);
        }
        // (U ρ) U†: row r becomes conj(U) applied to that row
        let conj = op.conjugate();
        for r in 0..dim {
            conj.apply_strided(&mut self.matrix, r * dim, 1, dim);
        }
    }

    /// Single-qubit depolarizing channel `(1−p)ρ + (p/3)(XρX + YρY + ZρZ)` on `qubit`.
    ///
    /// Uses the identity `Σ_{P∈{X,Y,Z}} PρP = 2·Tr_q(ρ)⊗I − ρ`.
    pub fn depolarize(&mut self, qubit: usize, p: f64) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::InvalidQubit { index: qubit, num_qubits: self.num_qubits });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("depolarizing probability {p}")));
        }
        if p == 0.0 {
            return Ok(());
        }
        let dim = self.dim();
        let bit = 1usize << qubit;
        let keep = 1.0 - 4.0 * p / 3.0;
        let mix = 2.0 * p / 3.0;
        for r in 0..dim {
            if r & bit != 0 {
                continue;
            }
            for c in 0..dim {
                if c & bit != 0 {
                    continue;
                }
                let (r1, c1) = (r | bit, c | bit);
                let a = self.matrix[r * dim + c];
                let d = self.matrix[r1 * dim + c1];
                let traced = (a + d) * mix;
                self.matrix[r * dim + c] = a * keep + traced;
                self.matrix[r1 * dim + c1] = d * keep + traced;
                self.matrix[r * dim + c1] *= keep;
                self.matrix[r1 * dim + c] *= keep;
            }
        }
        Ok(())
    }

    /// Runs `program`, inserting depolarizing noise after every gate.
    pub fn apply_circuit_noisy(&self, program: &CircuitProgram, noise: &NoiseSpec) -> Result<DensityState> {
        if program.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, got: program.num_qubits });
        }
        program.validate()?;
        noise.validate()?;
        let mut out = self.clone();
        for op in &program.ops {
            out.apply_gate(op);
            let p = if op.kind.arity() == 1 { noise.depol_1q } else { noise.depol_2q };
            for &q in op.qubits() {
                out.depolarize(q, p)?;
            }
        }
        Ok(out)
    }

    /// Reduced state over `keep`.
    ///
    /// Kept qubits are renumbered in ascending order of their original index, so
    /// `keep[0]` (after sorting) becomes qubit 0 of the result.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityState> {
        if keep.is_empty() {
            return Err(Error::Empty("partial-trace keep set"));
        }
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&q) = keep.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::InvalidQubit { index: q, num_qubits: self.num_qubits });
        }
        let traced: Vec<usize> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        let scatter = |bits: usize, qubits: &[usize]| -> usize {
            qubits.iter().enumerate().fold(0, |acc, (k, &q)| acc | (((bits >> k) & 1) << q))
        };
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); kd * kd];
        for r in 0..kd {
            let rb = scatter(r, &keep);
            for c in 0..kd {
                let cb = scatter(c, &keep);
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..td {
                    let tb = scatter(t, &traced);
                    acc += self.matrix[(rb | tb) * dim + (cb | tb)];
                }
                out[r * kd + c] = acc;
            }
        }
        Ok(DensityState { num_qubits: keep.len(), matrix: out })
    }

    pub fn max_abs_diff(&self, other: &DensityState) -> f64 {
        self.matrix.iter().zip(&other.matrix).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::gate::GateOp;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    // explicit Kraus-sum oracle on a single-qubit density matrix
    fn depol_oracle(rho: [[Complex64; 2]; 2], p: f64) -> [[Complex64; 2]; 2] {
        let x = [[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]];
        let y = [[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]];
        let z = [[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]];
        let mul = |a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]| {
            let mut o = [[c(0., 0.); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
                }
            }
            o
        };
        let mut out = [[c(0., 0.); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = rho[i][j] * (1.0 - p);
            }
        }
        for pm in [x, y, z] {
            let t = mul(mul(pm, rho), pm);
            for i in 0..2 {
                for j in 0..2 {
                    out[i][j] += t[i][j] * (p / 3.0);
                }
            }
        }
        out
    }

    #[test]
    fn depolarizing_matches_kraus_oracle() {
        let psi = PureState::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        for p in [0.0, 1e-3, 0.2, 0.75, 1.0] {
            let mut rho = DensityState::from_pure(&psi);
            let m = [[rho.get(0, 0), rho.get(0, 1)], [rho.get(1, 0), rho.get(1, 1)]];
            rho.depolarize(0, p).unwrap();
            let o = depol_oracle(m, p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((rho.get(i, j) - o[i][j]).norm() < 1e-14, "p={p}");
                }
            }
        }
    }

    #[test]
    fn x_gate_with_three_quarter_depolarizing_is_maximally_mixed() {
        let rho = DensityState::zero(1).unwrap();
        let p = CircuitProgram::with_ops(1, vec![GateOp::x(0)]).unwrap();
        let out = rho.apply_circuit_noisy(&p, &NoiseSpec::depolarizing(0.75, 0.0)).unwrap();
        for (i, j, e) in [(0, 0, 0.5), (1, 1, 0.5), (0, 1, 0.0), (1, 0, 0.0)] {
            assert!((out.get(i, j) - c(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn depolarizing_contracts_z_expectation() {
        let theta: f64 = 0.3;
        let p = CircuitProgram::with_ops(1, vec![GateOp::ry(0, theta)]).unwrap();
        let noisy =
            DensityState::zero(1).unwrap().apply_circuit_noisy(&p, &NoiseSpec::depolarizing(1e-3, 0.0)).unwrap();
        let z = noisy.expectation_pauli_z(&[0]).unwrap();
        // closed form: the channel scales the Bloch vector by 1 − 4p/3
        assert!((z - (1.0 - 4.0e-3 / 3.0) * theta.cos()).abs() < 1e-14);
        assert!(z < theta.cos());
    }

    #[test]
    fn partial_trace_cases() {
        let bell = PureState::zero(2)
            .unwrap()
            .apply_circuit(&CircuitProgram::with_ops(2, vec![GateOp::h(0), GateOp::cx(0, 1)]).unwrap())
            .unwrap();
        let r = DensityState::from_pure(&bell).partial_trace(&[0]).unwrap();
        assert!((r.get(0, 0).re - 0.5).abs() < 1e-15 && (r.get(1, 1).re - 0.5).abs() < 1e-15);
        assert!(r.get(0, 1).norm() < 1e-15);

        // |0⟩⊗|1⟩ in |z1 z0⟩ order: qubit 1 is 0, qubit 0 is 1
        let product = DensityState::from_pure(&PureState::basis(2, 0b01).unwrap());
        let q1 = product.partial_trace(&[1]).unwrap();
        assert!((q1.get(0, 0).re - 1.0).abs() < 1e-15);
        let q0 = product.partial_trace(&[0]).unwrap();
        assert!((q0.get(1, 1).re - 1.0).abs() < 1e-15);

        let full = product.partial_trace(&[1, 0]).unwrap();
        assert_eq!(full, product);
        assert!(matches!(product.partial_trace(&[]), Err(Error::Empty(_))));
    }

    proptest! {
        #[test]
        fn noiseless_density_matches_statevector(seed in any::<u64>()) {
            use rand::Rng;
            let mut rng = crate::rng::rng_from_seed(seed);
            let mut prog = CircuitProgram::new(3);
            for _ in 0..20 {
                let a = rng.random_range(0..3);
                let b = (a + 1 + rng.random_range(0..2)) % 3;
                let t: f64 = rng.random_range(-3.0..3.0);
                let op = match rng.random_range(0..6) {
                    0 => GateOp::h(a), 1 => GateOp::ry(a, t), 2 => GateOp::rz(a, t),
                    3 => GateOp::rzz(a, b, t), 4 => GateOp::cx(a, b), _ => GateOp::cz(a, b),
                };
                prog.push(op).unwrap();
            }
            let psi = PureState::zero(3).unwrap();
            let via_rho = DensityState::from_pure(&psi).apply_circuit_noisy(&prog, &NoiseSpec::noiseless()).unwrap();
            let via_psi = DensityState::from_pure(&psi.apply_circuit(&prog).unwrap());
            prop_assert!(via_rho.max_abs_diff(&via_psi) < 1e-10);
        }

        #[test]
        fn depolarized_states_stay_physical(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0, t in -3.0f64..3.0) {
            let prog = CircuitProgram::with_ops(2, vec![GateOp::h(0), GateOp::ry(1, t), GateOp::cx(0, 1), GateOp::rzz(0, 1, t)]).unwrap();
            let out = DensityState::zero(2).unwrap().apply_circuit_noisy(&prog, &NoiseSpec::depolarizing(p1, p2)).unwrap();
            prop_assert!(out.check_physical(1e-10).is_ok());
        }
    }
}
