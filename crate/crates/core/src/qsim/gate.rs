//! Gate set and circuit programs.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    H,
    X,
    Z,
    Ry,
    Rz,
    Rzz,
    Cx,
    Cz,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Z | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Rzz | GateKind::Cx | GateKind::Cz => 2,
        }
    }

    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::Ry | GateKind::Rz | GateKind::Rzz)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::Rzz => "rzz",
            GateKind::Cx => "cx",
            GateKind::Cz => "cz",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gate application. `angle` is meaningful only for the rotation kinds.
///
/// For `Cx` the first target is the control. Rotations follow the usual
/// `exp(-i θ P / 2)` convention, so `Rzz(θ) = exp(-i θ Z⊗Z / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: [usize; 2],
    pub angle: f64,
}

impl GateOp {
    fn one(kind: GateKind, q: usize, angle: f64) -> Self {
        GateOp { kind, targets: [q, q], angle }
    }

    fn two(kind: GateKind, a: usize, b: usize, angle: f64) -> Self {
        GateOp { kind, targets: [a, b], angle }
    }

    pub fn h(q: usize) -> Self {
        Self::one(GateKind::H, q, 0.0)
    }
    pub fn x(q: usize) -> Self {
        Self::one(GateKind::X, q, 0.0)
    }
    pub fn z(q: usize) -> Self {
        Self::one(GateKind::Z, q, 0.0)
    }
    pub fn ry(q: usize, angle: f64) -> Self {
        Self::one(GateKind::Ry, q, angle)
    }
    pub fn rz(q: usize, angle: f64) -> Self {
        Self::one(GateKind::Rz, q, angle)
    }
    pub fn rzz(a: usize, b: usize, angle: f64) -> Self {
        Self::two(GateKind::Rzz, a, b, angle)
    }
    pub fn cx(control: usize, target: usize) -> Self {
        Self::two(GateKind::Cx, control, target, 0.0)
    }
    pub fn cz(a: usize, b: usize) -> Self {
        Self::two(GateKind::Cz, a, b, 0.0)
    }

    pub fn qubits(&self) -> &[usize] {
        &self.targets[..self.kind.arity()]
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        for &q in self.qubits() {
            if q >= num_qubits {
                return Err(Error::InvalidQubit { index: q, num_qubits });
            }
        }
        if self.kind.arity() == 2 && self.targets[0] == self.targets[1] {
            return Err(Error::invalid(format!("{} targets must be distinct, got {:?}", self.kind, self.targets)));
        }
        if !self.angle.is_finite() {
            return Err(Error::invalid(format!("{} angle is not finite", self.kind)));
        }
        Ok(())
    }

    /// The inverse gate.
    pub fn inverse(&self) -> Self {
        let mut op = *self;
        if op.kind.is_parametric() {
            op.angle = -op.angle;
        }
        op
    }

    /// Entrywise complex conjugate of the gate matrix (used for `ρ U†`).
    pub fn conjugate(&self) -> Self {
        let mut op = *self;
        if matches!(op.kind, GateKind::Rz | GateKind::Rzz) {
            op.angle = -op.angle;
        }
        op
    }

    /// Dense matrix in the local basis. For two-qubit gates the local index is
    /// `b0 + 2·b1`, where `b0` is the bit of `targets[0]`.
    pub fn matrix(&self) -> Vec<Complex64> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let half = self.angle / 2.0;
        match self.kind {
            GateKind::H => {
                vec![c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)]
            }
            GateKind::X => vec![z, o, o, z],
            GateKind::Z => vec![o, z, z, -o],
            GateKind::Ry => vec![c(half.cos(), 0.0), c(-half.sin(), 0.0), c(half.sin(), 0.0), c(half.cos(), 0.0)],
            GateKind::Rz => vec![Complex64::from_polar(1.0, -half), z, z, Complex64::from_polar(1.0, half)],
            GateKind::Rzz => {
                let even = Complex64::from_polar(1.0, -half);
                let odd = Complex64::from_polar(1.0, half);
                let mut m = vec![z; 16];
                for (k, phase) in [(0, even), (1, odd), (2, odd), (3, even)] {
                    m[k * 4 + k] = phase;
                }
                m
            }
            GateKind::Cx => {
                // control is local bit 0: |01> <-> |11> in (b1 b0) order means indices 1 and 3
                let mut m = vec![z; 16];
                m[0] = o;
                m[2 * 4 + 2] = o;
                m[4 + 3] = o;
                m[3 * 4 + 1] = o;
                m
            }
            GateKind::Cz => {
                let mut m = vec![z; 16];
                m[0] = o;
                m[5] = o;
                m[10] = o;
                m[15] = -o;
                m
            }
        }
    }

    /// Applies the gate to a strided view of a length-`2^n` vector.
    ///
    /// Element `k` of the logical vector lives at `data[offset + k * stride]`.
    pub(crate) fn apply_strided(&self, data: &mut [Complex64], offset: usize, stride: usize, dim: usize) {
        let idx = |k: usize| offset + k * stride;
        match self.kind {
            GateKind::H | GateKind::X | GateKind::Z | GateKind::Ry | GateKind::Rz => {
                let bit = 1usize << self.targets[0];
                let m = self.matrix();
                for i in 0..dim {
                    if i & bit != 0 {
                        continue;
                    }
                    let (a, b) = (data[idx(i)], data[idx(i | bit)]);
                    data[idx(i)] = m[0] * a + m[1] * b;
                    data[idx(i | bit)] = m[2] * a + m[3] * b;
                }
            }
            GateKind::Rzz => {
                let (ba, bb) = (1usize << self.targets[0], 1usize << self.targets[1]);
                let even = Complex64::from_polar(1.0, -self.angle / 2.0);
                let odd = even.conj();
                for i in 0..dim {
                    let parity = ((i & ba) != 0) ^ ((i & bb) != 0);
                    data[idx(i)] *= if parity { odd } else { even };
                }
            }
            GateKind::Cz => {
                let mask = (1usize << self.targets[0]) | (1usize << self.targets[1]);
                for i in 0..dim {
                    if i & mask == mask {
                        data[idx(i)] = -data[idx(i)];
                    }
                }
            }
            GateKind::Cx => {
                let (bc, bt) = (1usize << self.targets[0], 1usize << self.targets[1]);
                for i in 0..dim {
                    if i & bc != 0 && i & bt == 0 {
                        data.swap(idx(i), idx(i | bt));
                    }
                }
            }
        }
    }
}

/// An ordered gate list over a fixed register width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitProgram {
    pub num_qubits: usize,
    pub ops: Vec<GateOp>,
}

/// Structural summary used in reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSummary {
    pub num_qubits: usize,
    pub depth: usize,
    pub two_qubit_gates: usize,
    pub op_counts: BTreeMap<String, usize>,
}

impl fmt::Display for CircuitSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "qubits={} depth={} 2q={} ops:", self.num_qubits, self.depth, self.two_qubit_gates)?;
        for (k, v) in &self.op_counts {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

impl CircuitProgram {
    pub fn new(num_qubits: usize) -> Self {
        CircuitProgram { num_qubits, ops: Vec::new() }
    }

    pub fn with_ops(num_qubits: usize, ops: Vec<GateOp>) -> Result<Self> {
        let program = CircuitProgram { num_qubits, ops };
        program.validate()?;
        Ok(program)
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        op.validate(self.num_qubits)?;
        self.ops.push(op);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.ops.iter().try_for_each(|op| op.validate(self.num_qubits))
    }

    /// Appends every op of `other` (same width).
    pub fn extend(&mut self, other: &CircuitProgram) -> Result<()> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, got: other.num_qubits });
        }
        self.ops.extend_from_slice(&other.ops);
        Ok(())
    }

    /// `U†`: reversed order with each gate inverted.
    pub fn inverse(&self) -> Self {
        CircuitProgram { num_qubits: self.num_qubits, ops: self.ops.iter().rev().map(GateOp::inverse).collect() }
    }

    /// ASAP depth of the unoptimized gate list.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.num_qubits];
        for op in &self.ops {
            let next = op.qubits().iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in op.qubits() {
                level[q] = next;
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.ops.iter().filter(|op| op.kind == kind).count()
    }

    pub fn summary(&self) -> CircuitSummary {
        let mut op_counts = BTreeMap::new();
        for op in &self.ops {
            *op_counts.entry(op.kind.name().to_string()).or_insert(0) += 1;
        }
        CircuitSummary {
            num_qubits: self.num_qubits,
            depth: self.depth(),
            two_qubit_gates: self.ops.iter().filter(|op| op.kind.arity() == 2).count(),
            op_counts,
        }
    }
}
