//! Exact simulation of small qubit registers.
//!
//! Pure states evolve as statevectors; noisy evolution uses full density matrices with a
//! depolarizing channel inserted after every gate. Measurement sampling, readout error
//! injection and tensor-product readout mitigation live in [`shots`].

pub mod density;
pub mod gate;
pub mod noise;
pub mod shots;
pub mod state;

pub use density::DensityState;
pub use gate::{CircuitProgram, CircuitSummary, GateKind, GateOp};
pub use noise::NoiseSpec;
pub use shots::{
    apply_readout_error, corrupt_distribution, invert_readout, mitigate_readout, required_shots, sample_distribution,
    sample_shots, QuasiDistribution, ShotResult,
};
pub use state::{bitstring_to_index, index_to_bitstring, PureState, MAX_QUBITS};
