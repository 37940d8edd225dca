//! Data re-uploading variational classifier.
//!
//! Each of the `L` blocks is a linear-entanglement ZZ encoding layer followed by a trainable
//! `RY·RZ` rotation on every qubit and a CZ chain. The logit is `scale·⟨Z^⊗q⟩ + bias`.

mod circuit;
mod train;

pub use circuit::{build_vqc_circuit, Execution, LogitGradient, VqcModel, VqcSpec};
pub use train::{bce_with_logits, train_vqc, VqcEpoch, VqcHistory, VqcSchedule};
