//! Hybrid classical/quantum binary classifiers for intrusion and spam detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`qsim`] — exact statevector and density-matrix simulation of small registers,
//!   shot sampling, depolarizing noise and readout error/mitigation.
//! * [`featuremap`] — angle encoding, the ZZ feature map, fidelity kernels and Gram
//!   construction with double-centering.
//! * [`encoder`] — the MLP front end producing unit-norm embeddings, plus the quantile
//!   scaler that bridges embeddings to rotation angles.
//! * [`qsvm`] — an SMO dual solver over precomputed kernels, C selection and threshold tuning.
//! * [`vqc`] — the data re-uploading variational classifier with parameter-shift gradients.
//! * [`datapipe`] — NSL-KDD and Ling-Spam ingestion with leakage-safe transformers.
//! * [`metrics`] — accuracy, F-scores, AUROC/AUPRC and streaming confusion tallies.
//! * [`harness`] — experiment configuration, pipelines, artifact bundles and the CLI plumbing.

pub mod datapipe;
pub mod encoder;
pub mod error;
pub mod featuremap;
pub mod harness;
pub mod metrics;
pub mod persist;
pub mod qsim;
pub mod qsvm;
pub mod rng;
pub mod vqc;

pub use error::{Error, Result};
