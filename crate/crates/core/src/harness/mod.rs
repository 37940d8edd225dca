//! Experiment configuration, the staged pipeline with hash-keyed checkpoints, artifact
//! bundles, the experiment matrix, streaming evaluation and report output.

mod bundle;
mod config;
mod matrix;
mod pipeline;
mod report;
mod store;
mod stream;

pub use bundle::{ArtifactBundle, Evaluation, QsvmArtifacts, ShotEvaluation, TrainedModel};
pub use config::{
    Backend, DataConfig, DatasetKind, EncoderSection, ExperimentConfig, ModelKind, NoiseSection, QsvmSection,
    ScheduleSection, Seeds, StreamSection,
};
pub use matrix::{render_table, run_matrix, write_matrix, MatrixResult, MatrixRow};
pub use pipeline::{
    config_key, conventions, run_dir, run_pipeline, Manifest, RunOutcome, StopAfter, SubsetAngles, Subsets, Threshold,
    NSLKDD_TEST, NSLKDD_TRAIN,
};
pub use report::{
    circuit_summaries, noise_sweep, render_report, run_report, shot_sweep, sweep_csv, write_report, RunReport,
    SweepPoint,
};
pub use store::{Stage, StageRecord, Store, FORMAT_VERSION};
pub use stream::{
    default_subset, evaluate_streaming, reference_model, ReferenceModel, ReferenceSummary, StreamOutcome,
};
