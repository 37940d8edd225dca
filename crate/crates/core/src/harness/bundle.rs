use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Backend, ModelKind};
use super::pipeline::{angles_for, labels_of, Manifest, SubsetAngles, Subsets, Threshold};
use super::store::Store;
use crate::datapipe::DatasetSplit;
use crate::encoder::{EmbeddingScaler, EncoderModel};
use crate::error::{Error, Result};
use crate::featuremap::{center_test_row, AngleVector, CenteringStats, GramBundle, KernelReference};
use crate::metrics::MetricsReport;
use crate::persist;
use crate::qsvm::{decision_scores, CvResult, SvmModel};
use crate::rng::derive_seed;
use crate::vqc::{Execution, VqcModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotEvaluation {
    pub shots: u64,
    pub raw: MetricsReport,
    /// Present when the noise model has readout error.
    pub mitigated: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub val: MetricsReport,
    pub test: MetricsReport,
    pub test_rows: usize,
    pub shots: Option<ShotEvaluation>,
}

#[derive(Debug, Clone)]
pub struct QsvmArtifacts {
    pub gram: GramBundle,
    pub angles: SubsetAngles,
    pub svm: SvmModel,
    pub cv: CvResult,
}

impl QsvmArtifacts {
    pub fn stats(&self) -> Result<&CenteringStats> {
        self.gram.stats.as_ref().ok_or_else(|| Error::Integrity("stored Gram is not centered".into()))
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Qsvm(Box<QsvmArtifacts>),
    Vqc { model: VqcModel, threshold: Threshold },
    Baseline { threshold: Threshold },
}

/// A run's persisted artifacts, loaded and hash-verified.
#[derive(Debug, Clone)]
pub struct ArtifactBundle {
    pub manifest: Manifest,
    pub split: DatasetSplit,
    pub encoder: EncoderModel,
    pub scaler: EmbeddingScaler,
    pub subsets: Subsets,
    pub model: TrainedModel,
}

impl ArtifactBundle {
    /// Loads a finished run directory, verifying the manifest and every stage file.
    pub fn open(run_dir: &Path, store: &Store) -> Result<Self> {
        let manifest = Manifest::load(run_dir)?;
        Self::from_parts(manifest, store)
    }

    pub fn from_parts(manifest: Manifest, store: &Store) -> Result<Self> {
        for s in &manifest.stages {
            store.verify(s)?;
        }
        let pre = store.resolve(manifest.stage("preprocess")?);
        let enc = store.resolve(manifest.stage("encoder")?);
        let split = DatasetSplit::load(&pre)?;
        let encoder = EncoderModel::load(&enc.join("encoder"))?;
        let scaler: EmbeddingScaler = persist::read_json(&enc.join("scaler.json"))?;
        let subsets = Subsets::for_config(&manifest.config, &split)?;
        let model = match manifest.config.model {
            ModelKind::Qsvm => {
                let k = store.resolve(manifest.stage("kernel")?);
                let q = store.resolve(manifest.stage("qsvm")?);
                TrainedModel::Qsvm(Box::new(QsvmArtifacts {
                    gram: GramBundle::load(&k)?,
                    angles: persist::read_json(&k.join("angles.json"))?,
                    svm: persist::read_json(&q.join("svm.json"))?,
                    cv: persist::read_json(&q.join("cv.json"))?,
                }))
            }
            ModelKind::Vqc => {
                let v = store.resolve(manifest.stage("vqc")?);
                TrainedModel::Vqc {
                    model: VqcModel::load(&v.join("vqc"))?,
                    threshold: persist::read_json(&v.join("threshold.json"))?,
                }
            }
            ModelKind::ClassicalBaseline => {
                let b = store.resolve(manifest.stage("baseline")?);
                TrainedModel::Baseline { threshold: persist::read_json(&b.join("threshold.json"))? }
            }
        };
        Ok(ArtifactBundle { manifest, split, encoder, scaler, subsets, model })
    }

    pub fn threshold(&self) -> f64 {
        match &self.model {
            TrainedModel::Qsvm(a) => a.svm.threshold,
            TrainedModel::Vqc { threshold, .. } | TrainedModel::Baseline { threshold } => threshold.threshold,
        }
    }

    pub fn beta(&self) -> f64 {
        self.manifest.config.qsvm.beta
    }

    /// Angles for test rows (indices into the test split).
    pub fn test_angles(&self, rows: &[usize]) -> Result<Vec<AngleVector>> {
        let c = &self.manifest.config;
        angles_for(&self.split.test, rows, &self.encoder, &self.scaler, c.qubits, c.angle_range)
    }

    /// Angles for already-preprocessed feature rows.
    pub fn feature_angles(&self, x: ArrayView2<f32>) -> Result<Vec<AngleVector>> {
        let c = &self.manifest.config;
        let emb = self.encoder.infer(x)?.embeddings;
        emb.rows().into_iter().map(|r| self.scaler.angles_in_range(&r.to_vec(), c.qubits, c.angle_range)).collect()
    }

    /// Exact-mode decision scores for preprocessed feature rows, compared against
    /// [`threshold`](Self::threshold) for labels.
    pub fn score_features(&self, x: ArrayView2<f32>) -> Result<Vec<f64>> {
        if x.ncols() != self.split.test.x.ncols() {
            return Err(Error::DimensionMismatch { expected: self.split.test.x.ncols(), got: x.ncols() });
        }
        match &self.model {
            TrainedModel::Qsvm(a) => {
                let reference = KernelReference::new(&a.angles.train, &self.manifest.config.feature_map()?)?;
                let stats = a.stats()?;
                self.feature_angles(x)?
                    .par_iter()
                    .map(|theta| a.svm.score(&center_test_row(&reference.row(theta)?, stats)?))
                    .collect()
            }
            TrainedModel::Vqc { model, .. } => {
                self.feature_angles(x)?.par_iter().map(|a| model.forward_logit(a, &Execution::Exact)).collect()
            }
            TrainedModel::Baseline { .. } => Ok(self.encoder.infer(x)?.margins()),
        }
    }

    /// Exact-mode decision scores for test rows. Never re-tunes the stored threshold.
    pub fn test_scores(&self, rows: &[usize]) -> Result<Vec<f64>> {
        self.score_features(self.split.test.select(rows).x.view())
    }

    fn val_report(&self) -> Result<MetricsReport> {
        let (labels, scores) = match &self.model {
            TrainedModel::Qsvm(a) => {
                let block = a.gram.val_block.as_ref().ok_or(Error::Empty("validation Gram block"))?;
                (labels_of(&self.split.val, &a.angles.val_rows), decision_scores(&a.svm, block.view())?)
            }
            TrainedModel::Vqc { model, .. } => {
                let rows = &self.subsets.val;
                let angles = angles_for(
                    &self.split.val,
                    rows,
                    &self.encoder,
                    &self.scaler,
                    model.spec.num_qubits,
                    self.manifest.config.angle_range,
                )?;
                let logits =
                    angles.par_iter().map(|a| model.forward_logit(a, &Execution::Exact)).collect::<Result<_>>()?;
                (labels_of(&self.split.val, rows), logits)
            }
            TrainedModel::Baseline { .. } => {
                (self.split.val.y.clone(), self.encoder.infer(self.split.val.x.view())?.margins())
            }
        };
        MetricsReport::from_scores(&labels, &scores, self.threshold(), self.beta())
    }

    fn vqc_shot_report(&self, model: &VqcModel, mitigate: bool) -> Result<MetricsReport> {
        let c = &self.manifest.config;
        let rows = &self.subsets.test;
        let noise = c.noise.spec();
        let logits: Vec<f64> = self
            .test_angles(rows)?
            .par_iter()
            .zip(rows.par_iter())
            .map(|(a, &i)| {
                let seed = derive_seed(c.seeds.quantum, &[40, i as u64]);
                model.forward_logit(a, &Execution::Shots { shots: c.shots, noise: noise.clone(), mitigate, seed })
            })
            .collect::<Result<_>>()?;
        MetricsReport::from_scores(&labels_of(&self.split.test, rows), &logits, self.threshold(), self.beta())
    }

    /// Validation and test metrics with the stored threshold; VQC runs in shot mode also
    /// report raw and mitigated shot-based test metrics.
    pub fn evaluate(&self) -> Result<Evaluation> {
        let rows = &self.subsets.test;
        let scores = self.test_scores(rows)?;
        let test =
            MetricsReport::from_scores(&labels_of(&self.split.test, rows), &scores, self.threshold(), self.beta())?;
        let c = &self.manifest.config;
        let shots = match (&self.model, c.backend) {
            (TrainedModel::Vqc { model, .. }, Backend::Shots) => Some(ShotEvaluation {
                shots: c.shots,
                raw: self.vqc_shot_report(model, false)?,
                mitigated: if c.mitigate && c.noise.spec().has_readout_noise() {
                    Some(self.vqc_shot_report(model, true)?)
                } else {
                    None
                },
            }),
            _ => None,
        };
        Ok(Evaluation { val: self.val_report()?, test, test_rows: rows.len(), shots })
    }
}
