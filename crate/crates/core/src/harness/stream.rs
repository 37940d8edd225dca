use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bundle::{ArtifactBundle, QsvmArtifacts, TrainedModel};
use super::config::Backend;
use super::pipeline::labels_of;
use crate::datapipe::{class_weights, largest_remainder, select_eval_subset};
use crate::error::{Error, Result};
use crate::featuremap::{center_gram, center_test_row, CenteringStats, GramBundle, KernelReference};
use crate::metrics::{ConfusionCounts, MetricsReport, StreamingConfusion};
use crate::qsvm::{decision_scores, solve_dual, tune_threshold, SolverOptions, SvmModel};
use crate::rng::{derive_seed, rng_from_seed, shuffle};
use crate::vqc::Execution;

/// QSVM restricted to a reference set of training points.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    /// Indices into the quantum training subset.
    pub indices: Vec<usize>,
    pub reference: KernelReference,
    pub stats: CenteringStats,
    pub svm: SvmModel,
    /// False when the reference set is the whole training subset and the batch model is reused.
    pub refit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub size: usize,
    pub refit: bool,
    pub threshold: f64,
}

/// Picks at most `limit` reference points: the whole training subset if it fits, else the
/// support vectors, else a class-stratified sample of them. A restricted reference set gets
/// its own centered sub-Gram, SVM and validation-tuned threshold.
pub fn reference_model(art: &QsvmArtifacts, bundle: &ArtifactBundle, limit: usize) -> Result<ReferenceModel> {
    let spec = bundle.manifest.config.feature_map()?;
    let n = art.angles.train.len();
    if n <= limit {
        return Ok(ReferenceModel {
            indices: (0..n).collect(),
            reference: KernelReference::new(&art.angles.train, &spec)?,
            stats: art.stats()?.clone(),
            svm: art.svm.clone(),
            refit: false,
        });
    }
    let y_train = labels_of(&bundle.split.train, &art.angles.train_rows);
    let mut indices = art.svm.support.clone();
    if indices.len() > limit {
        let mut by = [Vec::new(), Vec::new()];
        for &i in &indices {
            by[y_train[i] as usize].push(i);
        }
        let alloc = largest_remainder(&[by[0].len(), by[1].len()], limit);
        let mut rng = rng_from_seed(derive_seed(bundle.manifest.config.seeds.quantum, &[30]));
        indices = Vec::with_capacity(limit);
        for (c, mut idx) in by.into_iter().enumerate() {
            shuffle(&mut idx, &mut rng);
            indices.extend_from_slice(&idx[..alloc[c]]);
        }
        indices.sort_unstable();
    }
    let ref_angles: Vec<_> = indices.iter().map(|&i| art.angles.train[i].clone()).collect();
    let y_ref: Vec<u8> = indices.iter().map(|&i| y_train[i]).collect();
    let reference = KernelReference::new(&ref_angles, &spec)?;
    let val_block = crate::featuremap::cross_block(&art.angles.val, &ref_angles, &spec)?;
    let gram = crate::featuremap::train_gram(&ref_angles, &spec)?;
    let centered = center_gram(GramBundle::from_blocks(Some(spec), gram, Some(val_block), None)?)?;
    let options = SolverOptions::default();
    let mut svm = solve_dual(centered.train_gram.view(), &y_ref, art.svm.c, class_weights(&y_ref)?, options)?;
    let y_val = labels_of(&bundle.split.val, &art.angles.val_rows);
    let val = centered.val_block.as_ref().expect("validation block present");
    svm.align_sign(val.view(), &y_val)?;
    svm.threshold = tune_threshold(&decision_scores(&svm, val.view())?, &y_val, bundle.beta())?.0;
    let stats = centered.stats.clone().expect("centered");
    Ok(ReferenceModel { indices, reference, stats, svm, refit: true })
}

/// The configured category-stratified evaluation subset of the test split.
pub fn default_subset(bundle: &ArtifactBundle) -> Result<Vec<usize>> {
    let c = &bundle.manifest.config;
    let size = c.stream.subset_size.min(bundle.split.test.len());
    select_eval_subset(&bundle.split.test.categories, size, derive_seed(c.seeds.split, &[60]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamOutcome {
    pub backend: Backend,
    /// Test-split row indices in streaming order.
    pub indices: Vec<usize>,
    pub lines: Vec<String>,
    pub counts: ConfusionCounts,
    pub report: MetricsReport,
    pub reference: Option<ReferenceSummary>,
}

/// Scores test rows one at a time, emitting the audit header and one line per sample to `sink`.
///
/// Shot mode samples every kernel entry (or VQC expectation) with the configured shots, noise
/// and mitigation; reference rows are grouped in batches of `stream.batch`.
pub fn evaluate_streaming(
    bundle: &ArtifactBundle,
    indices: &[usize],
    backend: Backend,
    sink: &mut dyn Write,
) -> Result<StreamOutcome> {
    if indices.is_empty() {
        return Err(Error::Empty("streaming subset"));
    }
    let c = &bundle.manifest.config;
    let noise = c.noise.spec();
    let reference = match &bundle.model {
        TrainedModel::Qsvm(art) => Some(reference_model(art, bundle, c.stream.reference_limit)?),
        _ => None,
    };
    let angles = match &bundle.model {
        TrainedModel::Baseline { .. } => None,
        _ => Some(bundle.test_angles(indices)?),
    };
    let margins = match &bundle.model {
        TrainedModel::Baseline { .. } => {
            Some(bundle.encoder.infer(bundle.split.test.select(indices).x.view())?.margins())
        }
        _ => None,
    };
    let threshold = reference.as_ref().map_or(bundle.threshold(), |r| r.svm.threshold);
    let write = |sink: &mut dyn Write, line: &str| writeln!(sink, "{line}").map_err(|e| Error::io("audit stream", e));
    write(sink, StreamingConfusion::HEADER)?;
    let mut stream = StreamingConfusion::default();
    let mut lines = Vec::with_capacity(indices.len());
    let mut scores = Vec::with_capacity(indices.len());
    let mut labels = Vec::with_capacity(indices.len());
    for (k, &idx) in indices.iter().enumerate() {
        let seed = derive_seed(c.seeds.quantum, &[50, idx as u64]);
        let score = match (&bundle.model, &reference) {
            (TrainedModel::Qsvm(_), Some(r)) => {
                let theta = &angles.as_ref().expect("angles")[k];
                let row = match backend {
                    Backend::Exact => r.reference.row(theta)?,
                    Backend::Shots => {
                        r.reference.row_shots_batched(theta, c.stream.batch, c.shots, &noise, c.mitigate, seed)?
                    }
                };
                r.svm.score(&center_test_row(&row, &r.stats)?)?
            }
            (TrainedModel::Vqc { model, .. }, _) => {
                let theta = &angles.as_ref().expect("angles")[k];
                let execution = match backend {
                    Backend::Exact => Execution::Exact,
                    Backend::Shots => {
                        Execution::Shots { shots: c.shots, noise: noise.clone(), mitigate: c.mitigate, seed }
                    }
                };
                model.forward_logit(theta, &execution)?
            }
            (TrainedModel::Baseline { .. }, _) => margins.as_ref().expect("margins")[k],
            (TrainedModel::Qsvm(_), None) => unreachable!("reference built for QSVM"),
        };
        let truth = bundle.split.test.y[idx];
        let pred = u8::from(score >= threshold);
        let line = stream.update(idx, truth, pred)?;
        write(sink, &line)?;
        lines.push(line);
        scores.push(score);
        labels.push(truth);
    }
    let report = MetricsReport::from_scores(&labels, &scores, threshold, bundle.beta())?;
    Ok(StreamOutcome {
        backend,
        indices: indices.to_vec(),
        lines,
        counts: stream.counts(),
        report,
        reference: reference.map(|r| ReferenceSummary {
            size: r.indices.len(),
            refit: r.refit,
            threshold: r.svm.threshold,
        }),
    })
}
