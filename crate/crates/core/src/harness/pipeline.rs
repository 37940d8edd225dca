use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::bundle::{ArtifactBundle, Evaluation};
use super::config::{DatasetKind, ExperimentConfig, ModelKind};
use super::store::{Stage, StageRecord, Store, FORMAT_VERSION};
use crate::datapipe::lingspam::corpus_files;
use crate::datapipe::{class_weights, load_lingspam, load_nslkdd, stratified_holdout, DatasetSplit, Part};
use crate::encoder::{train_encoder, EmbeddingScaler, EncoderModel};
use crate::error::{Error, Result};
use crate::featuremap::{build_gram, center_gram, AngleVector};
use crate::persist;
use crate::qsvm::{decision_scores, select_c, solve_dual, tune_threshold, SolverOptions};
use crate::rng::derive_seed;
use crate::vqc::{train_vqc, Execution};

pub const NSLKDD_TRAIN: &str = "KDDTrain+.txt";
pub const NSLKDD_TEST: &str = "KDDTest+.txt";

/// Last stage a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StopAfter {
    Preprocess,
    Encoder,
    Kernel,
    Model,
    Evaluate,
}

/// Everything a run records; written without timestamps so identical runs hash identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub crate_version: String,
    pub config: ExperimentConfig,
    pub config_key: String,
    pub conventions: BTreeMap<String, String>,
    pub source_digest: String,
    pub stages: Vec<StageRecord>,
    pub evaluation: Option<Evaluation>,
    pub complete: bool,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
}

impl Manifest {
    pub fn stage(&self, name: &str) -> Result<&StageRecord> {
        self.stages
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Integrity(format!("manifest has no `{name}` stage")))
    }

    /// Hashes of every fitted artifact, keyed `stage/file`. Data files that carry test rows
    /// (the persisted split) are excluded.
    pub fn fitted_hashes(&self) -> BTreeMap<String, String> {
        self.stages
            .iter()
            .flat_map(|s| {
                s.files
                    .iter()
                    .filter(move |(f, _)| !(s.name == "preprocess" && SPLIT_FILES.contains(&f.as_str())))
                    .map(move |(f, h)| (format!("{}/{f}", s.name), h.clone()))
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(self)?;
        persist::write_bytes(&dir.join("manifest.json"), &bytes)?;
        persist::write_bytes(&dir.join("manifest.sha256"), persist::sha256_hex(&bytes).as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let bytes = persist::read_bytes(&dir.join("manifest.json"))?;
        let expected = persist::read_bytes(&dir.join("manifest.sha256"))?;
        if persist::sha256_hex(&bytes).as_bytes() != expected.as_slice() {
            return Err(Error::Integrity("manifest hash mismatch".into()));
        }
        Ok(serde_json::from_slice(&bytes)?)
    }
}

const SPLIT_FILES: [&str; 4] = ["split.json", "train.f32", "val.f32", "test.f32"];

pub fn conventions() -> BTreeMap<String, String> {
    [
        ("qubit_order", "qubit 0 = least significant bit"),
        ("rotation", "exp(-i theta P / 2)"),
        ("rng", "chacha8 / splitmix64 seed derivation"),
        ("encoder_init", crate::encoder::EncoderModel::INIT_TAG),
        ("gelu", crate::encoder::EncoderModel::GELU_TAG),
        ("tfidf", crate::datapipe::tfidf::IDF_VARIANT),
        ("stopwords", crate::datapipe::tfidf::STOPWORDS_VERSION),
        ("angles", "angle_range * clip(quantile_scale(e), -1, 1)[..q]"),
        ("dynamical_decoupling", "no-op in simulation"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Row indices of train/val/test that the quantum arms and evaluation use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsets {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn cap(labels: &[u8], limit: Option<usize>, seed: u64) -> Result<Vec<usize>> {
    match limit {
        Some(l) if l < labels.len() => Ok(stratified_holdout(labels, l as f64 / labels.len() as f64, seed)?.1),
        _ => Ok((0..labels.len()).collect()),
    }
}

impl Subsets {
    pub fn for_config(config: &ExperimentConfig, split: &DatasetSplit) -> Result<Self> {
        let quantum = config.model != ModelKind::ClassicalBaseline;
        let d = &config.data;
        let s = config.seeds.split;
        Ok(Subsets {
            train: cap(&split.train.y, d.train_limit.filter(|_| quantum), derive_seed(s, &[20]))?,
            val: cap(&split.val.y, d.val_limit.filter(|_| quantum), derive_seed(s, &[21]))?,
            test: cap(&split.test.y, d.test_limit, derive_seed(s, &[22]))?,
        })
    }
}

pub fn labels_of(part: &Part, rows: &[usize]) -> Vec<u8> {
    rows.iter().map(|&i| part.y[i]).collect()
}

/// Encoder embeddings of the selected rows, scaled and mapped to `q` angles.
pub fn angles_for(
    part: &Part,
    rows: &[usize],
    encoder: &EncoderModel,
    scaler: &EmbeddingScaler,
    q: usize,
    range: f64,
) -> Result<Vec<AngleVector>> {
    let x = part.select(rows).x;
    let emb = encoder.infer(x.view())?.embeddings;
    emb.rows().into_iter().map(|r| scaler.angles_in_range(&r.to_vec(), q, range)).collect()
}

pub fn run_dir(store: &Store, config: &ExperimentConfig) -> Result<PathBuf> {
    Ok(store.root().join("runs").join(format!("{}-{}", config.id, config_key(config)?)))
}

pub fn config_key(config: &ExperimentConfig) -> Result<String> {
    Ok(persist::sha256_json(&(FORMAT_VERSION, config))?[..16].to_string())
}

fn source_digest(config: &ExperimentConfig) -> Result<String> {
    let root = &config.data.root;
    let files: Vec<PathBuf> = match config.dataset {
        DatasetKind::Nslkdd => vec![root.join(NSLKDD_TRAIN), root.join(NSLKDD_TEST)],
        DatasetKind::Lingspam => corpus_files(root, &config.data.lingspam_variant)?,
    };
    let mut hashes = Vec::with_capacity(files.len());
    for f in &files {
        hashes.push(persist::sha256_file(f)?);
    }
    persist::sha256_json(&hashes)
}

fn json_file<T: Serialize>(stage: &Stage, name: &str, value: &T) -> Result<()> {
    persist::write_json(&stage.path(name), value)
}

fn preprocess(config: &ExperimentConfig, store: &Store, digest: &str) -> Result<(StageRecord, DatasetSplit)> {
    let d = &config.data;
    let inputs = match config.dataset {
        DatasetKind::Nslkdd => serde_json::json!({
            "dataset": config.dataset, "val_fraction": d.val_fraction, "seed": config.seeds.split, "sources": digest,
        }),
        DatasetKind::Lingspam => serde_json::json!({
            "dataset": config.dataset, "val_fraction": d.val_fraction, "test_fraction": d.test_fraction,
            "variant": d.lingspam_variant, "ngram_max": d.ngram_max, "seed": config.seeds.split, "sources": digest,
        }),
    };
    let stage = store.stage("preprocess", &inputs)?;
    if let Some(rec) = stage.cached(store) {
        return Ok((rec, DatasetSplit::load(&stage.dir)?));
    }
    stage.begin()?;
    let split = match config.dataset {
        DatasetKind::Nslkdd => {
            let data =
                load_nslkdd(&d.root.join(NSLKDD_TRAIN), &d.root.join(NSLKDD_TEST), d.val_fraction, config.seeds.split)?;
            json_file(&stage, "transformer.json", &data.transformer)?;
            data.split
        }
        DatasetKind::Lingspam => {
            let data = load_lingspam(
                &d.root,
                &d.lingspam_variant,
                d.test_fraction,
                d.val_fraction,
                config.seeds.split,
                d.ngram_max,
            )?;
            json_file(&stage, "transformer.json", &data.vectorizer)?;
            data.split
        }
    };
    split.save(&stage.dir)?;
    info!(
        "preprocess: {} train / {} val / {} test, {} features",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        split.num_features()
    );
    let mut files = SPLIT_FILES.to_vec();
    files.push("transformer.json");
    Ok((stage.finish(&files)?, split))
}

fn encoder_stage(
    config: &ExperimentConfig,
    store: &Store,
    pre: &StageRecord,
    split: &DatasetSplit,
) -> Result<(StageRecord, EncoderModel, EmbeddingScaler)> {
    let enc_config = config.encoder_config(split.num_features())?;
    let schedule = config.train_schedule(split.class_weights);
    let stage = store.stage("encoder", &(&pre.key, &enc_config, &schedule))?;
    if let Some(rec) = stage.cached(store) {
        let model = EncoderModel::load(&stage.path("encoder"))?;
        let scaler = persist::read_json(&stage.path("scaler.json"))?;
        return Ok((rec, model, scaler));
    }
    stage.begin()?;
    let (model, history) =
        train_encoder(enc_config, &schedule, split.train.x.view(), &split.train.y, split.val.x.view(), &split.val.y)?;
    info!("encoder: best epoch {} metric {:.4}", history.best_epoch, history.best_metric);
    let emb = model.infer(split.train.x.view())?.embeddings;
    let scaler = EmbeddingScaler::fit(emb.view())?;
    model.save(&stage.path("encoder"))?;
    json_file(&stage, "scaler.json", &scaler)?;
    json_file(&stage, "history.json", &history)?;
    Ok((stage.finish(&["encoder.json", "encoder.f64", "scaler.json", "history.json"])?, model, scaler))
}

/// Train/validation angles of the quantum subsets, persisted with the Gram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetAngles {
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
    pub train: Vec<AngleVector>,
    pub val: Vec<AngleVector>,
}

fn subset_angles(
    config: &ExperimentConfig,
    split: &DatasetSplit,
    subsets: &Subsets,
    encoder: &EncoderModel,
    scaler: &EmbeddingScaler,
) -> Result<SubsetAngles> {
    Ok(SubsetAngles {
        train: angles_for(&split.train, &subsets.train, encoder, scaler, config.qubits, config.angle_range)?,
        val: angles_for(&split.val, &subsets.val, encoder, scaler, config.qubits, config.angle_range)?,
        train_rows: subsets.train.clone(),
        val_rows: subsets.val.clone(),
    })
}

fn kernel_stage(
    config: &ExperimentConfig,
    store: &Store,
    enc: &StageRecord,
    angles: &SubsetAngles,
) -> Result<StageRecord> {
    let spec = config.feature_map()?;
    let stage = store.stage("kernel", &(&enc.key, &spec, persist::sha256_json(angles)?))?;
    if let Some(rec) = stage.cached(store) {
        return Ok(rec);
    }
    stage.begin()?;
    let bundle = center_gram(build_gram(&angles.train, Some(&angles.val), None, &spec)?)?;
    info!("kernel: {}x{} train Gram, psd {:?}", bundle.n_train(), bundle.n_train(), bundle.psd);
    bundle.save(&stage.dir)?;
    json_file(&stage, "angles.json", angles)?;
    stage.finish(&["gram.json", "train.f64", "val.f64", "angles.json"])
}

fn qsvm_stage(
    config: &ExperimentConfig,
    store: &Store,
    kernel: &StageRecord,
    split: &DatasetSplit,
) -> Result<StageRecord> {
    let plan = config.cv_plan();
    let options = SolverOptions::default();
    let stage = store.stage("qsvm", &(&kernel.key, &plan, &options))?;
    if let Some(rec) = stage.cached(store) {
        return Ok(rec);
    }
    stage.begin()?;
    let dir = store.resolve(kernel);
    let gram = crate::featuremap::GramBundle::load(&dir)?;
    let angles: SubsetAngles = persist::read_json(&dir.join("angles.json"))?;
    let y = labels_of(&split.train, &angles.train_rows);
    let y_val = labels_of(&split.val, &angles.val_rows);
    let cv = select_c(gram.train_gram.view(), &y, &plan, options)?;
    let mut model = solve_dual(gram.train_gram.view(), &y, cv.best_c, class_weights(&y)?, options)?;
    let val_block = gram.val_block.as_ref().ok_or(Error::Empty("validation Gram block"))?;
    model.align_sign(val_block.view(), &y_val)?;
    let scores = decision_scores(&model, val_block.view())?;
    let (threshold, fbeta) = tune_threshold(&scores, &y_val, plan.beta)?;
    model.threshold = threshold;
    info!("qsvm: C = {}, {} support vectors, val F_beta {fbeta:.4}", cv.best_c, model.support.len());
    json_file(&stage, "svm.json", &model)?;
    json_file(&stage, "cv.json", &cv)?;
    stage.finish(&["svm.json", "cv.json"])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub threshold: f64,
    pub val_f_beta: f64,
    pub beta: f64,
}

fn vqc_stage(
    config: &ExperimentConfig,
    store: &Store,
    enc: &StageRecord,
    split: &DatasetSplit,
    angles: &SubsetAngles,
) -> Result<StageRecord> {
    let spec = config.vqc_spec()?;
    let y = labels_of(&split.train, &angles.train_rows);
    let y_val = labels_of(&split.val, &angles.val_rows);
    let schedule = config.vqc_train_schedule(class_weights(&y)?);
    let stage = store.stage("vqc", &(&enc.key, &spec, &schedule, persist::sha256_json(angles)?, config.qsvm.beta))?;
    if let Some(rec) = stage.cached(store) {
        return Ok(rec);
    }
    stage.begin()?;
    let (model, history) = train_vqc(spec, &schedule, &angles.train, &y, &angles.val, &y_val)?;
    let logits: Vec<f64> =
        angles.val.iter().map(|a| model.forward_logit(a, &Execution::Exact)).collect::<Result<_>>()?;
    let (threshold, val_f_beta) = tune_threshold(&logits, &y_val, config.qsvm.beta)?;
    info!("vqc: best epoch {} val loss {:.4}", history.best_epoch, history.best_val_loss);
    model.save(&stage.path("vqc"), serde_json::json!({ "threshold": threshold }))?;
    json_file(&stage, "history.json", &history)?;
    json_file(&stage, "threshold.json", &Threshold { threshold, val_f_beta, beta: config.qsvm.beta })?;
    stage.finish(&["vqc.json", "vqc.f64", "history.json", "threshold.json"])
}

fn baseline_stage(
    config: &ExperimentConfig,
    store: &Store,
    enc: &StageRecord,
    split: &DatasetSplit,
    encoder: &EncoderModel,
) -> Result<StageRecord> {
    let stage = store.stage("baseline", &(&enc.key, config.qsvm.beta))?;
    if let Some(rec) = stage.cached(store) {
        return Ok(rec);
    }
    stage.begin()?;
    let margins = encoder.infer(split.val.x.view())?.margins();
    let (threshold, val_f_beta) = tune_threshold(&margins, &split.val.y, config.qsvm.beta)?;
    json_file(&stage, "threshold.json", &Threshold { threshold, val_f_beta, beta: config.qsvm.beta })?;
    stage.finish(&["threshold.json"])
}

/// Result of a (possibly partial) run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs the configured arm through `stop`, reusing every cached stage.
///
/// A failing stage aborts the run; the manifest is still written, flagged incomplete
/// with the stage name.
pub fn run_pipeline(config: &ExperimentConfig, store: &Store, stop: StopAfter) -> Result<RunOutcome> {
    config.validate()?;
    let dir = run_dir(store, config)?;
    if stop == StopAfter::Evaluate {
        if let Ok(m) = Manifest::load(&dir) {
            if m.complete && m.stages.iter().all(|s| store.verify(s).is_ok()) {
                info!("{}: complete run found, skipping", config.id);
                return Ok(RunOutcome { run_dir: dir, manifest: m });
            }
        }
    }
    let mut manifest = Manifest {
        format: FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        config_key: config_key(config)?,
        conventions: conventions(),
        source_digest: String::new(),
        stages: Vec::new(),
        evaluation: None,
        complete: false,
        failed_stage: None,
        error: None,
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let result = execute(config, store, stop, &mut manifest);
    if let Err(e) = &result {
        if let Error::Stage { stage, .. } = e {
            manifest.failed_stage = Some(stage.to_string());
        }
        manifest.error = Some(e.to_string());
    }
    manifest.save(&dir)?;
    result.map(|()| RunOutcome { run_dir: dir, manifest })
}

fn execute(config: &ExperimentConfig, store: &Store, stop: StopAfter, manifest: &mut Manifest) -> Result<()> {
    manifest.source_digest = source_digest(config).map_err(|e| e.in_stage("preprocess"))?;
    let (pre, split) = preprocess(config, store, &manifest.source_digest).map_err(|e| e.in_stage("preprocess"))?;
    manifest.stages.push(pre.clone());
    if stop == StopAfter::Preprocess {
        return Ok(());
    }
    let (enc, encoder, scaler) = encoder_stage(config, store, &pre, &split).map_err(|e| e.in_stage("encoder"))?;
    manifest.stages.push(enc.clone());
    if stop == StopAfter::Encoder {
        return Ok(());
    }
    let subsets = Subsets::for_config(config, &split)?;
    match config.model {
        ModelKind::Qsvm => {
            let angles =
                subset_angles(config, &split, &subsets, &encoder, &scaler).map_err(|e| e.in_stage("kernel"))?;
            let kernel = kernel_stage(config, store, &enc, &angles).map_err(|e| e.in_stage("kernel"))?;
            manifest.stages.push(kernel.clone());
            if stop == StopAfter::Kernel {
                return Ok(());
            }
            let svm = qsvm_stage(config, store, &kernel, &split).map_err(|e| e.in_stage("qsvm"))?;
            manifest.stages.push(svm);
        }
        ModelKind::Vqc => {
            if stop == StopAfter::Kernel {
                return Err(Error::Config("the VQC arm has no kernel stage".into()));
            }
            let angles = subset_angles(config, &split, &subsets, &encoder, &scaler).map_err(|e| e.in_stage("vqc"))?;
            manifest.stages.push(vqc_stage(config, store, &enc, &split, &angles).map_err(|e| e.in_stage("vqc"))?);
        }
        ModelKind::ClassicalBaseline => {
            if stop == StopAfter::Kernel {
                return Err(Error::Config("the classical baseline has no kernel stage".into()));
            }
            manifest
                .stages
                .push(baseline_stage(config, store, &enc, &split, &encoder).map_err(|e| e.in_stage("baseline"))?);
        }
    }
    if stop == StopAfter::Model {
        return Ok(());
    }
    // evaluation always goes through the persisted artifacts
    let bundle = ArtifactBundle::from_parts(manifest.clone(), store).map_err(|e| e.in_stage("evaluate"))?;
    manifest.evaluation = Some(bundle.evaluate().map_err(|e| e.in_stage("evaluate"))?);
    manifest.complete = true;
    Ok(())
}
