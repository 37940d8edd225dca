use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderConfig, TrainSchedule};
use crate::error::{Error, Result};
use crate::featuremap::{FeatureMapSpec, PairPhase};
use crate::metrics::SelectionMetric;
use crate::qsim::NoiseSpec;
use crate::qsvm::CvPlan;
use crate::vqc::{VqcSchedule, VqcSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Nslkdd,
    Lingspam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Qsvm,
    Vqc,
    ClassicalBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Shots,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub split: u64,
    pub encoder: u64,
    pub quantum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding `KDDTrain+.txt`/`KDDTest+.txt`, or the Ling-Spam root.
    pub root: PathBuf,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub lingspam_variant: String,
    pub ngram_max: usize,
    /// Stratified cap on the rows the quantum arms train on.
    pub train_limit: Option<usize>,
    /// Stratified cap on validation rows used by the quantum arms.
    pub val_limit: Option<usize>,
    /// Stratified cap on evaluated test rows.
    pub test_limit: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            root: PathBuf::from("data"),
            val_fraction: 0.2,
            test_fraction: 0.2,
            lingspam_variant: "bare".into(),
            ngram_max: 1,
            train_limit: None,
            val_limit: None,
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    /// Defaults to (256, 64) for NSL-KDD and (512, 128) for Ling-Spam.
    pub hidden_sizes: Option<Vec<usize>>,
    pub embed_dim: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
    pub selection: SelectionMetric,
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection {
            hidden_sizes: None,
            embed_dim: 12,
            dropout: 0.15,
            layer_norm_eps: 1e-5,
            selection: SelectionMetric::MacroF1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub patience: usize,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        ScheduleSection { epochs: 25, batch_size: 256, lr: 1e-3, weight_decay: 1e-4, patience: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub depol1: f64,
    pub depol2: f64,
    pub readout_01: f64,
    pub readout_10: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { depol1: 1e-3, depol2: 1e-2, readout_01: 0.0, readout_10: 0.0 }
    }
}

impl NoiseSection {
    pub fn spec(&self) -> NoiseSpec {
        let mut n = NoiseSpec::depolarizing(self.depol1, self.depol2);
        if self.readout_01 > 0.0 || self.readout_10 > 0.0 {
            n = n.with_readout(self.readout_01, self.readout_10);
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QsvmSection {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub beta: f64,
}

impl Default for QsvmSection {
    fn default() -> Self {
        let plan = CvPlan::default();
        QsvmSection { c_grid: plan.c_grid, folds: plan.folds, beta: plan.beta }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamSection {
    pub subset_size: usize,
    pub reference_limit: usize,
    pub batch: usize,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection { subset_size: 100, reference_limit: 64, batch: 32 }
    }
}

/// One experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub dataset: DatasetKind,
    pub model: ModelKind,
    #[serde(default = "default_qubits")]
    pub qubits: usize,
    /// Feature-map repetitions.
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// VQC re-uploading blocks.
    #[serde(default = "default_reps")]
    pub vqc_reps: usize,
    #[serde(default = "default_pair_phase")]
    pub pair_phase: PairPhase,
    /// Angles are `angle_range · clip(scaled embedding)`.
    #[serde(default = "default_angle_range")]
    pub angle_range: f64,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_true")]
    pub mitigate: bool,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    /// VQC optimizer settings; the encoder schedule is reused when absent.
    #[serde(default)]
    pub vqc_schedule: Option<ScheduleSection>,
    #[serde(default)]
    pub qsvm: QsvmSection,
    #[serde(default)]
    pub stream: StreamSection,
}

fn default_qubits() -> usize {
    4
}
fn default_reps() -> usize {
    2
}
fn default_pair_phase() -> PairPhase {
    PairPhase::PiMinusProduct
}
fn default_angle_range() -> f64 {
    std::f64::consts::PI
}
fn default_backend() -> Backend {
    Backend::Exact
}
fn default_shots() -> u64 {
    1024
}
fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(id: &str, dataset: DatasetKind, model: ModelKind, root: &Path) -> Self {
        ExperimentConfig {
            id: id.into(),
            dataset,
            model,
            qubits: default_qubits(),
            reps: default_reps(),
            vqc_reps: default_reps(),
            pair_phase: default_pair_phase(),
            angle_range: default_angle_range(),
            backend: default_backend(),
            shots: default_shots(),
            mitigate: true,
            noise: NoiseSection::default(),
            seeds: Seeds::default(),
            data: DataConfig { root: root.to_path_buf(), ..Default::default() },
            encoder: EncoderSection::default(),
            schedule: ScheduleSection::default(),
            vqc_schedule: None,
            qsvm: QsvmSection::default(),
            stream: StreamSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Rejects inconsistent settings before any compute.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return bad(format!("id {:?} must be a non-empty file-name-safe tag", self.id));
        }
        if self.qubits > self.encoder.embed_dim {
            return bad(format!("qubits ({}) exceed embed_dim ({})", self.qubits, self.encoder.embed_dim));
        }
        if self.model != ModelKind::ClassicalBaseline {
            self.feature_map()?;
            self.vqc_spec()?;
        }
        if !(self.angle_range > 0.0 && self.angle_range <= std::f64::consts::PI) {
            return bad(format!("angle_range {} outside (0, pi]", self.angle_range));
        }
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        self.noise.spec().validate_for(self.qubits)?;
        for f in [self.data.val_fraction, self.data.test_fraction] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("split fraction {f} not in (0, 1)"));
            }
        }
        if !(1..=2).contains(&self.data.ngram_max) {
            return bad(format!("ngram_max {} not in 1..=2", self.data.ngram_max));
        }
        if self.qsvm.c_grid.is_empty() || self.qsvm.c_grid.iter().any(|c| !(*c > 0.0)) {
            return bad("c_grid must be non-empty and positive".into());
        }
        if self.stream.reference_limit == 0 || self.stream.batch == 0 || self.stream.subset_size == 0 {
            return bad("stream sizes must be positive".into());
        }
        self.encoder_config(1)?.validate()?;
        self.train_schedule([1.0, 1.0]).validate()?;
        if let Some(s) = &self.vqc_schedule {
            if s.epochs == 0 || s.batch_size == 0 || !(s.lr > 0.0) || !(s.weight_decay >= 0.0) {
                return bad("vqc_schedule needs positive epochs, batch_size and lr".into());
            }
        }
        Ok(())
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.encoder.hidden_sizes.clone().unwrap_or_else(|| match self.dataset {
            DatasetKind::Nslkdd => vec![256, 64],
            DatasetKind::Lingspam => vec![512, 128],
        })
    }

    pub fn encoder_config(&self, input_dim: usize) -> Result<EncoderConfig> {
        let mut c = EncoderConfig::new(input_dim, self.hidden_sizes());
        c.embed_dim = self.encoder.embed_dim;
        c.dropout = self.encoder.dropout;
        c.layer_norm_eps = self.encoder.layer_norm_eps;
        c.seed = self.seeds.encoder;
        c.validate()?;
        Ok(c)
    }

    pub fn train_schedule(&self, class_weights: [f64; 2]) -> TrainSchedule {
        let s = &self.schedule;
        TrainSchedule {
            epochs: s.epochs,
            batch_size: s.batch_size,
            learning_rate: s.lr,
            weight_decay: s.weight_decay,
            patience: s.patience,
            class_weights,
            selection: self.encoder.selection,
            beta: self.qsvm.beta,
        }
    }

    pub fn vqc_train_schedule(&self, class_weights: [f64; 2]) -> VqcSchedule {
        let s = self.vqc_schedule.as_ref().unwrap_or(&self.schedule);
        VqcSchedule {
            epochs: s.epochs,
            batch_size: s.batch_size,
            learning_rate: s.lr,
            weight_decay: s.weight_decay,
            patience: s.patience,
            class_weights,
            seed: self.seeds.quantum,
        }
    }

    pub fn feature_map(&self) -> Result<FeatureMapSpec> {
        Ok(FeatureMapSpec::new(self.qubits, self.reps)?.with_pair_phase(self.pair_phase))
    }

    pub fn vqc_spec(&self) -> Result<VqcSpec> {
        let mut s = VqcSpec::new(self.qubits, self.vqc_reps)?;
        s.pair_phase = self.pair_phase;
        Ok(s)
    }

    pub fn cv_plan(&self) -> CvPlan {
        CvPlan {
            folds: self.qsvm.folds,
            c_grid: self.qsvm.c_grid.clone(),
            beta: self.qsvm.beta,
            seed: crate::rng::derive_seed(self.seeds.quantum, &[7]),
        }
    }

    /// Same cell with every seed shifted by `repeat`.
    pub fn with_repeat(&self, repeat: u64) -> Self {
        let mut c = self.clone();
        c.seeds.split += repeat;
        c.seeds.encoder += repeat;
        c.seeds.quantum += repeat;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
id = "c2"
dataset = "lingspam"
model = "qsvm"
[data]
root = "/data/lingspam"
"#,
        )
        .unwrap();
        assert_eq!(c.qubits, 4);
        assert_eq!(c.hidden_sizes(), vec![512, 128]);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn qubits_above_embedding_rejected() {
        let mut c = ExperimentConfig::new("x", DatasetKind::Nslkdd, ModelKind::Qsvm, Path::new("."));
        c.qubits = 6;
        c.encoder.embed_dim = 4;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml("id='a'\ndataset='nslkdd'\nmodel='vqc'\nqbits=2\n").is_err());
    }
}
