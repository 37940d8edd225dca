use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::model::{EncoderConfig, EncoderModel, Params};
use crate::error::{Error, Result};
use crate::metrics::{confusion, SelectionMetric};
use crate::rng::{derive_seed, rng_from_seed, shuffle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Epochs without improvement tolerated before stopping; 0 stops at the first miss.
    pub patience: usize,
    pub class_weights: [f64; 2],
    pub selection: SelectionMetric,
    pub beta: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 25,
            batch_size: 256,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            patience: 8,
            class_weights: [1.0, 1.0],
            selection: SelectionMetric::MacroF1,
            beta: 2.0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) || !(self.beta > 0.0) {
            return Err(Error::invalid("learning_rate and beta must be positive, weight_decay non-negative"));
        }
        if self.class_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("class weights must be positive"));
        }
        if self.patience > self.epochs {
            return Err(Error::invalid("patience exceeds epochs"));
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay: `p ← p − lr·wd·p − lr·m̂/(√v̂ + ε)`.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamW { lr, weight_decay, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update over parallel lists of parameter and gradient slices.
    pub fn step_slices(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) {
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                p[i] -= self.lr * self.weight_decay * p[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
            }
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        let g: Vec<&[f64]> = grads.tensors().into_iter().map(|(_, t)| t).collect();
        self.step_slices(params.tensors_mut(), g);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
}

pub(crate) fn gather_rows(x: ArrayView2<f32>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), x.ncols()));
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).iter_mut().zip(x.row(i)).for_each(|(o, &v)| *o = f64::from(v));
    }
    out
}

fn evaluate(model: &EncoderModel, x: ArrayView2<f32>, y: &[u8], schedule: &TrainSchedule) -> Result<(f64, f64)> {
    let out = model.infer(x)?;
    let preds: Vec<u8> = out.margins().iter().map(|&m| u8::from(m > 0.0)).collect();
    let metric = schedule.selection.evaluate(&confusion(y, &preds)?, schedule.beta);
    let xs = x.mapv(f64::from);
    let loss = model.loss(xs.view(), y, schedule.class_weights, None)?;
    Ok((loss, metric))
}

/// Mini-batch AdamW with per-epoch validation and best-checkpoint restoration.
pub fn train_encoder(
    config: EncoderConfig,
    schedule: &TrainSchedule,
    train_x: ArrayView2<f32>,
    train_y: &[u8],
    val_x: ArrayView2<f32>,
    val_y: &[u8],
) -> Result<(EncoderModel, TrainHistory)> {
    schedule.validate()?;
    if train_y.is_empty() || val_y.is_empty() {
        return Err(Error::Empty("encoder train/validation split"));
    }
    if train_x.nrows() != train_y.len() || val_x.nrows() != val_y.len() {
        return Err(Error::invalid("feature rows and labels differ in length"));
    }
    let seed = config.seed;
    let mut model = EncoderModel::new(config)?;
    let mut opt = AdamW::new(schedule.learning_rate, schedule.weight_decay);
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    let mut best = (f64::NEG_INFINITY, 0usize, model.params.clone());
    let mut since_best = 0usize;
    let mut records = Vec::new();
    let mut stopped_early = false;
    for epoch in 0..schedule.epochs {
        shuffle(&mut order, &mut rng_from_seed(derive_seed(seed, &[1, epoch as u64])));
        let mut dropout_rng = rng_from_seed(derive_seed(seed, &[2, epoch as u64]));
        let mut loss_sum = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            let xb = gather_rows(train_x, batch);
            let yb: Vec<u8> = batch.iter().map(|&i| train_y[i]).collect();
            let (loss, grads) =
                model.loss_and_gradients(xb.view(), &yb, schedule.class_weights, Some(&mut dropout_rng))?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite training loss at epoch {epoch}")));
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(&mut model.params, &grads);
        }
        let (val_loss, val_metric) = evaluate(&model, val_x, val_y, schedule)?;
        records.push(EpochRecord { epoch, train_loss: loss_sum / train_y.len() as f64, val_loss, val_metric });
        log::debug!("encoder epoch {epoch}: val metric {val_metric:.4}, val loss {val_loss:.4}");
        if val_metric > best.0 {
            best = (val_metric, epoch, model.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 0 && since_best >= schedule.patience {
                stopped_early = epoch + 1 < schedule.epochs;
                break;
            }
        }
    }
    let (best_metric, best_epoch, params) = best;
    model.params = params;
    Ok((model, TrainHistory { epochs: records, best_epoch, best_metric, stopped_early }))
}
