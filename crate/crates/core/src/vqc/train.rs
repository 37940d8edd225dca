use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::circuit::{Execution, VqcModel, VqcSpec};
use crate::encoder::AdamW;
use crate::error::{Error, Result};
use crate::featuremap::AngleVector;
use crate::metrics::confusion;
use crate::rng::{derive_seed, rng_from_seed, shuffle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcSchedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub patience: usize,
    pub class_weights: [f64; 2],
    pub seed: u64,
}

impl Default for VqcSchedule {
    fn default() -> Self {
        VqcSchedule {
            epochs: 25,
            batch_size: 256,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            patience: 8,
            class_weights: [1.0, 1.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcHistory {
    pub epochs: Vec<VqcEpoch>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// `max(z, 0) − z·y + ln(1 + e^{−|z|})` and its derivative `σ(z) − y`.
pub fn bce_with_logits(z: f64, y: u8) -> (f64, f64) {
    let y = f64::from(y);
    let loss = z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
    let sigmoid = if z >= 0.0 { 1.0 / (1.0 + (-z).exp()) } else { z.exp() / (1.0 + z.exp()) };
    (loss, sigmoid - y)
}

fn evaluate(model: &VqcModel, angles: &[AngleVector], labels: &[u8], w: [f64; 2]) -> Result<(f64, f64, f64)> {
    let logits: Vec<f64> =
        angles.par_iter().map(|a| model.forward_logit(a, &Execution::Exact)).collect::<Result<_>>()?;
    let loss = logits.iter().zip(labels).map(|(&z, &y)| w[y as usize] * bce_with_logits(z, y).0).sum::<f64>()
        / labels.len() as f64;
    let preds: Vec<u8> = logits.iter().map(|&z| u8::from(z >= 0.0)).collect();
    let c = confusion(labels, &preds)?;
    Ok((loss, c.accuracy(), c.macro_f1()))
}

/// Mini-batch AdamW over `(θ, scale, bias)` with exact parameter-shift gradients and
/// early stopping on validation loss.
pub fn train_vqc(
    spec: VqcSpec,
    schedule: &VqcSchedule,
    train_angles: &[AngleVector],
    train_y: &[u8],
    val_angles: &[AngleVector],
    val_y: &[u8],
) -> Result<(VqcModel, VqcHistory)> {
    if train_y.is_empty() || val_y.is_empty() {
        return Err(Error::Empty("VQC train/validation split"));
    }
    if train_angles.len() != train_y.len() || val_angles.len() != val_y.len() {
        return Err(Error::invalid("angle rows and labels differ in length"));
    }
    if schedule.epochs == 0 || schedule.batch_size == 0 || schedule.patience > schedule.epochs {
        return Err(Error::invalid("bad VQC schedule"));
    }
    crate::metrics::check_labels(train_y)?;
    crate::metrics::check_labels(val_y)?;
    let w = schedule.class_weights;
    let mut model = VqcModel::init(spec, schedule.seed)?;
    let mut opt = AdamW::new(schedule.learning_rate, schedule.weight_decay);
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut since_best = 0usize;
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    for epoch in 0..schedule.epochs {
        shuffle(&mut order, &mut rng_from_seed(derive_seed(schedule.seed, &[1, epoch as u64])));
        let mut loss_sum = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            let per_sample: Vec<(f64, Vec<f64>, f64, f64)> = batch
                .par_iter()
                .map(|&i| {
                    let g = model.logit_gradient(&train_angles[i])?;
                    let (loss, dz) = bce_with_logits(g.logit, train_y[i]);
                    let scale = w[train_y[i] as usize];
                    let dtheta = g.theta.iter().map(|d| scale * dz * d).collect();
                    Ok((scale * loss, dtheta, scale * dz * g.scale, scale * dz * g.bias))
                })
                .collect::<Result<_>>()?;
            let inv = 1.0 / batch.len() as f64;
            let mut g_theta = vec![0.0; model.theta.len()];
            let (mut g_scale, mut g_bias) = (0.0, 0.0);
            for (loss, dt, ds, db) in &per_sample {
                loss_sum += loss;
                g_theta.iter_mut().zip(dt).for_each(|(g, d)| *g += d * inv);
                g_scale += ds * inv;
                g_bias += db * inv;
            }
            let (gs, gb) = ([g_scale], [g_bias]);
            let VqcModel { theta, scale, bias, .. } = &mut model;
            opt.step_slices(
                vec![theta.as_mut_slice(), std::slice::from_mut(scale), std::slice::from_mut(bias)],
                vec![&g_theta, &gs, &gb],
            );
        }
        let (val_loss, val_accuracy, val_macro_f1) = evaluate(&model, val_angles, val_y, w)?;
        epochs.push(VqcEpoch {
            epoch,
            train_loss: loss_sum / train_y.len() as f64,
            val_loss,
            val_accuracy,
            val_macro_f1,
        });
        log::debug!("vqc epoch {epoch}: val loss {val_loss:.4}, val acc {val_accuracy:.4}");
        if val_loss < best.0 {
            best = (val_loss, epoch, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= schedule.patience {
                stopped_early = epoch + 1 < schedule.epochs;
                break;
            }
        }
    }
    let (best_val_loss, best_epoch, best_model) = best;
    Ok((best_model, VqcHistory { epochs, best_epoch, best_val_loss, stopped_early }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_matches_definition() {
        for &z in &[-12.0f64, -2.0, 0.0, 0.7, 9.0] {
            for y in 0..2u8 {
                let p = 1.0 / (1.0 + (-z).exp());
                let naive = -(f64::from(y) * p.ln() + (1.0 - f64::from(y)) * (1.0 - p).ln());
                let (l, d) = bce_with_logits(z, y);
                assert!((l - naive).abs() < 1e-9);
                assert!((d - (p - f64::from(y))).abs() < 1e-12);
            }
        }
        assert!((bce_with_logits(0.0, 1).0 - 2f64.ln()).abs() < 1e-15);
        assert!((bce_with_logits(-800.0, 1).0 - 800.0).abs() < 1e-9);
        assert!(bce_with_logits(800.0, 1).0.abs() < 1e-300);
    }
}
