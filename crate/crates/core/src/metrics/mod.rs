//! Binary classification metrics. The positive class (label 1) is attack / spam throughout.

mod confusion;
mod ranking;

pub use confusion::{confusion, ConfusionCounts, StreamingConfusion};
pub use ranking::{auprc, auroc};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn check_labels(labels: &[u8]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(format!("label {bad} is not binary")));
    }
    Ok(())
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

impl ConfusionCounts {
    pub fn accuracy(&self) -> f64 {
        ratio((self.tp + self.tn) as f64, self.total() as f64)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp as f64, (self.tp + self.fn_) as f64)
    }

    /// `F_β = (1+β²)PR / (β²P + R)` for the positive class; 0 when undefined.
    pub fn f_beta(&self, beta: f64) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        let b2 = beta * beta;
        ratio((1.0 + b2) * p * r, b2 * p + r)
    }

    /// F1 of the negative class, computed by swapping roles.
    fn f1_negative(&self) -> f64 {
        ConfusionCounts { tp: self.tn, tn: self.tp, fp: self.fn_, fn_: self.fp }.f_beta(1.0)
    }

    /// Unweighted mean of the per-class F1 scores.
    pub fn macro_f1(&self) -> f64 {
        0.5 * (self.f1_negative() + self.f_beta(1.0))
    }

    /// `(F1 negative, F1 positive)`.
    pub fn per_class_f1(&self) -> (f64, f64) {
        (self.f1_negative(), self.f_beta(1.0))
    }
}

pub fn accuracy(labels: &[u8], predictions: &[u8]) -> Result<f64> {
    Ok(confusion(labels, predictions)?.accuracy())
}

pub fn macro_f1(labels: &[u8], predictions: &[u8]) -> Result<f64> {
    Ok(confusion(labels, predictions)?.macro_f1())
}

pub fn f_beta(labels: &[u8], predictions: &[u8], beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta {beta} must be positive")));
    }
    Ok(confusion(labels, predictions)?.f_beta(beta))
}

/// Predicts positive when `score >= threshold`.
pub fn predict(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

/// Which validation statistic drives model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    MacroF1,
    FBeta,
    /// F1 of the positive class.
    PositiveF1,
    Accuracy,
}

impl SelectionMetric {
    pub fn evaluate(self, counts: &ConfusionCounts, beta: f64) -> f64 {
        match self {
            SelectionMetric::MacroF1 => counts.macro_f1(),
            SelectionMetric::FBeta => counts.f_beta(beta),
            SelectionMetric::PositiveF1 => counts.f_beta(1.0),
            SelectionMetric::Accuracy => counts.accuracy(),
        }
    }
}

/// Test-set report in the Acc / F1_macro / AUROC / AUPRC layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub f_beta: f64,
    pub beta: f64,
    /// `None` when the evaluated set holds a single class.
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub confusion: ConfusionCounts,
    pub threshold: f64,
}

impl MetricsReport {
    /// Thresholded metrics plus ranking metrics over raw scores.
    pub fn from_scores(labels: &[u8], scores: &[f64], threshold: f64, beta: f64) -> Result<Self> {
        if labels.len() != scores.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
        }
        let counts = confusion(labels, &predict(scores, threshold))?;
        Ok(MetricsReport {
            accuracy: counts.accuracy(),
            macro_f1: counts.macro_f1(),
            f_beta: counts.f_beta(beta),
            beta,
            auroc: auroc(labels, scores).ok(),
            auprc: auprc(labels, scores).ok(),
            confusion: counts,
            threshold,
        })
    }
}
