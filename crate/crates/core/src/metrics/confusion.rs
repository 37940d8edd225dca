use serde::{Deserialize, Serialize};

use super::check_labels;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "TN")]
    pub tn: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    fn add(&mut self, truth: u8, pred: u8) {
        match (truth, pred) {
            (1, 1) => self.tp += 1,
            (0, 0) => self.tn += 1,
            (0, 1) => self.fp += 1,
            _ => self.fn_ += 1,
        }
    }
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionCounts> {
    if labels.len() != predictions.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: predictions.len() });
    }
    check_labels(labels)?;
    check_labels(predictions)?;
    let mut c = ConfusionCounts::default();
    for (&t, &p) in labels.iter().zip(predictions) {
        c.add(t, p);
    }
    Ok(c)
}

/// Running tallies that emit one audit line per evaluated sample.
#[derive(Debug, Clone, Default)]
pub struct StreamingConfusion {
    counts: ConfusionCounts,
}

impl StreamingConfusion {
    pub const HEADER: &'static str = "idx,true_label,pred_label,TP,TN,FP,FN";

    pub fn new() -> Self {
        Self::default()
    }

    pub fn counts(&self) -> ConfusionCounts {
        self.counts
    }

    /// Records one sample and returns `idx,true_label,pred_label,TP,TN,FP,FN`.
    pub fn update(&mut self, idx: usize, truth: u8, pred: u8) -> Result<String> {
        check_labels(&[truth, pred])?;
        self.counts.add(truth, pred);
        let c = self.counts;
        Ok(format!("{idx},{truth},{pred},{},{},{},{}", c.tp, c.tn, c.fp, c.fn_))
    }
}
