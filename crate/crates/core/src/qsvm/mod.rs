//! Binary SVM on precomputed (centered) kernels.
//!
//! Labels are `{0, 1}` externally and `{−1, +1}` inside the dual. Scores follow
//! `f(x) = s·(Σ_i α_i y_i K(x, x_i) + b)` and a sample is positive when `f(x) ≥ t`.

mod select;
mod smo;

pub use select::{select_c, tune_threshold, CvPlan, CvResult, CvRow};
pub use smo::{kkt_violation, solve_dual, SolverOptions};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `α_i y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    /// Indices into the training set.
    pub support: Vec<usize>,
    pub bias: f64,
    pub c: f64,
    pub class_weights: [f64; 2],
    pub threshold: f64,
    pub sign: f64,
    pub n_train: usize,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    /// Unsigned `Σ α_i y_i K(x, x_i) + b` for one kernel row against the full train set.
    pub fn raw_score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_train {
            return Err(Error::DimensionMismatch { expected: self.n_train, got: row.len() });
        }
        Ok(self.support.iter().zip(&self.dual_coef).map(|(&i, &a)| a * row[i]).sum::<f64>() + self.bias)
    }

    pub fn score(&self, row: &[f64]) -> Result<f64> {
        Ok(self.sign * self.raw_score(row)?)
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8> {
        Ok(u8::from(self.score(row)? >= self.threshold))
    }

    /// Flips the score sign so the positive class scores higher on average.
    pub fn align_sign(&mut self, rows: ArrayView2<f64>, labels: &[u8]) -> Result<()> {
        let raw: Vec<f64> = rows.rows().into_iter().map(|r| self.raw_score(&r.to_vec())).collect::<Result<_>>()?;
        let mean = |c: u8| {
            let v: Vec<f64> = raw.iter().zip(labels).filter(|(_, &l)| l == c).map(|(s, _)| *s).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        match (mean(0), mean(1)) {
            (Some(m0), Some(m1)) => {
                self.sign = if m1 >= m0 { 1.0 } else { -1.0 };
                Ok(())
            }
            _ => Err(Error::SingleClass("sign alignment labels".into())),
        }
    }
}

/// `s·(Σ α_i y_i K_{r,i} + b)` for every row of a centered kernel block.
pub fn decision_scores(model: &SvmModel, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
    if rows.ncols() != model.n_train {
        return Err(Error::DimensionMismatch { expected: model.n_train, got: rows.ncols() });
    }
    Ok(rows
        .rows()
        .into_iter()
        .map(|r| {
            model.sign * (model.support.iter().zip(&model.dual_coef).map(|(&i, &a)| a * r[i]).sum::<f64>() + model.bias)
        })
        .collect())
}
