use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decision_scores;
use super::smo::{solve_dual, SolverOptions};
use crate::datapipe::{class_weights, stratified_folds};
use crate::error::{Error, Result};
use crate::metrics::{check_labels, confusion, predict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub folds: usize,
    pub c_grid: Vec<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan { folds: 5, c_grid: vec![0.1, 1.0, 10.0, 100.0], beta: 2.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub c: f64,
    pub fold_scores: Vec<f64>,
    pub mean_f_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_c: f64,
    pub table: Vec<CvRow>,
}

pub(crate) fn submatrix(k: ArrayView2<f64>, rows: &[usize], cols: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(r, c)| k[[rows[r], cols[c]]])
}

/// Stratified k-fold selection of `C` by mean F_β at threshold 0; ties go to the smaller `C`.
pub fn select_c(gram: ArrayView2<f64>, labels: &[u8], plan: &CvPlan, options: SolverOptions) -> Result<CvResult> {
    if plan.c_grid.is_empty() || plan.c_grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::invalid("C grid must be nonempty and positive"));
    }
    if !(plan.beta > 0.0) {
        return Err(Error::invalid("beta must be positive"));
    }
    let folds = stratified_folds(labels, plan.folds, plan.seed)?;
    let mut grid = plan.c_grid.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds.len())
        .map(|f| {
            let train: Vec<usize> =
                folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, v)| v.clone()).collect();
            let mut train = train;
            train.sort_unstable();
            (train, folds[f].clone())
        })
        .collect();
    let mut table = Vec::new();
    for &c in &grid {
        let fold_scores: Vec<f64> = splits
            .par_iter()
            .map(|(train, held)| {
                let y_tr: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
                let y_ho: Vec<u8> = held.iter().map(|&i| labels[i]).collect();
                let model = solve_dual(submatrix(gram, train, train).view(), &y_tr, c, class_weights(&y_tr)?, options)?;
                let scores = decision_scores(&model, submatrix(gram, held, train).view())?;
                Ok(confusion(&y_ho, &predict(&scores, 0.0))?.f_beta(plan.beta))
            })
            .collect::<Result<_>>()?;
        let mean_f_beta = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        table.push(CvRow { c, fold_scores, mean_f_beta });
    }
    let best = table.iter().fold(&table[0], |b, r| if r.mean_f_beta > b.mean_f_beta { r } else { b });
    Ok(CvResult { best_c: best.c, table })
}

/// Threshold maximizing F_β over `{s_min − 1} ∪ {midpoints of consecutive distinct scores}`.
/// Returns `(t, F_β(t))`; ties go to the lowest threshold.
pub fn tune_threshold(scores: &[f64], labels: &[u8], beta: f64) -> Result<(f64, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    check_labels(labels)?;
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass("threshold tuning labels".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let pos_total = labels.iter().filter(|&&l| l == 1).count() as f64;
    let b2 = beta * beta;
    let f = |tp: f64, fp: f64| {
        let fnn = pos_total - tp;
        let den = (1.0 + b2) * tp + b2 * fnn + fp;
        if den > 0.0 {
            (1.0 + b2) * tp / den
        } else {
            0.0
        }
    };
    // everything predicted positive
    let (mut tp, mut fp) = (pos_total, (labels.len() as f64) - pos_total);
    let mut best = (scores[order[0]] - 1.0, f(tp, fp));
    let mut i = 0;
    while i < order.len() {
        let v = scores[order[i]];
        while i < order.len() && scores[order[i]] == v {
            if labels[order[i]] == 1 {
                tp -= 1.0;
            } else {
                fp -= 1.0;
            }
            i += 1;
        }
        if i == order.len() {
            break;
        }
        let fb = f(tp, fp);
        if fb > best.1 {
            best = (0.5 * (v + scores[order[i]]), fb);
        }
    }
    Ok(best)
}
