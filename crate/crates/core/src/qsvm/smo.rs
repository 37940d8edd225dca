use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::SvmModel;
use crate::error::{Error, Result};
use crate::metrics::check_labels;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop when the maximal KKT violation `m(α) − M(α)` falls below this.
    pub tol: f64,
    /// Iteration cap as a multiple of `n`; `None` means `10·n` sweeps (`10·n²` pair updates).
    pub max_passes: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-3, max_passes: None }
    }
}

/// SMO on `min ½αᵀQα − 1ᵀα`, `0 ≤ α_i ≤ C·w_{y_i}`, `yᵀα = 0`, with the maximal-violating
/// pair as working set (lowest index wins ties).
pub fn solve_dual(
    gram: ArrayView2<f64>,
    labels: &[u8],
    c: f64,
    class_weights: [f64; 2],
    options: SolverOptions,
) -> Result<SvmModel> {
    let n = labels.len();
    if gram.nrows() != n || gram.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: gram.nrows() });
    }
    check_labels(labels)?;
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass("SVM training labels".into()));
    }
    if !(c > 0.0) || class_weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("C and class weights must be positive"));
    }
    for i in 0..n {
        for j in i + 1..n {
            if (gram[[i, j]] - gram[[j, i]]).abs() > 1e-10 {
                return Err(Error::invalid(format!("gram not symmetric at ({i}, {j})")));
            }
        }
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let cap: Vec<f64> = labels.iter().map(|&l| c * class_weights[l as usize]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = options.max_passes.unwrap_or(10 * n).saturating_mul(n).max(10_000);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let Some((i, j)) = select_pair(&alpha, &grad, &y, &cap, options.tol) else {
            converged = true;
            break;
        };
        iterations += 1;
        let (kii, kjj, kij) = (gram[[i, i]], gram[[j, j]], gram[[i, j]]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (cap[i], cap[j]);
        let quad = (kii + kjj - 2.0 * kij).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * gram[[t, i]] * di + y[j] * gram[[t, j]] * dj);
        }
    }
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without reaching tol {}", options.tol);
    }
    let bias = -rho(&alpha, &grad, &y, &cap);
    let (support, dual_coef): (Vec<usize>, Vec<f64>) =
        (0..n).filter(|&i| alpha[i] > 0.0).map(|i| (i, alpha[i] * y[i])).unzip();
    Ok(SvmModel {
        dual_coef,
        support,
        bias,
        c,
        class_weights,
        threshold: 0.0,
        sign: 1.0,
        n_train: n,
        iterations,
        converged,
    })
}

fn in_up(a: f64, y: f64, cap: f64) -> bool {
    (y > 0.0 && a < cap) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, cap: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < cap)
}

fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], cap: &[f64], tol: f64) -> Option<(usize, usize)> {
    let mut i = None;
    let mut gmax = f64::NEG_INFINITY;
    let mut j = None;
    let mut gmin = f64::INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], cap[t]) && v > gmax {
            gmax = v;
            i = Some(t);
        }
        if in_low(alpha[t], y[t], cap[t]) && v < gmin {
            gmin = v;
            j = Some(t);
        }
    }
    match (i, j) {
        (Some(i), Some(j)) if gmax - gmin >= tol => Some((i, j)),
        _ => None,
    }
}

/// Mean of `y_i ∇_i` over free vectors, else the midpoint of the feasible interval.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], cap: &[f64]) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= cap[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Largest violation `m(α) − M(α)` of the KKT conditions for a trained model.
pub fn kkt_violation(gram: ArrayView2<f64>, labels: &[u8], model: &SvmModel) -> f64 {
    let n = labels.len();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let cap: Vec<f64> = labels.iter().map(|&l| model.c * model.class_weights[l as usize]).collect();
    let mut alpha = vec![0.0; n];
    for (&i, &a) in model.support.iter().zip(&model.dual_coef) {
        alpha[i] = a * y[i];
    }
    let (mut gmax, mut gmin) = (f64::NEG_INFINITY, f64::INFINITY);
    for t in 0..n {
        let qa: f64 = (0..n).map(|s| y[t] * y[s] * gram[[t, s]] * alpha[s]).sum();
        let v = -y[t] * (qa - 1.0);
        if in_up(alpha[t], y[t], cap[t]) {
            gmax = gmax.max(v);
        }
        if in_low(alpha[t], y[t], cap[t]) {
            gmin = gmin.min(v);
        }
    }
    (gmax - gmin).max(0.0)
}
