#![allow(dead_code)]

use std::f64::consts::PI;

use hybridq::encoder::EncoderModel;
use hybridq::featuremap::{
    center_gram, center_test_row, compute_uncompute, fidelity_kernel, fidelity_kernel_shots, train_gram, AngleVector,
    FeatureMapSpec, GramBundle, KernelReference, PairPhase,
};
use hybridq::qsim::{corrupt_distribution, invert_readout, DensityState, NoiseSpec, PureState};
use hybridq::rng::rng_from_seed;
use hybridq::vqc::{Execution, VqcModel, VqcSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

pub fn random_angles(q: usize, rng: &mut impl Rng) -> AngleVector {
    AngleVector::new((0..q).map(|_| rng.random_range(-PI..PI)).collect()).unwrap()
}

fn embed_1q(gate: &DMatrix<Complex64>, target: usize, q: usize) -> DMatrix<Complex64> {
    let id = DMatrix::<Complex64>::identity(2, 2);
    // qubit 0 is the rightmost Kronecker factor
    (0..q)
        .rev()
        .fold(DMatrix::<Complex64>::identity(1, 1), |acc, k| acc.kronecker(if k == target { gate } else { &id }))
}

/// `|⟨φ(a)|φ(b)⟩|²` from explicitly multiplied `2^q × 2^q` unitaries.
pub fn dense_zz_kernel(a: &[f64], b: &[f64], reps: usize, phase: PairPhase) -> f64 {
    let q = a.len();
    let dim = 1 << q;
    let s = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    let h = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]);
    let unitary = |t: &[f64]| {
        let mut u = DMatrix::<Complex64>::identity(dim, dim);
        for _ in 0..reps {
            for k in 0..q {
                u = embed_1q(&h, k, q) * u;
            }
            for k in 0..q {
                let rz = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                    Complex64::from_polar(1.0, -t[k]),
                    Complex64::from_polar(1.0, t[k]),
                ]));
                u = embed_1q(&rz, k, q) * u;
            }
            for i in 0..q {
                for j in i + 1..q {
                    let phi = phase.phase(t[i], t[j]);
                    let diag = (0..dim).map(|z| {
                        let zi = 1.0 - 2.0 * ((z >> i) & 1) as f64;
                        let zj = 1.0 - 2.0 * ((z >> j) & 1) as f64;
                        Complex64::from_polar(1.0, -phi * zi * zj)
                    });
                    u = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(dim, diag)) * u;
                }
            }
        }
        u.column(0).into_owned()
    };
    let (pa, pb) = (unitary(a), unitary(b));
    pa.dotc(&pb).norm_sqr()
}

pub fn dense_oracle_worst(q: usize, reps: usize, pairs: usize, seed: u64) -> f64 {
    let spec = FeatureMapSpec::new(q, reps).unwrap();
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (a, b) = (random_angles(q, &mut rng), random_angles(q, &mut rng));
        let fast = fidelity_kernel(&a, &b, &spec).unwrap();
        let dense = dense_zz_kernel(a.as_slice(), b.as_slice(), reps, spec.pair_phase);
        worst = worst.max((fast - dense).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy)]
pub struct KernelCheck {
    pub asymmetry: f64,
    pub diagonal: f64,
    pub out_of_range: usize,
    pub min_eigenvalue: f64,
    pub centered_mean: f64,
    pub out_of_sample: f64,
}

impl KernelCheck {
    pub fn passes(&self) -> bool {
        self.asymmetry <= 1e-12
            && self.diagonal <= 1e-12
            && self.out_of_range == 0
            && self.min_eigenvalue >= -1e-8
            && self.centered_mean <= 1e-9
            && self.out_of_sample <= 1e-10
    }
}

fn min_eigenvalue(k: &Array2<f64>) -> f64 {
    let m = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| k[[i, j]]);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Pairwise properties on `pairs` random pairs, spectral and centering properties on an
/// `n`-point Gram.
pub fn kernel_check(q: usize, reps: usize, pairs: usize, n: usize, seed: u64) -> KernelCheck {
    let spec = FeatureMapSpec::new(q, reps).unwrap();
    let mut rng = rng_from_seed(seed);
    let (mut asymmetry, mut diagonal, mut out_of_range) = (0.0f64, 0.0f64, 0);
    for _ in 0..pairs {
        let (a, b) = (random_angles(q, &mut rng), random_angles(q, &mut rng));
        let ab = fidelity_kernel(&a, &b, &spec).unwrap();
        let ba = fidelity_kernel(&b, &a, &spec).unwrap();
        asymmetry = asymmetry.max((ab - ba).abs());
        diagonal = diagonal.max((fidelity_kernel(&a, &a, &spec).unwrap() - 1.0).abs());
        out_of_range += usize::from(!(0.0..=1.0).contains(&ab));
    }
    let train: Vec<AngleVector> = (0..n).map(|_| random_angles(q, &mut rng)).collect();
    let raw = train_gram(&train, &spec).unwrap();
    let min_eig = min_eigenvalue(&raw);
    let centered = center_gram(GramBundle::from_blocks(Some(spec), raw, None, None).unwrap()).unwrap();
    let kc = &centered.train_gram;
    let row_mean = kc.rows().into_iter().map(|r| r.mean().unwrap().abs()).fold(0.0, f64::max);
    let col_mean = kc.columns().into_iter().map(|c| c.mean().unwrap().abs()).fold(0.0, f64::max);
    let stats = centered.stats.as_ref().unwrap();
    let reference = KernelReference::new(&train, &spec).unwrap();
    let mut out_of_sample = 0.0f64;
    for (i, t) in train.iter().enumerate() {
        let row = center_test_row(&reference.row(t).unwrap(), stats).unwrap();
        for (j, v) in row.iter().enumerate() {
            out_of_sample = out_of_sample.max((v - kc[[i, j]]).abs());
        }
    }
    KernelCheck {
        asymmetry,
        diagonal,
        out_of_range,
        min_eigenvalue: min_eig,
        centered_mean: row_mean.max(col_mean),
        out_of_sample,
    }
}

pub fn exact_distribution(a: &AngleVector, b: &AngleVector, spec: &FeatureMapSpec) -> Vec<f64> {
    let program = compute_uncompute(a, b, spec).unwrap();
    PureState::zero(spec.num_qubits).unwrap().apply_circuit(&program).unwrap().probabilities()
}

#[derive(Debug, Clone, Copy)]
pub struct ShotRealism {
    pub trials: usize,
    pub within: usize,
    pub mean_bias: f64,
}

impl ShotRealism {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.trials as f64
    }
}

/// Shot estimates against `4·√(p(1−p)/S)` plus the bias `|p − k|`, where `p` is the exact
/// noisy all-zeros probability the shots sample and `k` the noiseless kernel. One random
/// pair per trial.
pub fn shot_realism(q: usize, reps: usize, trials: usize, shots: u64, noise: &NoiseSpec, seed: u64) -> ShotRealism {
    let spec = FeatureMapSpec::new(q, reps).unwrap();
    let mut rng = rng_from_seed(seed);
    let (mut within, mut bias_sum) = (0, 0.0);
    for t in 0..trials {
        let (a, b) = (random_angles(q, &mut rng), random_angles(q, &mut rng));
        let k = fidelity_kernel(&a, &b, &spec).unwrap();
        let program = compute_uncompute(&a, &b, &spec).unwrap();
        let noisy = DensityState::zero(q).unwrap().apply_circuit_noisy(&program, noise).unwrap().probabilities()[0];
        let bias = (noisy - k).abs();
        bias_sum += bias;
        let est = fidelity_kernel_shots(&a, &b, &spec, shots, noise, false, seed ^ t as u64).unwrap();
        let band = 4.0 * (noisy * (1.0 - noisy) / shots as f64).sqrt() + bias;
        within += usize::from((est - k).abs() <= band);
    }
    ShotRealism { trials, within, mean_bias: bias_sum / trials as f64 }
}

/// Worst `|invert(corrupt(p)) − p|` over random compute-uncompute distributions.
pub fn analytic_mitigation_worst(q: usize, reps: usize, cases: usize, noise: &NoiseSpec, seed: u64) -> f64 {
    let spec = FeatureMapSpec::new(q, reps).unwrap();
    let mut rng = rng_from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (a, b) = (random_angles(q, &mut rng), random_angles(q, &mut rng));
        let truth = exact_distribution(&a, &b, &spec);
        let recovered = invert_readout(&corrupt_distribution(&truth, noise).unwrap(), noise).unwrap();
        worst = truth.iter().zip(&recovered).map(|(x, y)| (x - y).abs()).fold(worst, f64::max);
    }
    worst
}

/// Mean absolute kernel error (raw, mitigated) of shot estimates under readout noise.
pub fn finite_shot_mitigation(q: usize, reps: usize, seeds: u64, shots: u64, noise: &NoiseSpec) -> (f64, f64) {
    let spec = FeatureMapSpec::new(q, reps).unwrap();
    let (mut raw, mut mitigated) = (0.0, 0.0);
    for s in 0..seeds {
        let mut rng = rng_from_seed(1000 + s);
        let (a, b) = (random_angles(q, &mut rng), random_angles(q, &mut rng));
        let k = fidelity_kernel(&a, &b, &spec).unwrap();
        raw += (fidelity_kernel_shots(&a, &b, &spec, shots, noise, false, s).unwrap() - k).abs();
        mitigated += (fidelity_kernel_shots(&a, &b, &spec, shots, noise, true, s).unwrap() - k).abs();
    }
    (raw / seeds as f64, mitigated / seeds as f64)
}

/// Largest relative gap between backprop and central differences over every parameter.
pub fn encoder_fd_worst(model: &EncoderModel, x: &Array2<f64>, y: &[u8], w: [f64; 2], dropout: Option<u64>) -> f64 {
    let rng = |s: Option<u64>| s.map(rng_from_seed);
    let mut r = rng(dropout);
    let (_, grads) = model.loss_and_gradients(x.view(), y, w, r.as_mut()).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(_, t)| t.to_vec()).collect();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (k, g) in analytic.iter().enumerate() {
        for i in 0..g.len() {
            let mut plus = model.clone();
            plus.params.tensors_mut()[k][i] += h;
            let mut minus = model.clone();
            minus.params.tensors_mut()[k][i] -= h;
            let lp = plus.loss(x.view(), y, w, rng(dropout).as_mut()).unwrap();
            let lm = minus.loss(x.view(), y, w, rng(dropout).as_mut()).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs());
            if scale >= 1e-8 {
                worst = worst.max((g[i] - fd).abs() / scale);
            }
        }
    }
    worst
}

fn vqc_logit(m: &VqcModel, a: &AngleVector) -> f64 {
    m.forward_logit(a, &Execution::Exact).unwrap()
}

/// Largest absolute gap between parameter-shift and central-difference gradients of the
/// logit over every trainable parameter (rotation angles, readout scale and bias).
pub fn vqc_shift_worst(n: usize, layers: usize, seed: u64) -> f64 {
    let h = 1e-5;
    let mut rng = rng_from_seed(seed);
    let mut m = VqcModel::init(VqcSpec::new(n, layers).unwrap(), seed).unwrap();
    m.theta.iter_mut().for_each(|t| *t = rng.random_range(-PI..PI));
    m.scale = 1.7;
    m.bias = -0.3;
    let a = random_angles(n, &mut rng);
    let g = m.logit_gradient(&a).unwrap();
    let mut worst = 0.0f64;
    let fd = |plus: &VqcModel, minus: &VqcModel| (vqc_logit(plus, &a) - vqc_logit(minus, &a)) / (2.0 * h);
    for p in 0..m.theta.len() {
        let (mut plus, mut minus) = (m.clone(), m.clone());
        plus.theta[p] += h;
        minus.theta[p] -= h;
        worst = worst.max((g.theta[p] - fd(&plus, &minus)).abs());
    }
    let (mut plus, mut minus) = (m.clone(), m.clone());
    plus.scale += h;
    minus.scale -= h;
    worst = worst.max((g.scale - fd(&plus, &minus)).abs());
    let (mut plus, mut minus) = (m.clone(), m.clone());
    plus.bias += h;
    minus.bias -= h;
    worst.max((g.bias - fd(&plus, &minus)).abs())
}

pub fn pair_counting_auroc(y: &[u8], s: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

/// Average precision over every distinct threshold, scanned exhaustively.
pub fn threshold_scan_auprc(y: &[u8], s: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = s.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let positives = y.iter().filter(|&&l| l == 1).count() as f64;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let tp = (0..y.len()).filter(|&i| s[i] >= t && y[i] == 1).count() as f64;
        let pp = (0..y.len()).filter(|&i| s[i] >= t).count() as f64;
        let recall = tp / positives;
        area += (recall - prev_recall) * (tp / pp);
        prev_recall = recall;
    }
    area
}
