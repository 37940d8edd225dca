use hybridq::featuremap::{center_gram, linear_gram, GramBundle};
use hybridq::metrics::confusion;
use hybridq::qsvm::{decision_scores, kkt_violation, solve_dual, tune_threshold, SolverOptions};
use hybridq::rng::rng_from_seed;
use ndarray::Array2;
use rand::Rng;

fn brute_force_best(scores: &[f64], labels: &[u8], beta: f64) -> f64 {
    let mut cands: Vec<f64> = scores.to_vec();
    cands.push(f64::INFINITY);
    cands.push(f64::NEG_INFINITY);
    let mut best = 0.0f64;
    for &t in &cands {
        let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= t)).collect();
        best = best.max(confusion(labels, &preds).unwrap().f_beta(beta));
    }
    best
}

#[test]
fn threshold_matches_brute_force_scan() {
    let mut rng = rng_from_seed(77);
    for trial in 0..20 {
        let n = rng.random_range(4..40);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse grid forces ties
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(-1.0..1.0f64) * 8.0).round() / 8.0).collect();
        let beta = [0.5, 1.0, 2.0][trial % 3];
        let (t, f) = tune_threshold(&scores, &labels, beta).unwrap();
        let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= t)).collect();
        let achieved = confusion(&labels, &preds).unwrap().f_beta(beta);
        let oracle = brute_force_best(&scores, &labels, beta);
        assert!((achieved - f).abs() < 1e-12);
        assert!((achieved - oracle).abs() < 1e-12, "trial {trial}: {achieved} vs {oracle}");
    }
}

fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
    let mut rng = rng_from_seed(seed);
    let y: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
    let x = y
        .iter()
        .map(|&l| {
            let c = if l == 1 { 0.8 } else { -0.8 };
            vec![c + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
        })
        .collect();
    (x, y)
}

fn centered(x: &[Vec<f64>], test: &[Vec<f64>]) -> (Array2<f64>, Array2<f64>) {
    let b = GramBundle::from_blocks(None, linear_gram(x, x), None, Some(linear_gram(test, x))).unwrap();
    let c = center_gram(b).unwrap();
    (c.train_gram, c.test_block.unwrap())
}

#[test]
fn kkt_and_feasibility_on_overlapping_classes() {
    let (x, y) = blobs(60, 1);
    let (k, _) = centered(&x, &x);
    let w = hybridq::datapipe::class_weights(&y).unwrap();
    let m = solve_dual(k.view(), &y, 1.0, w, SolverOptions::default()).unwrap();
    assert!(m.converged);
    assert!(kkt_violation(k.view(), &y, &m) < 1e-3);
    assert!(m.dual_coef.iter().sum::<f64>().abs() < 1e-8);
    for (&i, &a) in m.support.iter().zip(&m.dual_coef) {
        let alpha = a.abs();
        assert!(alpha > 0.0 && alpha <= 1.0 * w[y[i] as usize] + 1e-12);
        let free = alpha < w[y[i] as usize] - 1e-9;
        if free {
            let f = m.raw_score(k.row(i).as_slice().unwrap()).unwrap();
            assert!((f.abs() - 1.0).abs() < 1e-2, "free SV {i} has |f| = {}", f.abs());
        }
    }
}

#[test]
fn predictions_invariant_to_training_order() {
    let (x, y) = blobs(40, 2);
    let (xt, _) = blobs(15, 3);
    let perm: Vec<usize> = (0..40).rev().collect();
    let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
    let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
    let (k, kt) = centered(&x, &xt);
    let (kp, ktp) = centered(&xp, &xt);
    let opts = SolverOptions { tol: 1e-8, max_passes: None };
    let m = solve_dual(k.view(), &y, 1.0, [1.0, 1.0], opts).unwrap();
    let mp = solve_dual(kp.view(), &yp, 1.0, [1.0, 1.0], opts).unwrap();
    let s = decision_scores(&m, kt.view()).unwrap();
    let sp = decision_scores(&mp, ktp.view()).unwrap();
    for (a, b) in s.iter().zip(&sp) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn duplicate_free_support_vector_keeps_prediction_signs() {
    let (x, y) = blobs(40, 4);
    let (xt, _) = blobs(25, 5);
    let raw = linear_gram(&x, &x);
    let opts = SolverOptions { tol: 1e-8, max_passes: None };
    let m = solve_dual(raw.view(), &y, 1.0, [1.0, 1.0], opts).unwrap();
    // a bounded vector's duplicate doubles its cost; a free one leaves the optimum feasible
    let dup = m.support.iter().zip(&m.dual_coef).find(|(_, a)| a.abs() < 1.0 - 1e-6).map(|(&i, _)| i).unwrap();
    let mut x2 = x.clone();
    x2.push(x[dup].clone());
    let mut y2 = y.clone();
    y2.push(y[dup]);
    let m2 = solve_dual(linear_gram(&x2, &x2).view(), &y2, 1.0, [1.0, 1.0], opts).unwrap();
    let s1 = decision_scores(&m, linear_gram(&xt, &x).view()).unwrap();
    let s2 = decision_scores(&m2, linear_gram(&xt, &x2).view()).unwrap();
    for (a, b) in s1.iter().zip(&s2) {
        assert_eq!(a.signum(), b.signum());
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn duplicate_point_in_separable_hard_margin_keeps_decision_function() {
    let x: Vec<Vec<f64>> = vec![vec![-2.0, 0.0], vec![-1.0, 1.0], vec![1.0, 0.5], vec![2.0, -1.0]];
    let y = [0u8, 0, 1, 1];
    let opts = SolverOptions { tol: 1e-10, max_passes: None };
    let m = solve_dual(linear_gram(&x, &x).view(), &y, 1e6, [1.0, 1.0], opts).unwrap();
    let mut x2 = x.clone();
    x2.push(x[1].clone());
    let y2 = [0u8, 0, 1, 1, 0];
    let m2 = solve_dual(linear_gram(&x2, &x2).view(), &y2, 1e6, [1.0, 1.0], opts).unwrap();
    let probe: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.3 - 1.5, 0.2]).collect();
    let s1 = decision_scores(&m, linear_gram(&probe, &x).view()).unwrap();
    let s2 = decision_scores(&m2, linear_gram(&probe, &x2).view()).unwrap();
    for (a, b) in s1.iter().zip(&s2) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn sign_alignment_puts_positives_higher() {
    let (x, y) = blobs(30, 6);
    let (k, _) = centered(&x, &x);
    let mut m = solve_dual(k.view(), &y, 1.0, [1.0, 1.0], SolverOptions::default()).unwrap();
    m.sign = -1.0;
    m.align_sign(k.view(), &y).unwrap();
    let s = decision_scores(&m, k.view()).unwrap();
    let mean = |c: u8| {
        let v: Vec<f64> = s.iter().zip(&y).filter(|(_, &l)| l == c).map(|(v, _)| *v).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(1) >= mean(0));
}
