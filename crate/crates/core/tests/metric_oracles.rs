mod common;

use common::{pair_counting_auroc, threshold_scan_auprc};
use hybridq::metrics::{auprc, auroc, confusion, StreamingConfusion};
use hybridq::rng::rng_from_seed;
use rand::Rng;

#[test]
fn ranking_metrics_match_oracles_on_all_small_labelings() {
    let mut rng = rng_from_seed(8);
    let mut checked = 0;
    for n in 2..=8usize {
        // one tie-heavy and one continuous score vector per size
        let coarse: Vec<f64> = (0..n).map(|_| rng.random_range(0..3) as f64).collect();
        let fine: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        for scores in [&coarse, &fine] {
            for mask in 0u32..(1 << n) {
                let y: Vec<u8> = (0..n).map(|i| ((mask >> i) & 1) as u8).collect();
                let has_both = y.contains(&0) && y.contains(&1);
                if has_both {
                    assert_eq!(auroc(&y, scores).unwrap(), pair_counting_auroc(&y, scores));
                }
                if y.contains(&1) {
                    let a = auprc(&y, scores).unwrap();
                    let b = threshold_scan_auprc(&y, scores);
                    assert!((a - b).abs() < 1e-15, "n={n} mask={mask}: {a} vs {b}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500);
}

#[test]
fn streaming_tallies_equal_batch_confusion() {
    let mut rng = rng_from_seed(21);
    let n = 22_544;
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let p: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let mut s = StreamingConfusion::new();
    let mut last = String::new();
    for i in 0..n {
        last = s.update(i, y[i], p[i]).unwrap();
    }
    let batch = confusion(&y, &p).unwrap();
    assert_eq!(s.counts(), batch);
    let tail: Vec<u64> = last.split(',').skip(3).map(|v| v.parse().unwrap()).collect();
    assert_eq!(tail, vec![batch.tp, batch.tn, batch.fp, batch.fn_]);
}
