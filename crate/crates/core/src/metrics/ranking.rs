use super::check_labels;
use crate::error::{Error, Result};

fn check(labels: &[u8], scores: &[f64]) -> Result<(usize, usize)> {
    if labels.len() != scores.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    check_labels(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok((pos, labels.len() - pos))
}

/// Area under the ROC curve as the Mann–Whitney statistic with midranks for ties:
/// `P(s⁺ > s⁻) + ½ P(s⁺ = s⁻)`.
pub fn auroc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, neg) = check(labels, scores)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("AUROC labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group spans ranks i+1 ..= j+1
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += midrank * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Area under the precision–recall curve by step integration (average precision):
/// `Σ_k (R_k − R_{k−1}) P_k` over descending unique score thresholds, ties grouped.
pub fn auprc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    let (pos, _) = check(labels, scores)?;
    if pos == 0 {
        return Err(Error::SingleClass("AUPRC labels (no positives)".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn separated_scores_give_one() {
        let y = [0, 0, 1, 1];
        let s = [0.1, 0.2, 0.8, 0.9];
        assert_eq!(auroc(&y, &s).unwrap(), 1.0);
        assert_eq!(auprc(&y, &s).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(auroc(&[1, 1], &[0.1, 0.2]).is_err());
        assert!(auprc(&[0, 0], &[0.1, 0.2]).is_err());
        assert!(auprc(&[1, 0], &[0.1, 0.2]).is_ok());
    }

    #[test]
    fn null_ranking_is_near_half_and_prevalence() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(4);
        let n = 20_000;
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let prevalence = y.iter().filter(|&&l| l == 1).count() as f64 / n as f64;
        assert!((auroc(&y, &s).unwrap() - 0.5).abs() < 0.02);
        assert!((auprc(&y, &s).unwrap() - prevalence).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn ranking_metrics_invariant_under_monotone_transform(
            data in proptest::collection::vec((0u8..2, -5.0f64..5.0), 2..60)
        ) {
            let (y, s): (Vec<u8>, Vec<f64>) = data.into_iter().unzip();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() + 3.0).collect();
            prop_assert!((auroc(&y, &s).unwrap() - auroc(&y, &t).unwrap()).abs() < 1e-12);
            prop_assert!((auprc(&y, &s).unwrap() - auprc(&y, &t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn auroc_of_negated_scores_complements(
            y in proptest::collection::vec(0u8..2, 2..40), seed in any::<u64>()
        ) {
            use rand::Rng;
            prop_assume!(y.contains(&0) && y.contains(&1));
            let mut rng = crate::rng::rng_from_seed(seed);
            // continuous draws: ties have probability zero
            let s: Vec<f64> = (0..y.len()).map(|_| rng.random::<f64>()).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auroc(&y, &s).unwrap() + auroc(&y, &neg).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
