use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::check_labels;
use crate::rng::{rng_from_seed, shuffle};

/// Balanced weights `w_c = n / (2 n_c)`.
pub fn class_weights(labels: &[u8]) -> Result<[f64; 2]> {
    check_labels(labels)?;
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass("class weights need both classes".into()));
    }
    let n = labels.len() as f64;
    Ok([n / (2.0 * n0 as f64), n / (2.0 * n1 as f64)])
}

/// Apportions `total` proportionally to `weights` by largest remainder; ties go to the lower index.
pub fn largest_remainder(weights: &[usize], total: usize) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|&w| total as f64 * w as f64 / sum as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - alloc[b] as f64).total_cmp(&(quotas[a] - alloc[a] as f64)).then(a.cmp(&b)));
    let missing = total - alloc.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        alloc[i] += 1;
    }
    alloc
}

fn indices_by_class(labels: &[u8]) -> [Vec<usize>; 2] {
    let mut by = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        by[l as usize].push(i);
    }
    by
}

/// Splits off a stratified holdout of `round(n·fraction)` samples. Both index lists are sorted.
pub fn stratified_holdout(labels: &[u8], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    check_labels(labels)?;
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!("holdout fraction {fraction} not in [0, 1)")));
    }
    let by = indices_by_class(labels);
    let total = (labels.len() as f64 * fraction).round() as usize;
    let alloc = largest_remainder(&[by[0].len(), by[1].len()], total);
    let mut rng = rng_from_seed(seed);
    let mut keep = Vec::new();
    let mut hold = Vec::new();
    for (c, mut idx) in by.into_iter().enumerate() {
        shuffle(&mut idx, &mut rng);
        hold.extend_from_slice(&idx[..alloc[c]]);
        keep.extend_from_slice(&idx[alloc[c]..]);
    }
    keep.sort_unstable();
    hold.sort_unstable();
    Ok((keep, hold))
}

/// `k` stratified folds; per-fold class counts differ by at most one. Each fold is sorted.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_labels(labels)?;
    if k < 2 {
        return Err(Error::invalid("need at least two folds"));
    }
    let by = indices_by_class(labels);
    for (c, idx) in by.iter().enumerate() {
        if idx.len() < k {
            return Err(Error::invalid(format!("class {c} has {} samples, fewer than {k} folds", idx.len())));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for mut idx in by {
        shuffle(&mut idx, &mut rng);
        for i in idx {
            folds[slot % k].push(i);
            slot += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Proportional stratified subset of `size` indices where every category gets at least one slot.
///
/// Quotas `size·n_c/N` are floored (at least 1, at most `n_c`); any excess is taken from the
/// largest allocations, and shortfalls go to the largest remainders.
pub fn select_eval_subset(categories: &[String], size: usize, seed: u64) -> Result<Vec<usize>> {
    if size > categories.len() {
        return Err(Error::invalid(format!("subset of {size} from {} samples", categories.len())));
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in categories.iter().enumerate() {
        groups.entry(c.as_str()).or_default().push(i);
    }
    if groups.len() > size {
        let names: Vec<&str> = groups.keys().copied().collect();
        return Err(Error::invalid(format!("{} categories exceed {size} slots: {}", groups.len(), names.join(", "))));
    }
    let counts: Vec<usize> = groups.values().map(Vec::len).collect();
    let n = categories.len() as f64;
    let quotas: Vec<f64> = counts.iter().map(|&c| size as f64 * c as f64 / n).collect();
    let mut alloc: Vec<usize> = quotas.iter().zip(&counts).map(|(q, &c)| (q.floor() as usize).max(1).min(c)).collect();
    while alloc.iter().sum::<usize>() > size {
        let i = (0..alloc.len())
            .filter(|&i| alloc[i] > 1)
            .max_by(|&a, &b| alloc[a].cmp(&alloc[b]).then(b.cmp(&a)))
            .expect("more categories than slots was rejected");
        alloc[i] -= 1;
    }
    while alloc.iter().sum::<usize>() < size {
        let i = (0..alloc.len())
            .filter(|&i| alloc[i] < counts[i])
            .max_by(|&a, &b| (quotas[a] - alloc[a] as f64).total_cmp(&(quotas[b] - alloc[b] as f64)).then(b.cmp(&a)))
            .expect("size <= population");
        alloc[i] += 1;
    }
    let mut rng = rng_from_seed(seed);
    let mut chosen = Vec::with_capacity(size);
    for (mut idx, take) in groups.into_values().zip(alloc) {
        shuffle(&mut idx, &mut rng);
        chosen.extend_from_slice(&idx[..take]);
    }
    chosen.sort_unstable();
    Ok(chosen)
}
