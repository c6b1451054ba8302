//! Clustering agreement metrics against ground-truth labels.

use crate::error::{Error, Result};
use std::collections::HashMap;

fn contingency(a: &[usize], b: &[usize]) -> (HashMap<usize, usize>, HashMap<usize, usize>, HashMap<(usize, usize), usize>) {
    let mut ca = HashMap::new();
    let mut cb = HashMap::new();
    let mut joint = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *ca.entry(x).or_insert(0) += 1;
        *cb.entry(y).or_insert(0) += 1;
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    (ca, cb, joint)
}

fn entropy(counts: &HashMap<usize, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Do two labelings induce the same partition into groups?
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut map_ab = HashMap::new();
    let mut map_ba = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        if *map_ab.entry(x).or_insert(y) != y || *map_ba.entry(y).or_insert(x) != x {
            return false;
        }
    }
    true
}

/// Normalized mutual information with geometric-mean normalization,
/// I(a;b) / sqrt(H(a) * H(b)). When either partition has zero entropy the
/// ratio is undefined; by convention the result is 1 for identical set
/// partitions and 0 otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dimension(
            "nmi",
            format!("{} vs {} labels", pred.len(), truth.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::dimension("nmi", "empty partitions".into()));
    }
    let n = pred.len() as f64;
    let (ca, cb, joint) = contingency(pred, truth);
    let ha = entropy(&ca, n);
    let hb = entropy(&cb, n);
    if ha == 0.0 || hb == 0.0 {
        return Ok(if same_partition(pred, truth) { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        let pxy = c as f64 / n;
        let px = ca[&x] as f64 / n;
        let py = cb[&y] as f64 / n;
        mi += pxy * (pxy / (px * py)).ln();
    }
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}

/// Rand index: the fraction of sample pairs on which the two partitions
/// agree (placed together in both, or apart in both).
pub fn rand_index(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::dimension(
            "rand_index",
            format!("{} vs {} labels", pred.len(), truth.len()),
        ));
    }
    let n = pred.len();
    if n < 2 {
        return Err(Error::dimension("rand_index", "needs at least 2 samples".into()));
    }
    // Pair agreement via contingency counts: sum C(n_ij,2) etc.
    let (ca, cb, joint) = contingency(pred, truth);
    let c2 = |v: usize| (v * v.saturating_sub(1) / 2) as f64;
    let sum_joint: f64 = joint.values().map(|&v| c2(v)).sum();
    let sum_a: f64 = ca.values().map(|&v| c2(v)).sum();
    let sum_b: f64 = cb.values().map(|&v| c2(v)).sum();
    let total = c2(n);
    let together_both = sum_joint;
    let apart_both = total - sum_a - sum_b + sum_joint;
    Ok((together_both + apart_both) / total)
}
