use alloc::vec;
use alloc::vec::Vec;

use super::LabelVector;
use crate::error::{Error, Result};
use crate::float::{ln, sqrt};

fn check_lengths(truth: &LabelVector, pred: &LabelVector) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            op: "clustering metric",
            expected: alloc::format!("{} labels", truth.len()),
            found: alloc::format!("{} labels", pred.len()),
        });
    }
    Ok(())
}

/// Counts `table[t][p]` of samples with true label `t` and predicted `p`.
pub fn contingency(truth: &LabelVector, pred: &LabelVector) -> Result<Vec<Vec<usize>>> {
    check_lengths(truth, pred)?;
    let mut table = vec![vec![0usize; pred.categories()]; truth.categories()];
    for (&t, &p) in truth.assignments().iter().zip(pred.assignments()) {
        table[t][p] += 1;
    }
    Ok(table)
}

/// Clustering accuracy: the best fraction of agreeing samples over one-to-one
/// maps from predicted clusters to true classes.
pub fn acc(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    let table = contingency(truth, pred)?;
    let size = truth.categories().max(pred.categories());
    let mut weights = vec![vec![0i64; size]; size];
    for (t, row) in table.iter().enumerate() {
        for (p, &count) in row.iter().enumerate() {
            weights[t][p] = count as i64;
        }
    }
    let matched = max_weight_assignment(&weights);
    Ok(matched as f64 / truth.len() as f64)
}

/// Maximum total weight of a perfect matching in a square matrix, by the
/// O(n³) Hungarian method with row/column potentials.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> i64 {
    let n = weights.len();
    if n == 0 {
        return 0;
    }
    let max_w = weights.iter().flatten().copied().max().unwrap_or(0);
    // Minimize cost = max_w − weight; 1-based indexing with a virtual column 0.
    let cost = |i: usize, j: usize| max_w - weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| weights[owner[j] - 1][j - 1]).sum()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&k| k > 0)
        .map(|k| {
            let p = k as f64 / n;
            -p * ln(p)
        })
        .sum()
}

/// Normalized mutual information `I(T;P)/√(H(T)·H(P))` (natural log).
///
/// Two single-cluster partitions score 1; if exactly one side has zero
/// entropy the score is 0.
pub fn nmi(truth: &LabelVector, pred: &LabelVector) -> Result<f64> {
    let table = contingency(truth, pred)?;
    let n = truth.len() as f64;
    let row_sums: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..pred.categories())
        .map(|p| table.iter().map(|r| r[p]).sum())
        .collect();
    let ht = entropy(row_sums.iter().copied(), n);
    let hp = entropy(col_sums.iter().copied(), n);
    if ht == 0.0 && hp == 0.0 {
        return Ok(1.0);
    }
    if ht == 0.0 || hp == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (t, row) in table.iter().enumerate() {
        for (p, &k) in row.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let joint = k as f64 / n;
            mi += joint * ln(joint * n * n / (row_sums[t] as f64 * col_sums[p] as f64));
        }
    }
    Ok((mi / sqrt(ht * hp)).clamp(0.0, 1.0))
}
