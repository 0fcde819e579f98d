//! Unsupervised feature selection evaluation: rank features by the row norms
//! of a projection, keep the top `h`, cluster with k-means and score the
//! clustering against known categories.

mod kmeans;
mod metrics;

pub use kmeans::{kmeans, kmeans_detailed, Clustering, MAX_SWEEPS};
pub use metrics::{acc, contingency, max_weight_assignment, nmi};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::float::sqrt;
use crate::linalg::{norm2, Matrix};

/// Category index per sample, each in `0..c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    assignments: Vec<usize>,
    c: usize,
}

impl LabelVector {
    pub fn new(assignments: Vec<usize>, c: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::Invalid("label vector is empty".into()));
        }
        if let Some(bad) = assignments.iter().find(|&&l| l >= c) {
            return Err(Error::OutOfRange {
                op: "LabelVector",
                what: "label",
                value: *bad,
                min: 0,
                max: c.saturating_sub(1),
            });
        }
        Ok(Self { assignments, c })
    }

    /// `c` is one more than the largest label.
    pub fn from_assignments(assignments: Vec<usize>) -> Result<Self> {
        let c = assignments.iter().max().map_or(0, |m| m + 1);
        Self::new(assignments, c)
    }

    /// Maps arbitrary integer labels onto `0..c` in ascending order of value.
    pub fn from_raw(raw: &[i64]) -> Result<Self> {
        let mut values: Vec<i64> = raw.to_vec();
        values.sort_unstable();
        values.dedup();
        let assignments = raw
            .iter()
            .map(|v| values.binary_search(v).expect("value present"))
            .collect();
        Self::new(assignments, values.len())
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Number of categories `c`.
    pub fn categories(&self) -> usize {
        self.c
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Row ℓ2 norms of the projection, one score per feature.
pub fn feature_scores(x: &Matrix) -> Vec<f64> {
    (0..x.rows()).map(|i| norm2(x.row(i))).collect()
}

/// Indices of the `h` highest scores in descending order; equal scores keep
/// ascending index order.
pub fn select_features(scores: &[f64], h: usize) -> Result<Vec<usize>> {
    if h > scores.len() {
        return Err(Error::OutOfRange {
            op: "select_features",
            what: "h",
            value: h,
            min: 0,
            max: scores.len(),
        });
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx.truncate(h);
    Ok(idx)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, sqrt(var))
}

/// Clustering quality per selected-feature count, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub feature_counts: Vec<usize>,
    pub acc_mean: Vec<f64>,
    pub acc_std: Vec<f64>,
    pub nmi_mean: Vec<f64>,
    pub nmi_std: Vec<f64>,
    pub repeats: usize,
}

impl EvalReport {
    fn argmax(values: &[f64]) -> usize {
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if *v > values[best] {
                best = i;
            }
        }
        best
    }

    /// Feature count with the highest mean ACC (first on ties).
    pub fn best_h_acc(&self) -> usize {
        self.feature_counts[Self::argmax(&self.acc_mean)]
    }

    /// Feature count with the highest mean NMI (first on ties).
    pub fn best_h_nmi(&self) -> usize {
        self.feature_counts[Self::argmax(&self.nmi_mean)]
    }

    /// `(mean, std)` of ACC at its best feature count.
    pub fn best_acc(&self) -> (f64, f64) {
        let i = Self::argmax(&self.acc_mean);
        (self.acc_mean[i], self.acc_std[i])
    }

    pub fn best_nmi(&self) -> (f64, f64) {
        let i = Self::argmax(&self.nmi_mean);
        (self.nmi_mean[i], self.nmi_std[i])
    }
}

/// Feature counts 10, 20, …, 100.
pub fn default_feature_counts() -> Vec<usize> {
    (1..=10).map(|k| k * 10).collect()
}

pub const DEFAULT_REPEATS: usize = 50;

/// For each `h`: keep the `h` top-scoring rows of `a`, run k-means with
/// seeds `seed..seed+repeats` and `c = truth.categories()`, and summarize
/// ACC and NMI as percent mean ± population std.
pub fn evaluate(
    a: &Matrix,
    truth: &LabelVector,
    x: &Matrix,
    feature_counts: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    if a.rows() != x.rows() || a.cols() != truth.len() {
        return Err(Error::DimensionMismatch {
            op: "evaluate",
            expected: alloc::format!(
                "data {}x{} with {} rows in X",
                a.rows(),
                truth.len(),
                a.rows()
            ),
            found: alloc::format!(
                "data {}x{}, X {}x{}",
                a.rows(),
                a.cols(),
                x.rows(),
                x.cols()
            ),
        });
    }
    if repeats == 0 || feature_counts.is_empty() {
        return Err(Error::Invalid(
            "evaluate needs at least one repeat and one feature count".into(),
        ));
    }
    let scores = feature_scores(x);
    let mut report = EvalReport {
        feature_counts: feature_counts.to_vec(),
        acc_mean: Vec::new(),
        acc_std: Vec::new(),
        nmi_mean: Vec::new(),
        nmi_std: Vec::new(),
        repeats,
    };
    for &h in feature_counts {
        let selected = select_features(&scores, h)?;
        let sub = a.select_rows(&selected);
        let mut accs = Vec::with_capacity(repeats);
        let mut nmis = Vec::with_capacity(repeats);
        for r in 0..repeats as u64 {
            let pred = kmeans(&sub, truth.categories(), seed.wrapping_add(r))?;
            accs.push(100.0 * acc(truth, &pred)?);
            nmis.push(100.0 * nmi(truth, &pred)?);
        }
        let (am, asd) = mean_std(&accs);
        let (nm, nsd) = mean_std(&nmis);
        report.acc_mean.push(am);
        report.acc_std.push(asd);
        report.nmi_mean.push(nm);
        report.nmi_std.push(nsd);
    }
    Ok(report)
}
