use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::LabelVector;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAX_SWEEPS: usize = 300;

/// Result of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub labels: LabelVector,
    /// Within-cluster sum of squares after each Lloyd sweep.
    pub wcss: Vec<f64>,
    pub sweeps: usize,
}

/// Lloyd's algorithm with k-means++ seeding on the columns of `data`
/// (features by samples).
pub fn kmeans(data: &Matrix, c: usize, seed: u64) -> Result<LabelVector> {
    kmeans_detailed(data, c, seed).map(|r| r.labels)
}

/// [`kmeans`] plus the per-sweep objective.
///
/// Stops when assignments stop changing or after [`MAX_SWEEPS`] sweeps. A
/// cluster that ends a sweep empty is re-seeded with the point farthest from
/// its assigned centroid.
pub fn kmeans_detailed(data: &Matrix, c: usize, seed: u64) -> Result<Clustering> {
    let (h, n) = data.shape();
    if c == 0 || c > n {
        return Err(Error::OutOfRange {
            op: "kmeans",
            what: "clusters",
            value: c,
            min: 1,
            max: n,
        });
    }
    let points: Vec<Vec<f64>> = (0..n).map(|j| data.col(j)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(&points, c, &mut rng);

    let mut labels = vec![usize::MAX; n];
    let mut wcss = Vec::new();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut changed = false;
        for (p, label) in points.iter().zip(labels.iter_mut()) {
            let best = nearest(p, &centers).0;
            if best != *label {
                *label = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        centers = centroids(&points, &labels, c, h);
        reseed_empty(&points, &mut labels, &mut centers);
        wcss.push(within_cluster_ss(&points, &labels, &centers));
    }
    Ok(Clustering {
        labels: LabelVector::new(labels, c)?,
        wcss,
        sweeps,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest center; ties go to the lower index.
fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn seed_plus_plus(points: &[Vec<f64>], c: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < c {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if *d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `acc` just short of `target`.
            pick.unwrap_or_else(|| dist.iter().rposition(|d| *d > 0.0).unwrap_or(0))
        } else {
            // All remaining mass is on already-chosen points (duplicates).
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn centroids(points: &[Vec<f64>], labels: &[usize], c: usize, h: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; h]; c];
    let mut counts = vec![0usize; c];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
    }
    for (s, &k) in sums.iter_mut().zip(&counts) {
        if k > 0 {
            s.iter_mut().for_each(|v| *v /= k as f64);
        }
    }
    sums
}

fn reseed_empty(points: &[Vec<f64>], labels: &mut [usize], centers: &mut [Vec<f64>]) {
    loop {
        let mut counts = vec![0usize; centers.len()];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&k| k == 0) else {
            return;
        };
        // Farthest point from its own centroid, among clusters that can spare one.
        let far = (0..points.len())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (i, sq_dist(&points[i], &centers[labels[i]])))
            .fold(None::<(usize, f64)>, |best, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        let Some((i, _)) = far else {
            return;
        };
        let old = labels[i];
        labels[i] = empty;
        centers[empty] = points[i].clone();
        let h = points[i].len();
        let members: Vec<usize> = (0..points.len()).filter(|&j| labels[j] == old).collect();
        let mut mean = vec![0.0; h];
        for &j in &members {
            mean.iter_mut().zip(&points[j]).for_each(|(m, x)| *m += x);
        }
        mean.iter_mut().for_each(|m| *m /= members.len() as f64);
        centers[old] = mean;
    }
}

fn within_cluster_ss(points: &[Vec<f64>], labels: &[usize], centers: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum()
}
