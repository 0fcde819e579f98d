//! Closed-form proximal maps used by the splitting iteration.

use crate::error::{check_non_negative, Result};
use crate::linalg::{norm2, shape_error, thin_svd, Matrix};

/// Elementwise `sign(b)·max(|b| − tau, 0)`, the minimizer of
/// `tau‖Z‖₁ + ½‖Z − b‖²_F`.
pub fn soft_threshold(b: &Matrix, tau: f64) -> Result<Matrix> {
    check_non_negative("soft_threshold", "tau", tau)?;
    Ok(b.map(|v| shrink(v, tau)))
}

#[inline]
fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Row-wise shrinkage `r·max(‖r‖₂ − tau, 0)/‖r‖₂`, the minimizer of
/// `tau‖Y‖_{2,1} + ½‖Y − b‖²_F`. Rows with norm at most `tau` (including
/// zero rows) map to zero.
pub fn group_soft_threshold(b: &Matrix, tau: f64) -> Result<Matrix> {
    check_non_negative("group_soft_threshold", "tau", tau)?;
    let mut out = b.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let norm = norm2(row);
        if norm <= tau {
            row.iter_mut().for_each(|v| *v = 0.0);
        } else if tau > 0.0 {
            let factor = (norm - tau) / norm;
            row.iter_mut().for_each(|v| *v *= factor);
        }
    }
    Ok(out)
}

/// Nearest matrix with orthonormal columns: `U·Vᵀ` from the thin SVD of `b`
/// (the orthogonal Procrustes solution).
pub fn stiefel_project(b: &Matrix) -> Result<Matrix> {
    if b.rows() < b.cols() {
        return Err(shape_error("stiefel_project", "rows >= cols", b.shape()));
    }
    let svd = thin_svd(b)?;
    Ok(svd.u.matmul(&svd.vt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm_fro, norm_l1, norm_l21};
    use crate::Error;
    use proptest::prelude::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = SmallRng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 4.0 - 2.0)
    }

    fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n)
            .map(|k| lo + k as f64 * step)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    }

    #[test]
    fn soft_threshold_trivial_cases() {
        let z = Matrix::zeros(2, 3);
        assert_eq!(soft_threshold(&z, 0.5).unwrap(), z);
        let b = random(3, 2, 1);
        assert_eq!(soft_threshold(&b, 0.0).unwrap(), b);
    }

    #[test]
    fn soft_threshold_scalar_grid_oracle() {
        for (b, want) in [(3.0, 2.0), (-3.0, -2.0)] {
            let bm = Matrix::from_vec(1, 1, alloc::vec![b]).unwrap();
            let got = soft_threshold(&bm, 1.0).unwrap()[(0, 0)];
            assert_eq!(got, want);
            let oracle = grid_argmin(|z| z.abs() + 0.5 * (z - b).powi(2), -5.0, 5.0, 1e-4);
            assert!((got - oracle).abs() < 1e-4);
        }
    }

    #[test]
    fn group_soft_threshold_shrinks_row() {
        let b = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let y = group_soft_threshold(&b, 2.0).unwrap();
        assert!((y[(0, 0)] - 1.8).abs() < 1e-15);
        assert!((y[(0, 1)] - 2.4).abs() < 1e-15);

        // 2-D oracle: the minimizer lies on the ray through b, so search the
        // radius on a grid and compare against an off-ray grid as well.
        let f = |y0: f64, y1: f64| {
            2.0 * (y0 * y0 + y1 * y1).sqrt() + 0.5 * ((y0 - 3.0).powi(2) + (y1 - 4.0).powi(2))
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=400 {
            for j in 0..=400 {
                let (y0, y1) = (i as f64 * 0.01, j as f64 * 0.01);
                let v = f(y0, y1);
                if v < best.0 {
                    best = (v, y0, y1);
                }
            }
        }
        assert!((best.1 - 1.8).abs() < 0.011 && (best.2 - 2.4).abs() < 0.011);
        assert!(f(y[(0, 0)], y[(0, 1)]) <= best.0 + 1e-12);
    }

    #[test]
    fn group_soft_threshold_full_shrinkage_and_identity() {
        let b = Matrix::from_rows(&[[0.3, 0.4], [3.0, 4.0], [0.0, 0.0]]).unwrap();
        let y = group_soft_threshold(&b, 0.5).unwrap();
        assert_eq!(y.row(0), &[0.0, 0.0]);
        assert_eq!(y.row(2), &[0.0, 0.0]);
        assert!(y.row(1)[0] > 0.0);
        let r = random(4, 3, 8);
        assert_eq!(group_soft_threshold(&r, 0.0).unwrap(), r);
    }

    #[test]
    fn negative_tau_rejected() {
        let b = Matrix::zeros(1, 1);
        assert!(matches!(
            soft_threshold(&b, -0.1),
            Err(Error::InvalidParameter { name: "tau", .. })
        ));
        assert!(group_soft_threshold(&b, -1.0).is_err());
    }

    #[test]
    fn stiefel_project_fixed_point_and_rotation() {
        let q = stiefel_project(&random(5, 3, 4)).unwrap();
        let again = stiefel_project(&q).unwrap();
        assert!(norm_fro(&again.sub(&q)) < 1e-10);

        let b = Matrix::from_rows(&[[0.0, -2.0], [2.0, 0.0]]).unwrap();
        let x = stiefel_project(&b).unwrap();
        let want = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]).unwrap();
        assert!(norm_fro(&x.sub(&want)) < 1e-12);
    }

    /// Orthonormal 6x2 frames parameterized by the first two columns of a
    /// product of Givens rotations; coarse grid then coordinate refinement.
    fn procrustes_search(b: &Matrix) -> Matrix {
        let pairs: alloc::vec::Vec<(usize, usize)> = (0..2)
            .flat_map(|i| (i + 1..6).map(move |j| (i, j)))
            .collect();
        let frame = |angles: &[f64]| {
            let mut q = Matrix::identity(6);
            for (&(i, j), &t) in pairs.iter().zip(angles) {
                let (s, c) = t.sin_cos();
                let mut g = Matrix::identity(6);
                g[(i, i)] = c;
                g[(j, j)] = c;
                g[(i, j)] = -s;
                g[(j, i)] = s;
                q = q.matmul(&g);
            }
            Matrix::from_fn(6, 2, |r, c| q[(r, c)])
        };
        let cost = |angles: &[f64]| norm_fro(&frame(angles).sub(b));
        let mut best = alloc::vec![0.0; pairs.len()];
        let mut best_cost = cost(&best);
        let mut rng = SmallRng::seed_from_u64(99);
        for _ in 0..20_000 {
            let cand: alloc::vec::Vec<f64> = (0..pairs.len())
                .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * core::f64::consts::PI)
                .collect();
            let c = cost(&cand);
            if c < best_cost {
                best = cand;
                best_cost = c;
            }
        }
        let mut step = 0.1;
        while step > 1e-7 {
            let mut improved = false;
            for k in 0..best.len() {
                for dir in [-1.0, 1.0] {
                    let mut cand = best.clone();
                    cand[k] += dir * step;
                    let c = cost(&cand);
                    if c < best_cost {
                        best = cand;
                        best_cost = c;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        frame(&best)
    }

    #[test]
    fn stiefel_project_matches_search_oracle() {
        let b = random(6, 2, 17);
        let x = stiefel_project(&b).unwrap();
        assert!(x.orthogonality_error() < 1e-10);
        let oracle = procrustes_search(&b);
        assert!(norm_fro(&x.sub(&oracle)) < 1e-3);
    }

    fn matrix_strategy() -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-3.0f64..3.0, 12).prop_map(|v| Matrix::from_vec(4, 3, v).unwrap())
    }

    proptest! {
        #[test]
        fn thresholds_are_non_expansive(b1 in matrix_strategy(), b2 in matrix_strategy(), tau in 0.0f64..2.0) {
            let d = norm_fro(&b1.sub(&b2));
            let s = norm_fro(&soft_threshold(&b1, tau).unwrap().sub(&soft_threshold(&b2, tau).unwrap()));
            let g = norm_fro(&group_soft_threshold(&b1, tau).unwrap().sub(&group_soft_threshold(&b2, tau).unwrap()));
            prop_assert!(s <= d + 1e-12);
            prop_assert!(g <= d + 1e-12);
        }

        #[test]
        fn prox_beats_perturbations(b in matrix_strategy(), tau in 0.0f64..2.0, seed in 0u64..1000) {
            let z = soft_threshold(&b, tau).unwrap();
            let y = group_soft_threshold(&b, tau).unwrap();
            let fz = |c: &Matrix| tau * norm_l1(c) + 0.5 * norm_fro(&c.sub(&b)).powi(2);
            let fy = |c: &Matrix| tau * norm_l21(c) + 0.5 * norm_fro(&c.sub(&b)).powi(2);
            let mut rng = SmallRng::seed_from_u64(seed);
            for _ in 0..200 {
                let scale = 10f64.powi(-(rng.random_range(0..6)));
                let p = Matrix::from_fn(4, 3, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * scale);
                prop_assert!(fz(&z.add(&p)) - fz(&z) >= -1e-12);
                prop_assert!(fy(&y.add(&p)) - fy(&y) >= -1e-12);
            }
        }

        #[test]
        fn group_threshold_preserves_direction(b in matrix_strategy(), tau in 0.0f64..2.0) {
            let y = group_soft_threshold(&b, tau).unwrap();
            for i in 0..4 {
                let (r, o) = (b.row(i), y.row(i));
                let k = if norm2(r) > 0.0 { norm2(o) / norm2(r) } else { 0.0 };
                prop_assert!(k >= 0.0);
                for (x, v) in r.iter().zip(o) {
                    prop_assert!((v - k * x).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn stiefel_projection_idempotent(b in matrix_strategy()) {
            let p = stiefel_project(&b).unwrap();
            prop_assert!(p.orthogonality_error() < 1e-10);
            let pp = stiefel_project(&p).unwrap();
            prop_assert!(norm_fro(&pp.sub(&p)) < 1e-10);
        }
    }
}
