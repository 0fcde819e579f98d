//! Dense matrices, norms, the thin SVD and the structured sparse PCA objective.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{check_non_negative, Error, Result};
use crate::float::{frexp, hypot, scalbn, sqrt};

/// Dense `rows x cols` matrix of `f64`, stored row-major.
///
/// Arithmetic helpers panic on shape mismatch, like slice indexing does.
/// Module-level operations validate shapes and return [`Error`] instead.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::eye(n, n)
    }

    /// `rows x cols` matrix with ones on the main diagonal.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong counts and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    op: "Matrix::from_rows",
                    expected: format!("{cols} columns"),
                    found: format!("{} columns in row {i}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(rows: usize, cols: usize, values: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, v) in values.iter().enumerate().take(rows.min(cols)) {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major entries.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn tr_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.rows, rhs.rows,
            "tr_matmul: ({}x{})ᵀ * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let b_row = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * rhsᵀ`.
    pub fn matmul_tr(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.cols,
            "matmul_tr: {}x{} * ({}x{})ᵀ",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        Matrix::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)))
    }

    /// `self * selfᵀ`, symmetric by construction.
    pub fn gram(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two equally shaped matrices.
    pub fn zip_map(&self, other: &Matrix, mut f: impl FnMut(f64, f64) -> f64) -> Matrix {
        self.assert_same_shape(other, "zip_map");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    /// Rows `indices` of `self`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Subtracts each row's mean from that row (per-feature centering for a
    /// features-by-samples matrix).
    pub fn center_rows(&self) -> Matrix {
        let mut out = self.clone();
        if self.cols == 0 {
            return out;
        }
        for i in 0..self.rows {
            let row = out.row_mut(i);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 })
            })
    }

    /// `‖XᵀX − I‖_F`, the distance of the columns from orthonormality.
    pub fn orthogonality_error(&self) -> f64 {
        let xtx = self.tr_matmul(self);
        norm_fro(&xtx.sub(&Matrix::identity(self.cols)))
    }

    fn assert_same_shape(&self, other: &Matrix, op: &str) {
        assert_eq!(
            self.shape(),
            other.shape(),
            "{op}: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(v: &[f64]) -> f64 {
    sqrt(dot(v, v))
}

pub(crate) fn shape_error(op: &'static str, expected: &str, found: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        op,
        expected: expected.into(),
        found: format!("{}x{}", found.0, found.1),
    }
}

pub fn norm_fro(x: &Matrix) -> f64 {
    norm2(x.as_slice())
}

/// Sum of absolute values of all entries.
pub fn norm_l1(x: &Matrix) -> f64 {
    x.as_slice().iter().map(|v| v.abs()).sum()
}

/// Sum over rows of the row's Euclidean norm.
pub fn norm_l21(x: &Matrix) -> f64 {
    (0..x.rows()).map(|i| norm2(x.row(i))).sum()
}

/// `½‖A − XXᵀA‖²_F + λ‖X‖_{2,1} + μ‖X‖_1` for data `a` (d×n) and
/// projection `x` (d×m). With `lambda = mu = 0` this is the PCA
/// reconstruction error.
pub fn objective(a: &Matrix, x: &Matrix, lambda: f64, mu: f64) -> Result<f64> {
    if a.rows() != x.rows() {
        return Err(Error::DimensionMismatch {
            op: "objective",
            expected: format!("projection with {} rows", a.rows()),
            found: format!("{}x{}", x.rows(), x.cols()),
        });
    }
    check_non_negative("objective", "lambda", lambda)?;
    check_non_negative("objective", "mu", mu)?;
    let residual = a.sub(&x.matmul(&x.tr_matmul(a)));
    let fit = 0.5 * residual.as_slice().iter().map(|v| v * v).sum::<f64>();
    Ok(fit + lambda * norm_l21(x) + mu * norm_l1(x))
}

/// Thin singular value decomposition `B = U·diag(σ)·Vᵀ` of a tall matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinSvd {
    /// d×m, orthonormal columns.
    pub u: Matrix,
    /// Non-increasing, non-negative.
    pub sigma: Vec<f64>,
    /// m×m, orthonormal rows.
    pub vt: Matrix,
}

impl ThinSvd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.sigma) {
                *v *= s;
            }
        }
        us.matmul(&self.vt)
    }
}

const SVD_MAX_SWEEPS: usize = 80;

/// Thin SVD of a `d x m` matrix with `d >= m` by one-sided (Hestenes) Jacobi.
///
/// Sign convention: in every column of `u` the entry of largest magnitude is
/// non-negative, ties going to the lowest row. Columns of `u` belonging to
/// numerically zero singular values are completed deterministically from the
/// standard basis.
pub fn thin_svd(b: &Matrix) -> Result<ThinSvd> {
    let (d, m) = b.shape();
    if d < m {
        return Err(Error::DimensionMismatch {
            op: "thin_svd",
            expected: "rows >= cols".into(),
            found: format!("{d}x{m}"),
        });
    }
    if !b.is_finite() {
        let pos = b
            .as_slice()
            .iter()
            .position(|v| !v.is_finite())
            .unwrap_or(0);
        return Err(Error::NonFinite {
            row: pos / m.max(1),
            col: pos % m.max(1),
        });
    }

    // Scale by a power of two so the largest entry is in [0.5, 1): squared
    // column norms cannot overflow and the rotations are unchanged.
    let max_abs = b.as_slice().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let exponent = if max_abs > 0.0 { frexp(max_abs).1 } else { 0 };

    // Work column-major: w[j] is column j of B, v[j] column j of V.
    let mut w: Vec<Vec<f64>> = (0..m)
        .map(|j| b.col(j).into_iter().map(|x| scalbn(x, -exponent)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|j| (0..m).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = m < 2;
    for _ in 0..SVD_MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..m - 1 {
            for q in p + 1..m {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + hypot(1.0, zeta));
                let c = 1.0 / hypot(1.0, t);
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::SvdNoConvergence { rows: d, cols: m });
    }

    let norms: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort keeps index order among equal singular values.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let sigma_max = order.first().map_or(0.0, |&i| norms[i]);
    let cutoff = sigma_max * f64::EPSILON * d as f64;

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut sigma = Vec::with_capacity(m);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut deficient = Vec::new();
    for &j in &order {
        let s = norms[j];
        if s > cutoff && s > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / s).collect());
            sigma.push(scalbn(s, exponent));
        } else {
            deficient.push(u_cols.len());
            u_cols.push(vec![0.0; d]);
            sigma.push(0.0);
        }
        v_cols.push(v[j].clone());
    }
    complete_basis(&mut u_cols, &deficient);

    for (uc, vc) in u_cols.iter_mut().zip(v_cols.iter_mut()) {
        let mut lead = 0;
        for (i, x) in uc.iter().enumerate() {
            if x.abs() > uc[lead].abs() {
                lead = i;
            }
        }
        if uc[lead] < 0.0 {
            uc.iter_mut().for_each(|x| *x = -*x);
            vc.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let u = Matrix::from_fn(d, m, |i, j| u_cols[j][i]);
    let vt = Matrix::from_fn(m, m, |i, j| v_cols[i][j]);
    Ok(ThinSvd { u, sigma, vt })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (cp, cq) = (&mut head[p], &mut tail[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Fills the zero columns listed in `slots` with unit vectors orthogonal to
/// every other column, trying standard basis vectors in order.
fn complete_basis(cols: &mut [Vec<f64>], slots: &[usize]) {
    if slots.is_empty() {
        return;
    }
    let d = cols[0].len();
    let mut candidate = 0;
    for &slot in slots {
        while candidate < d {
            let mut e = vec![0.0; d];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of Gram-Schmidt against the filled columns.
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || (slots.contains(&k) && norm2(c) == 0.0) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let n = norm2(&e);
            if n > 0.5 {
                cols[slot] = e.into_iter().map(|x| x / n).collect();
                break;
            }
        }
    }
}

/// Top `m` left singular vectors of `a` (d×n) and all singular values,
/// non-increasing. Uses the SVD of whichever of `a`, `aᵀ` is tall.
pub fn left_singular_vectors(a: &Matrix, m: usize) -> Result<(Matrix, Vec<f64>)> {
    let (d, n) = a.shape();
    if m == 0 || m > d.min(n) {
        return Err(Error::OutOfRange {
            op: "left_singular_vectors",
            what: "m",
            value: m,
            min: 1,
            max: d.min(n),
        });
    }
    let (full, sigma) = if d >= n {
        let svd = thin_svd(a)?;
        (svd.u, svd.sigma)
    } else {
        let svd = thin_svd(&a.transpose())?;
        (svd.vt.transpose(), svd.sigma)
    };
    let mut x = Matrix::from_fn(d, m, |i, j| full[(i, j)]);
    for j in 0..m {
        let mut lead = 0;
        for i in 0..d {
            if x[(i, j)].abs() > x[(lead, j)].abs() {
                lead = i;
            }
        }
        if x[(lead, j)] < 0.0 {
            for i in 0..d {
                x[(i, j)] = -x[(i, j)];
            }
        }
    }
    Ok((x, sigma))
}
