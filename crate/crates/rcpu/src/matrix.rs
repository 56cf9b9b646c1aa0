//! Dense row-major matrix with the handful of primitives the pruning
//! pipeline needs: products, transpose, Frobenius norm, row/column
//! statistics, gathers, and a pivoted-LU determinant.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense real matrix, row-major, at least 1x1.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    /// Builds a matrix from a row-major buffer.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("dims", format!("{rows}x{cols}: both must be >= 1")));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(
                "data",
                format!("expected {} entries for {rows}x{cols}, got {}", rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dims must be >= 1");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds from nested row slices; all rows must share a length.
    pub fn from_rows(rows: &[&[S]]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::invalid("rows", "need at least one non-empty row"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::invalid("rows", "ragged rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Column vector from a slice.
    pub fn column(values: &[S]) -> Result<Self> {
        Matrix::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| *v == S::zero())
    }

    /// Matrix product; `self.cols` must equal `rhs.rows`.
    pub fn matmul(&self, rhs: &Matrix<S>) -> Result<Matrix<S>> {
        if self.cols != rhs.rows {
            return Err(Error::shape(
                "matmul",
                format!("{}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            ));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![S::zero(); m * n];
        // i-k-j order keeps both operands streaming in row-major layout.
        for i in 0..m {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out[i * n..(i + 1) * n];
            for (kk, &a) in arow.iter().enumerate() {
                let brow = &rhs.data[kk * n..(kk + 1) * n];
                for (o, &b) in orow.iter_mut().zip(brow.iter()) {
                    *o = *o + a * b;
                }
            }
        }
        let out = Matrix {
            rows: m,
            cols: n,
            data: out,
        };
        if !out.is_finite() {
            return Err(Error::NonFinite { op: "matmul" });
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix<S> {
        let mut out = vec![S::zero(); self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    pub fn add(&self, rhs: &Matrix<S>) -> Result<Matrix<S>> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix<S>) -> Result<Matrix<S>> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Matrix<S>, op: &'static str, f: impl Fn(S, S) -> S) -> Result<Matrix<S>> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape(
                op,
                format!("{}x{} vs {}x{}", self.rows, self.cols, rhs.rows, rhs.cols),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: S) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Matrix<S> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Frobenius norm: sqrt of the sum of squared entries.
    pub fn frob_norm(&self) -> S {
        self.data.iter().map(|&v| v * v).sum::<S>().sqrt()
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
    }

    /// Euclidean norm of each row.
    pub fn row_norms(&self) -> Vec<S> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|&v| v * v).sum::<S>().sqrt())
            .collect()
    }

    /// Euclidean norm of each column.
    pub fn col_norms(&self) -> Vec<S> {
        let mut acc = vec![S::zero(); self.cols];
        for i in 0..self.rows {
            for (a, &v) in acc.iter_mut().zip(self.row(i).iter()) {
                *a = *a + v * v;
            }
        }
        acc.into_iter().map(|v| v.sqrt()).collect()
    }

    pub fn row_means(&self) -> Vec<S> {
        let n = S::from_f64_lossy(self.cols as f64);
        (0..self.rows)
            .map(|i| self.row(i).iter().copied().sum::<S>() / n)
            .collect()
    }

    /// Population variance of each row (divide by N).
    pub fn row_variances(&self) -> Vec<S> {
        let n = S::from_f64_lossy(self.cols as f64);
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mean = row.iter().copied().sum::<S>() / n;
                row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n
            })
            .collect()
    }

    /// Sample variance of each row (divide by N-1); zero for a single column.
    pub fn row_variances_sample(&self) -> Vec<S> {
        if self.cols < 2 {
            return vec![S::zero(); self.rows];
        }
        let n = S::from_f64_lossy(self.cols as f64);
        let n1 = S::from_f64_lossy((self.cols - 1) as f64);
        (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let mean = row.iter().copied().sum::<S>() / n;
                row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n1
            })
            .collect()
    }

    /// New matrix holding the selected columns, in the given order.
    pub fn gather_cols(&self, indices: &[usize]) -> Result<Matrix<S>> {
        if indices.is_empty() {
            return Err(Error::invalid("indices", "empty column selection"));
        }
        for &j in indices {
            if j >= self.cols {
                return Err(Error::invalid(
                    "indices",
                    format!("column {j} out of range for {} columns", self.cols),
                ));
            }
        }
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for i in 0..self.rows {
            let row = self.row(i);
            for &j in indices {
                data.push(row[j]);
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: indices.len(),
            data,
        })
    }

    /// New matrix holding the selected rows, in the given order.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Matrix<S>> {
        if indices.is_empty() {
            return Err(Error::invalid("indices", "empty row selection"));
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::invalid(
                    "indices",
                    format!("row {i} out of range for {} rows", self.rows),
                ));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// Adds `bias[i]` to every entry of row i.
    pub fn add_col_broadcast(&self, bias: &[S]) -> Result<Matrix<S>> {
        if bias.len() != self.rows {
            return Err(Error::shape(
                "add_col_broadcast",
                format!("bias length {} vs {} rows", bias.len(), self.rows),
            ));
        }
        let mut out = self.clone();
        for (row, &b) in out.data.chunks_mut(self.cols).zip(bias.iter()) {
            for v in row {
                *v = *v + b;
            }
        }
        Ok(out)
    }

    /// Determinant via LU with partial pivoting. Square matrices only.
    pub fn det(&self) -> Result<S> {
        if self.rows != self.cols {
            return Err(Error::shape(
                "det",
                format!("{}x{} is not square", self.rows, self.cols),
            ));
        }
        let n = self.rows;
        let mut lu = self.data.clone();
        let mut det = S::one();
        for col in 0..n {
            let mut pivot = col;
            let mut best = lu[col * n + col].abs();
            for r in (col + 1)..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best == S::zero() {
                return Ok(S::zero());
            }
            if pivot != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot * n + j);
                }
                det = -det;
            }
            let d = lu[col * n + col];
            det = det * d;
            for r in (col + 1)..n {
                let factor = lu[r * n + col] / d;
                lu[r * n + col] = factor;
                for j in (col + 1)..n {
                    lu[r * n + j] = lu[r * n + j] - factor * lu[col * n + j];
                }
            }
        }
        Ok(det)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m64(rows: usize, cols: usize, v: &[f64]) -> Matrix<f64> {
        Matrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn construction_rejects_degenerate_shapes() {
        assert!(Matrix::<f64>::from_vec(0, 3, vec![]).is_err());
        assert!(Matrix::<f64>::from_vec(3, 0, vec![]).is_err());
        assert!(Matrix::<f64>::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_identity_returns_rhs() {
        let b = m64(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let prod = Matrix::identity(2).matmul(&b).unwrap();
        assert_eq!(prod, b);
    }

    #[test]
    fn matmul_hand_checked_2x2() {
        let a = m64(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = m64(2, 1, &[1.0, 1.0]);
        let prod = a.matmul(&b).unwrap();
        assert_eq!(prod.data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = crate::rng::SplitMix64::new(19);
        let a = Matrix::from_fn(5, 7, |_, _| rng.normal());
        let b = Matrix::from_fn(7, 3, |_, _| rng.normal());
        let fast = a.matmul(&b).unwrap();
        let slow = crate::oracle::naive_matmul(&a, &b).unwrap();
        for (x, y) in fast.data().iter().zip(slow.data().iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_shape_mismatch() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            a.matmul(&b),
            Err(Error::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn matmul_overflow_reports_non_finite() {
        let a = m64(1, 1, &[f64::MAX]);
        let b = m64(1, 1, &[2.0]);
        assert!(matches!(a.matmul(&b), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn frob_norm_of_identity() {
        let n: f64 = Matrix::<f64>::identity(3).frob_norm();
        assert!((n - 3.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn row_variance_population_form() {
        // Constant row has zero variance; [1,2,3] has population variance 2/3.
        let m = m64(2, 3, &[5.0, 5.0, 5.0, 1.0, 2.0, 3.0]);
        let v = m.row_variances();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn row_variance_sample_form() {
        let m = m64(1, 3, &[1.0, 2.0, 3.0]);
        let v = m.row_variances_sample();
        assert!((v[0] - 1.0).abs() < 1e-15);
        let single = m64(1, 1, &[4.0]);
        assert_eq!(single.row_variances_sample()[0], 0.0);
    }

    #[test]
    fn norms_match_hand_values() {
        let m = m64(2, 2, &[3.0, 0.0, 4.0, 0.0]);
        assert_eq!(m.row_norms(), vec![3.0, 4.0]);
        assert_eq!(m.col_norms(), vec![5.0, 0.0]);
    }

    #[test]
    fn gather_roundtrip_and_errors() {
        let m = m64(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let picked = m.gather_cols(&[2, 0]).unwrap();
        assert_eq!(picked.data(), &[3.0, 1.0, 6.0, 4.0]);
        assert!(m.gather_cols(&[]).is_err());
        assert!(m.gather_cols(&[3]).is_err());
        let rows = m.gather_rows(&[1]).unwrap();
        assert_eq!(rows.data(), &[4.0, 5.0, 6.0]);
        assert!(m.gather_rows(&[2]).is_err());
    }

    #[test]
    fn det_hand_values() {
        let m = m64(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((m.det().unwrap() + 2.0).abs() < 1e-14);
        let singular = m64(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(singular.det().unwrap(), 0.0);
        assert!(Matrix::<f64>::zeros(2, 3).det().is_err());
    }

    #[test]
    fn transpose_involution() {
        let m = m64(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn generic_scalar_f32_path() {
        let a = Matrix::<f32>::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = a.matmul(&Matrix::identity(2)).unwrap();
        assert_eq!(a, b);
        assert!((a.frob_norm() - 30.0f32.sqrt()).abs() < 1e-6);
    }
}
