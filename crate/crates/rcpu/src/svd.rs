//! Singular value decomposition and the Moore-Penrose pseudoinverse.
//!
//! The decomposition is the classic Golub-Reinsch routine: Householder
//! bidiagonalization with accumulation of both factors, then implicit-shift
//! QR on the bidiagonal. Deterministic for a fixed input, no external
//! kernels, and fast enough for the 512-wide layers the pipeline targets.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Default relative cutoff for pseudoinverse singular values.
pub const DEFAULT_RCOND: f64 = 1e-12;

const MAX_QR_ITERATIONS: usize = 60;

/// Thin SVD `m = u * diag(sigma) * vt`.
///
/// `u` has orthonormal columns, `vt` orthonormal rows, and `sigma` is sorted
/// descending. For square input both factors are square orthogonal matrices.
#[derive(Debug, Clone)]
pub struct SvdResult<S> {
    pub u: Matrix<S>,
    pub sigma: Vec<S>,
    pub vt: Matrix<S>,
}

impl<S: Scalar> SvdResult<S> {
    pub fn sigma_max(&self) -> S {
        self.sigma.first().copied().unwrap_or_else(S::zero)
    }

    /// Reconstructs `u * diag(sigma) * vt`.
    pub fn reconstruct(&self) -> Result<Matrix<S>> {
        let mut scaled = self.vt.clone();
        for (i, &s) in self.sigma.iter().enumerate() {
            for j in 0..scaled.cols() {
                scaled.set(i, j, scaled.get(i, j) * s);
            }
        }
        self.u.matmul(&scaled)
    }
}

#[inline]
fn pythag<S: Scalar>(a: S, b: S) -> S {
    let absa = a.abs();
    let absb = b.abs();
    if absa > absb {
        let r = absb / absa;
        absa * (S::one() + r * r).sqrt()
    } else if absb == S::zero() {
        S::zero()
    } else {
        let r = absa / absb;
        absb * (S::one() + r * r).sqrt()
    }
}

#[inline]
fn same_sign_abs<S: Scalar>(magnitude: S, sign_of: S) -> S {
    if sign_of >= S::zero() {
        magnitude.abs()
    } else {
        -magnitude.abs()
    }
}

/// Rotates the contiguous column pair `(a, b)` by `[c s; -s c]`.
#[inline]
fn rotate_cols<S: Scalar>(buf: &mut [S], len: usize, a: usize, b: usize, c: S, s: S) {
    debug_assert!(a < b);
    let (head, tail) = buf.split_at_mut(b * len);
    let ca = &mut head[a * len..(a + 1) * len];
    let cb = &mut tail[..len];
    for (x, y) in ca.iter_mut().zip(cb.iter_mut()) {
        let xa = *x;
        let yb = *y;
        *x = xa * c + yb * s;
        *y = yb * c - xa * s;
    }
}

/// Thin SVD of an arbitrary finite matrix.
///
/// Both working factors are kept column-major so the O(n^3) inner loops
/// (Householder updates, QR rotations) stream over contiguous memory.
pub fn svd<S: Scalar>(m: &Matrix<S>) -> Result<SvdResult<S>> {
    if !m.is_finite() {
        return Err(Error::NonFinite { op: "svd" });
    }
    if m.rows() < m.cols() {
        let r = svd(&m.transpose())?;
        return Ok(SvdResult {
            u: r.vt.transpose(),
            sigma: r.sigma,
            vt: r.u.transpose(),
        });
    }
    let rows = m.rows();
    let cols = m.cols();
    // a(i,j) = ua[j*rows + i]; becomes U. v(i,j) = va[j*cols + i].
    let mut ua: Vec<S> = vec![S::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            ua[j * rows + i] = m.get(i, j);
        }
    }
    let mut va = vec![S::zero(); cols * cols];
    let mut w = vec![S::zero(); cols]; // diagonal: singular values
    let mut rv1 = vec![S::zero(); cols]; // superdiagonal workspace
    let mut rowbuf = vec![S::zero(); cols]; // staging for row-i access

    // Householder bidiagonalization.
    let mut g = S::zero();
    let mut scale = S::zero();
    let mut anorm = S::zero();
    for i in 0..cols {
        let l = i + 1;
        rv1[i] = scale * g;
        g = S::zero();
        scale = S::zero();
        if i < rows {
            // Left Householder annihilating column i below the diagonal.
            for k in i..rows {
                scale = scale + ua[i * rows + k].abs();
            }
            if scale != S::zero() {
                let mut s = S::zero();
                for k in i..rows {
                    ua[i * rows + k] = ua[i * rows + k] / scale;
                    s = s + ua[i * rows + k] * ua[i * rows + k];
                }
                let f = ua[i * rows + i];
                g = -same_sign_abs(s.sqrt(), f);
                let h = f * g - s;
                ua[i * rows + i] = f - g;
                for j in l..cols {
                    let mut s2 = S::zero();
                    for k in i..rows {
                        s2 = s2 + ua[i * rows + k] * ua[j * rows + k];
                    }
                    let f2 = s2 / h;
                    for k in i..rows {
                        ua[j * rows + k] = ua[j * rows + k] + f2 * ua[i * rows + k];
                    }
                }
                for k in i..rows {
                    ua[i * rows + k] = ua[i * rows + k] * scale;
                }
            }
        }
        w[i] = scale * g;
        g = S::zero();
        scale = S::zero();
        if i < rows && i != cols - 1 {
            // Right Householder annihilating row i right of the
            // superdiagonal, applied as a column-wise rank-1 update.
            for k in l..cols {
                scale = scale + ua[k * rows + i].abs();
            }
            if scale != S::zero() {
                let mut s = S::zero();
                for k in l..cols {
                    let t = ua[k * rows + i] / scale;
                    ua[k * rows + i] = t;
                    s = s + t * t;
                }
                let f = ua[l * rows + i];
                g = -same_sign_abs(s.sqrt(), f);
                let h = f * g - s;
                ua[l * rows + i] = f - g;
                for k in l..cols {
                    rowbuf[k] = ua[k * rows + i];
                    rv1[k] = rowbuf[k] / h;
                }
                // p = A[l.., l..] * row_i; then A[., k] += rv1[k] * p.
                let mut p = vec![S::zero(); rows];
                for k in l..cols {
                    let vk = rowbuf[k];
                    if vk != S::zero() {
                        let col = &ua[k * rows..(k + 1) * rows];
                        for (pj, &cj) in p[l..rows].iter_mut().zip(col[l..rows].iter()) {
                            *pj = *pj + vk * cj;
                        }
                    }
                }
                for k in l..cols {
                    let r1 = rv1[k];
                    if r1 != S::zero() {
                        let col = &mut ua[k * rows..(k + 1) * rows];
                        for (cj, &pj) in col[l..rows].iter_mut().zip(p[l..rows].iter()) {
                            *cj = *cj + r1 * pj;
                        }
                    }
                }
                for k in l..cols {
                    ua[k * rows + i] = ua[k * rows + i] * scale;
                }
            }
        }
        let track = w[i].abs() + rv1[i].abs();
        if track > anorm {
            anorm = track;
        }
    }

    // Accumulate right-hand transformations into v.
    {
        let mut l = cols;
        for i in (0..cols).rev() {
            if i < cols - 1 {
                if g != S::zero() {
                    for k in l..cols {
                        rowbuf[k] = ua[k * rows + i];
                    }
                    // Double division avoids possible underflow.
                    for j in l..cols {
                        va[i * cols + j] = (rowbuf[j] / rowbuf[l]) / g;
                    }
                    for j in l..cols {
                        let mut s = S::zero();
                        for k in l..cols {
                            s = s + rowbuf[k] * va[j * cols + k];
                        }
                        for k in l..cols {
                            va[j * cols + k] = va[j * cols + k] + s * va[i * cols + k];
                        }
                    }
                }
                for j in l..cols {
                    va[j * cols + i] = S::zero();
                    va[i * cols + j] = S::zero();
                }
            }
            va[i * cols + i] = S::one();
            g = rv1[i];
            l = i;
        }
    }

    // Accumulate left-hand transformations in place.
    for i in (0..cols).rev() {
        let l = i + 1;
        g = w[i];
        for j in l..cols {
            ua[j * rows + i] = S::zero();
        }
        if g != S::zero() {
            g = S::one() / g;
            for j in l..cols {
                let mut s = S::zero();
                for k in l..rows {
                    s = s + ua[i * rows + k] * ua[j * rows + k];
                }
                let f = (s / ua[i * rows + i]) * g;
                for k in i..rows {
                    ua[j * rows + k] = ua[j * rows + k] + f * ua[i * rows + k];
                }
            }
            for j in i..rows {
                ua[i * rows + j] = ua[i * rows + j] * g;
            }
        } else {
            for j in i..rows {
                ua[i * rows + j] = S::zero();
            }
        }
        ua[i * rows + i] = ua[i * rows + i] + S::one();
    }

    // Implicit-shift QR on the bidiagonal form.
    let two = S::one() + S::one();
    for k in (0..cols).rev() {
        let mut converged = false;
        for iteration in 0..MAX_QR_ITERATIONS {
            // Find a split point; rv1[0] is structurally zero, so the scan
            // terminates.
            let mut l = k;
            let mut flag = true;
            loop {
                if rv1[l].abs() + anorm == anorm {
                    flag = false;
                    break;
                }
                if w[l - 1].abs() + anorm == anorm {
                    break;
                }
                l -= 1;
            }
            if flag {
                // Cancel rv1[l] against the zero w[l-1].
                let nm = l - 1;
                let mut c = S::zero();
                let mut s = S::one();
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] = c * rv1[i];
                    if f.abs() + anorm == anorm {
                        break;
                    }
                    g = w[i];
                    let mut h = pythag(f, g);
                    w[i] = h;
                    h = S::one() / h;
                    c = g * h;
                    s = -f * h;
                    rotate_cols(&mut ua, rows, nm, i, c, s);
                }
            }
            let z = w[k];
            if l == k {
                if z < S::zero() {
                    w[k] = -z;
                    for j in 0..cols {
                        va[k * cols + j] = -va[k * cols + j];
                    }
                }
                converged = true;
                break;
            }
            if iteration + 1 == MAX_QR_ITERATIONS {
                break;
            }
            // Shift from the trailing 2x2 minor.
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (two * h * y);
            g = pythag(f, S::one());
            f = ((x - z) * (x + z) + h * ((y / (f + same_sign_abs(g, f))) - h)) / x;
            let mut c = S::one();
            let mut s = S::one();
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g = c * g;
                let mut zz = pythag(f, h);
                rv1[j] = zz;
                c = f / zz;
                s = h / zz;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y = y * c;
                rotate_cols(&mut va, cols, j, i, c, s);
                zz = pythag(f, h);
                w[j] = zz;
                if zz != S::zero() {
                    let inv = S::one() / zz;
                    c = f * inv;
                    s = h * inv;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                rotate_cols(&mut ua, rows, j, i, c, s);
            }
            rv1[l] = S::zero();
            rv1[k] = f;
            w[k] = x;
        }
        if !converged {
            return Err(Error::NoConvergence {
                op: "svd",
                iterations: MAX_QR_ITERATIONS,
            });
        }
    }

    // Order the spectrum descending, permuting both factors to match.
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| w[y].partial_cmp(&w[x]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u_sorted = Matrix::zeros(rows, cols);
    let mut vt_sorted = Matrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    for (slot, &j) in order.iter().enumerate() {
        sigma.push(w[j]);
        for r in 0..rows {
            u_sorted.set(r, slot, ua[j * rows + r]);
        }
        for r in 0..cols {
            vt_sorted.set(slot, r, va[j * cols + r]);
        }
    }

    Ok(SvdResult {
        u: u_sorted,
        sigma,
        vt: vt_sorted,
    })
}

/// Moore-Penrose pseudoinverse. Singular values at or below
/// `rcond * sigma_max` are treated as zero.
pub fn pinv<S: Scalar>(m: &Matrix<S>, rcond: S) -> Result<Matrix<S>> {
    if rcond <= S::zero() {
        return Err(Error::invalid("rcond", "must be > 0"));
    }
    let decomp = svd(m)?;
    let cutoff = rcond * decomp.sigma_max();
    // rows of vt scaled by the inverted spectrum, then (diag+ * vt)^T * u^T
    let mut scaled = decomp.vt.clone();
    for (i, &s) in decomp.sigma.iter().enumerate() {
        let inv = if s > cutoff { S::one() / s } else { S::zero() };
        for j in 0..scaled.cols() {
            scaled.set(i, j, scaled.get(i, j) * inv);
        }
    }
    scaled.transpose().matmul(&decomp.u.transpose())
}

/// `pinv` with the default cutoff.
pub fn pinv_default<S: Scalar>(m: &Matrix<S>) -> Result<Matrix<S>> {
    pinv(m, S::from_f64_lossy(DEFAULT_RCOND))
}
