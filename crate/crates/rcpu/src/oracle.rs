//! Independent brute-force verifiers: an exhaustive grid over 2-D orthogonal
//! maps, per-row least squares via Householder QR, a golden-section scale
//! search, naive triple-loop products, a straight-line forward pass, and a
//! two-sided Jacobi eigensolver.
//!
//! None of these share code with the solvers they check; each one takes a
//! deliberately different algorithmic route.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::svd::SvdResult;

/// Search grid over the 2-D orthogonal group.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    /// Angle step in radians; must lie in (0, pi).
    pub angle_step: f64,
    pub include_reflections: bool,
}

impl GridSpec {
    /// Fine grid used for the acceptance run.
    pub fn fine() -> Self {
        GridSpec {
            angle_step: 1e-4,
            include_reflections: true,
        }
    }

    /// Coarser grid for quick checks.
    pub fn coarse() -> Self {
        GridSpec {
            angle_step: 1e-2,
            include_reflections: true,
        }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::fine()
    }
}

/// Exhaustive scan over rotations (and optionally reflections) of the plane,
/// minimizing the Frobenius residual `|y - Q z|_F`.
///
/// Returns the smallest residual found and the matrix achieving it.
pub fn best_orthogonal_2d<S: Scalar>(
    y: &Matrix<S>,
    z: &Matrix<S>,
    grid: &GridSpec,
) -> Result<(S, Matrix<S>)> {
    if y.rows() != 2 || z.rows() != 2 {
        return Err(Error::shape(
            "best_orthogonal_2d",
            format!("needs 2 output rows, got {} and {}", y.rows(), z.rows()),
        ));
    }
    if y.shape() != z.shape() {
        return Err(Error::shape(
            "best_orthogonal_2d",
            format!("{:?} vs {:?}", y.shape(), z.shape()),
        ));
    }
    if !(grid.angle_step > 0.0 && grid.angle_step < std::f64::consts::PI) {
        return Err(Error::invalid("angle_step", "must lie in (0, pi)"));
    }
    let n = y.cols();
    let steps = (2.0 * std::f64::consts::PI / grid.angle_step).ceil() as usize;
    let mut best_sq = S::infinity();
    let mut best_q = [S::one(), S::zero(), S::zero(), S::one()];
    for step in 0..steps {
        let theta = step as f64 * grid.angle_step;
        let (sin, cos) = theta.sin_cos();
        let c = S::from_f64_lossy(cos);
        let s = S::from_f64_lossy(sin);
        // Rotation, then the reflection sharing its first column.
        let candidates: &[[S; 4]] = if grid.include_reflections {
            &[[c, -s, s, c], [c, s, s, -c]]
        } else {
            &[[c, -s, s, c]]
        };
        for q in candidates {
            let mut sq = S::zero();
            for j in 0..n {
                let z0 = z.get(0, j);
                let z1 = z.get(1, j);
                let d0 = y.get(0, j) - (q[0] * z0 + q[1] * z1);
                let d1 = y.get(1, j) - (q[2] * z0 + q[3] * z1);
                sq = sq + d0 * d0 + d1 * d1;
            }
            if sq < best_sq {
                best_sq = sq;
                best_q = *q;
            }
        }
    }
    let qm = Matrix::from_vec(2, 2, best_q.to_vec())?;
    Ok((best_sq.sqrt(), qm))
}

/// Least-squares map `A` minimizing `|y - A z|_F`, solved one output row at
/// a time through Householder QR of `z^T`. Requires `z` to have full row
/// rank with at least as many columns as rows.
pub fn ols_per_row<S: Scalar>(y: &Matrix<S>, z: &Matrix<S>) -> Result<Matrix<S>> {
    if y.shape() != z.shape() {
        return Err(Error::shape(
            "ols_per_row",
            format!("{:?} vs {:?}", y.shape(), z.shape()),
        ));
    }
    let d = z.rows();
    let n = z.cols();
    if n < d {
        return Err(Error::invalid(
            "z",
            format!("needs at least {d} samples for a determined fit, got {n}"),
        ));
    }

    // Householder QR of z^T (n x d), reflectors kept for the rhs pass.
    let zt = z.transpose();
    let mut r: Vec<S> = zt.data().to_vec(); // row-major n x d
    let mut reflectors: Vec<(usize, Vec<S>)> = Vec::with_capacity(d);
    for k in 0..d {
        let mut norm_sq = S::zero();
        for i in k..n {
            let v = r[i * d + k];
            norm_sq = norm_sq + v * v;
        }
        let norm = norm_sq.sqrt();
        if norm == S::zero() {
            return Err(Error::invalid("z", "rank deficient in QR oracle"));
        }
        let x0 = r[k * d + k];
        let alpha = if x0 >= S::zero() { -norm } else { norm };
        let mut v = vec![S::zero(); n - k];
        v[0] = x0 - alpha;
        for i in (k + 1)..n {
            v[i - k] = r[i * d + k];
        }
        let beta = v.iter().map(|&x| x * x).sum::<S>();
        if beta > S::zero() {
            for col in k..d {
                let mut dot = S::zero();
                for i in k..n {
                    dot = dot + v[i - k] * r[i * d + col];
                }
                let coef = (S::one() + S::one()) * dot / beta;
                for i in k..n {
                    r[i * d + col] = r[i * d + col] - coef * v[i - k];
                }
            }
        }
        reflectors.push((k, v));
    }
    for k in 0..d {
        if r[k * d + k].abs() == S::zero() {
            return Err(Error::invalid("z", "rank deficient in QR oracle"));
        }
    }

    let mut a = Matrix::zeros(d, d);
    for row in 0..y.rows() {
        // rhs = y_row^T, transformed by the stored reflectors.
        let mut rhs: Vec<S> = (0..n).map(|j| y.get(row, j)).collect();
        for (k, v) in &reflectors {
            let beta = v.iter().map(|&x| x * x).sum::<S>();
            if beta == S::zero() {
                continue;
            }
            let mut dot = S::zero();
            for i in *k..n {
                dot = dot + v[i - k] * rhs[i];
            }
            let coef = (S::one() + S::one()) * dot / beta;
            for i in *k..n {
                rhs[i] = rhs[i] - coef * v[i - k];
            }
        }
        // Back substitution on the d x d upper triangle.
        let mut x = vec![S::zero(); d];
        for i in (0..d).rev() {
            let mut acc = rhs[i];
            for j in (i + 1)..d {
                acc = acc - r[i * d + j] * x[j];
            }
            x[i] = acc / r[i * d + i];
        }
        for (j, &v) in x.iter().enumerate() {
            a.set(row, j, v);
        }
    }
    Ok(a)
}

/// Golden-section minimization of `|y - s * qz|_F` over `s in [0, s_hi]`
/// with `s_hi = 2 |y| / max(|qz|, 1e-300)`, to an interval of 1e-10.
pub fn line_search_scale<S: Scalar>(y: &Matrix<S>, qz: &Matrix<S>) -> Result<S> {
    if y.shape() != qz.shape() {
        return Err(Error::shape(
            "line_search_scale",
            format!("{:?} vs {:?}", y.shape(), qz.shape()),
        ));
    }
    if qz.is_zero() {
        return Ok(S::zero());
    }
    let objective = |s: S| -> S {
        let mut acc = S::zero();
        for (yv, qv) in y.data().iter().zip(qz.data().iter()) {
            let d = *yv - s * *qv;
            acc = acc + d * d;
        }
        acc
    };
    let y_norm = y.frob_norm().to_f64().unwrap_or(0.0);
    let qz_norm = qz.frob_norm().to_f64().unwrap_or(0.0).max(1e-300);
    let mut lo = S::zero();
    let mut hi = S::from_f64_lossy(2.0 * y_norm / qz_norm);
    let tol = S::from_f64_lossy(1e-10);
    let phi = S::from_f64_lossy((5.0f64.sqrt() - 1.0) / 2.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = objective(d);
        }
    }
    Ok((lo + hi) / (S::one() + S::one()))
}

/// Plain triple-loop product in i-j-k order; the reference for `matmul`.
pub fn naive_matmul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if a.cols() != b.rows() {
        return Err(Error::shape(
            "naive_matmul",
            format!("{:?} * {:?}", a.shape(), b.shape()),
        ));
    }
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            let mut acc = S::zero();
            for k in 0..a.cols() {
                acc = acc + a.get(i, k) * b.get(k, j);
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Straight-line dense forward pass: layer i computes
/// `nonlin(i, w_i * x + bias_i)`. Returns the activation entering each layer
/// followed by the final output (length `layers + 1`).
pub fn forward_dense<S: Scalar>(
    weights: &[Matrix<S>],
    biases: &[Option<Vec<S>>],
    nonlin: impl Fn(usize, S) -> S,
    input: &Matrix<S>,
) -> Result<Vec<Matrix<S>>> {
    let mut acts = vec![input.clone()];
    let mut x = input.clone();
    for (i, w) in weights.iter().enumerate() {
        let mut pre = naive_matmul(w, &x)?;
        if let Some(b) = biases.get(i).and_then(|b| b.as_ref()) {
            for (r, &offset) in b.iter().enumerate() {
                for c in 0..pre.cols() {
                    pre.set(r, c, pre.get(r, c) + offset);
                }
            }
        }
        x = pre.map(|v| nonlin(i, v));
        acts.push(x.clone());
    }
    Ok(acts)
}

/// Thin SVD by one-sided Jacobi rotations; an algorithmically independent
/// reference for the bidiagonalization-based production routine.
pub fn jacobi_svd<S: Scalar>(m: &Matrix<S>) -> Result<SvdResult<S>> {
    if !m.is_finite() {
        return Err(Error::NonFinite { op: "jacobi_svd" });
    }
    if m.rows() < m.cols() {
        let r = jacobi_svd(&m.transpose())?;
        return Ok(SvdResult {
            u: r.vt.transpose(),
            sigma: r.sigma,
            vt: r.u.transpose(),
        });
    }
    let (rows, cols) = m.shape();
    // Contiguous columns for the working matrix and the accumulated V.
    let mut a: Vec<S> = vec![S::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            a[j * rows + i] = m.get(i, j);
        }
    }
    let mut v: Vec<S> = vec![S::zero(); cols * cols];
    for j in 0..cols {
        v[j * cols + j] = S::one();
    }

    let tol = S::epsilon() * S::from_f64_lossy((rows as f64).sqrt());
    let tol2 = tol * tol;
    let mut converged = false;
    for _ in 0..64 {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in (p + 1)..cols {
                let mut app = S::zero();
                let mut aqq = S::zero();
                let mut apq = S::zero();
                for i in 0..rows {
                    let x = a[p * rows + i];
                    let y = a[q * rows + i];
                    app = app + x * x;
                    aqq = aqq + y * y;
                    apq = apq + x * y;
                }
                if apq * apq <= tol2 * app * aqq {
                    continue;
                }
                rotated = true;
                let two = S::one() + S::one();
                let zeta = (aqq - app) / (two * apq);
                let t = if zeta >= S::zero() {
                    S::one() / (zeta + (S::one() + zeta * zeta).sqrt())
                } else {
                    -S::one() / (-zeta + (S::one() + zeta * zeta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut a, rows, p, q, c, s);
                rotate_columns(&mut v, cols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            op: "jacobi_svd",
            iterations: 64,
        });
    }

    let norms: Vec<S> = (0..cols)
        .map(|j| {
            a[j * rows..(j + 1) * rows]
                .iter()
                .map(|&x| x * x)
                .sum::<S>()
                .sqrt()
        })
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = Matrix::zeros(rows, cols);
    let mut vt = Matrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    let mut null_slots = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let norm = norms[j];
        sigma.push(norm);
        if norm > S::zero() {
            for i in 0..rows {
                u.set(i, slot, a[j * rows + i] / norm);
            }
        } else {
            null_slots.push(slot);
        }
        for i in 0..cols {
            vt.set(slot, i, v[j * cols + i]);
        }
    }
    // Complete exactly-zero columns so u stays orthonormal for
    // rank-deficient input.
    if !null_slots.is_empty() {
        let mut done: Vec<usize> = (0..cols).filter(|c| !null_slots.contains(c)).collect();
        for &slot in &null_slots {
            let mut best: Option<(S, Vec<S>)> = None;
            for k in 0..rows {
                let mut cand = vec![S::zero(); rows];
                cand[k] = S::one();
                project_out(&u, &done, &mut cand);
                let norm = cand.iter().map(|&x| x * x).sum::<S>().sqrt();
                if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                    best = Some((norm, cand));
                }
            }
            let (_, mut cand) = best.expect("rows >= 1");
            project_out(&u, &done, &mut cand);
            let norm = cand.iter().map(|&x| x * x).sum::<S>().sqrt();
            for (i, &x) in cand.iter().enumerate() {
                u.set(i, slot, x / norm);
            }
            done.push(slot);
        }
    }
    Ok(SvdResult { u, sigma, vt })
}

fn rotate_columns<S: Scalar>(a: &mut [S], rows: usize, p: usize, q: usize, c: S, s: S) {
    debug_assert!(p < q);
    let (head, tail) = a.split_at_mut(q * rows);
    let cp = &mut head[p * rows..(p + 1) * rows];
    let cq = &mut tail[..rows];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

fn project_out<S: Scalar>(u: &Matrix<S>, cols: &[usize], cand: &mut [S]) {
    for &c in cols {
        let mut dot = S::zero();
        for (i, &x) in cand.iter().enumerate() {
            dot = dot + x * u.get(i, c);
        }
        for (i, x) in cand.iter_mut().enumerate() {
            *x = *x - dot * u.get(i, c);
        }
    }
}

/// Eigenvalues of a symmetric matrix by classical two-sided Jacobi
/// iteration, sorted descending.
pub fn sym_eigenvalues<S: Scalar>(g: &Matrix<S>) -> Result<Vec<S>> {
    if g.rows() != g.cols() {
        return Err(Error::shape(
            "sym_eigenvalues",
            format!("{:?} is not square", g.shape()),
        ));
    }
    let n = g.rows();
    let mut a: Vec<S> = g.data().to_vec();
    let thresh = S::epsilon() * g.frob_norm().max(S::one());
    for _sweep in 0..128 {
        let mut off = S::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= thresh {
            let mut eig: Vec<S> = (0..n).map(|i| a[i * n + i]).collect();
            eig.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
            return Ok(eig);
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == S::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let two = S::one() + S::one();
                let theta = (aqq - app) / (two * apq);
                let t = if theta >= S::zero() {
                    S::one() / (theta + (S::one() + theta * theta).sqrt())
                } else {
                    -S::one() / (-theta + (S::one() + theta * theta).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;
                // Two-sided update of rows/columns p and q.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        op: "sym_eigenvalues",
        iterations: 128,
    })
}
