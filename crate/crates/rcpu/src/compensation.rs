//! Closed-form compensation maps fitted from the kept output `Z` to the
//! original output `Y`.
//!
//! Variants:
//! - `rot`: orthogonal Q minimizing |Y - QZ|_F (Procrustes; Q = U V^T from
//!   the SVD of Y Z^T),
//! - `rot_scale`: the same Q with isotropic s = tr(Sigma) / |Z|_F^2,
//! - `ls`: unconstrained A = Y Z^T (Z Z^T)^+,
//! - `bias`: per-row mean of Y - Z,
//! - `none`: keep Z as is.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::svd::{pinv, svd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationKind {
    None,
    Rot,
    RotScale,
    Ls,
    Bias,
}

impl CompensationKind {
    pub const ALL: [CompensationKind; 5] = [
        CompensationKind::None,
        CompensationKind::Rot,
        CompensationKind::RotScale,
        CompensationKind::Ls,
        CompensationKind::Bias,
    ];
}

impl fmt::Display for CompensationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompensationKind::None => "none",
            CompensationKind::Rot => "rot",
            CompensationKind::RotScale => "rot_scale",
            CompensationKind::Ls => "ls",
            CompensationKind::Bias => "bias",
        })
    }
}

impl FromStr for CompensationKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(CompensationKind::None),
            "rot" => Ok(CompensationKind::Rot),
            "rot_scale" => Ok(CompensationKind::RotScale),
            "ls" => Ok(CompensationKind::Ls),
            "bias" => Ok(CompensationKind::Bias),
            other => Err(format!(
                "unknown compensation variant `{other}` (expected none, rot, rot_scale, ls or bias)"
            )),
        }
    }
}

/// A fitted compensation map plus its in-sample residual `|Y - map(Z)|_F`.
#[derive(Debug, Clone)]
pub struct CompensationResult<S> {
    pub variant: CompensationKind,
    /// Orthogonal factor, present for `rot` and `rot_scale`.
    pub q: Option<Matrix<S>>,
    /// Isotropic scale; 1 except for `rot_scale`.
    pub scale: S,
    /// Unconstrained linear map, present for `ls`.
    pub a: Option<Matrix<S>>,
    /// Per-output-row offset, present for `bias`.
    pub bias: Option<Vec<S>>,
    pub in_sample_residual: S,
}

fn check_same_shape<S: Scalar>(op: &'static str, y: &Matrix<S>, z: &Matrix<S>) -> Result<()> {
    if y.shape() != z.shape() {
        return Err(Error::shape(
            op,
            format!("y is {:?} but z is {:?}", y.shape(), z.shape()),
        ));
    }
    Ok(())
}

/// Frobenius norm of `y - compensated`.
pub fn residual<S: Scalar>(y: &Matrix<S>, compensated: &Matrix<S>) -> Result<S> {
    check_same_shape("residual", y, compensated)?;
    Ok(y.sub(compensated)?.frob_norm())
}

/// Applies a fitted map to the kept output `z`.
pub fn compensated_output<S: Scalar>(
    result: &CompensationResult<S>,
    z: &Matrix<S>,
) -> Result<Matrix<S>> {
    match result.variant {
        CompensationKind::None => Ok(z.clone()),
        CompensationKind::Rot => result.q.as_ref().expect("rot carries q").matmul(z),
        CompensationKind::RotScale => Ok(result
            .q
            .as_ref()
            .expect("rot_scale carries q")
            .matmul(z)?
            .scale(result.scale)),
        CompensationKind::Ls => result.a.as_ref().expect("ls carries a").matmul(z),
        CompensationKind::Bias => {
            z.add_col_broadcast(result.bias.as_ref().expect("bias carries offsets"))
        }
    }
}

/// Orthogonal Procrustes fit: Q = U V^T from the SVD of M = Y Z^T.
/// A zero cross matrix degenerates to Q = I.
pub fn fit_procrustes<S: Scalar>(y: &Matrix<S>, z: &Matrix<S>) -> Result<CompensationResult<S>> {
    check_same_shape("fit_procrustes", y, z)?;
    let (q, _sigma_trace) = procrustes_factor(y, z)?;
    let res = residual(y, &q.matmul(z)?)?;
    Ok(CompensationResult {
        variant: CompensationKind::Rot,
        q: Some(q),
        scale: S::one(),
        a: None,
        bias: None,
        in_sample_residual: res,
    })
}

/// Scaled Procrustes fit: Q as above, s = tr(Sigma) / |Z|_F^2, with s = 0
/// and Q = I when Z is zero.
pub fn fit_scaled_procrustes<S: Scalar>(
    y: &Matrix<S>,
    z: &Matrix<S>,
) -> Result<CompensationResult<S>> {
    check_same_shape("fit_scaled_procrustes", y, z)?;
    let z_norm_sq = z.frob_norm() * z.frob_norm();
    let (q, scale) = if z_norm_sq == S::zero() {
        (Matrix::identity(y.rows()), S::zero())
    } else {
        let (q, sigma_trace) = procrustes_factor(y, z)?;
        (q, sigma_trace / z_norm_sq)
    };
    let res = residual(y, &q.matmul(z)?.scale(scale))?;
    Ok(CompensationResult {
        variant: CompensationKind::RotScale,
        q: Some(q),
        scale,
        a: None,
        bias: None,
        in_sample_residual: res,
    })
}

/// Shared Procrustes core: returns (Q, tr(Sigma)) for M = Y Z^T.
fn procrustes_factor<S: Scalar>(y: &Matrix<S>, z: &Matrix<S>) -> Result<(Matrix<S>, S)> {
    let m = y.matmul(&z.transpose())?;
    if m.is_zero() {
        return Ok((Matrix::identity(y.rows()), S::zero()));
    }
    let decomp = svd(&m)?;
    let q = decomp.u.matmul(&decomp.vt)?;
    let trace = decomp.sigma.iter().copied().sum();
    Ok((q, trace))
}

/// Unconstrained least squares: A = Y Z^T (Z Z^T)^+.
pub fn fit_least_squares<S: Scalar>(
    y: &Matrix<S>,
    z: &Matrix<S>,
    rcond: S,
) -> Result<CompensationResult<S>> {
    check_same_shape("fit_least_squares", y, z)?;
    let zt = z.transpose();
    let gram = z.matmul(&zt)?;
    let a = y.matmul(&zt)?.matmul(&pinv(&gram, rcond)?)?;
    let res = residual(y, &a.matmul(z)?)?;
    Ok(CompensationResult {
        variant: CompensationKind::Ls,
        q: None,
        scale: S::one(),
        a: Some(a),
        bias: None,
        in_sample_residual: res,
    })
}

/// Mean-residual bias: b = row-wise mean of Y - Z, compensating with
/// `Z + b 1^T`.
pub fn fit_bias<S: Scalar>(y: &Matrix<S>, z: &Matrix<S>) -> Result<CompensationResult<S>> {
    check_same_shape("fit_bias", y, z)?;
    let bias = y.sub(z)?.row_means();
    let res = residual(y, &z.add_col_broadcast(&bias)?)?;
    Ok(CompensationResult {
        variant: CompensationKind::Bias,
        q: None,
        scale: S::one(),
        a: None,
        bias: Some(bias),
        in_sample_residual: res,
    })
}

/// The no-op fit; records the uncompensated residual `|Y - Z|_F`.
pub fn fit_none<S: Scalar>(y: &Matrix<S>, z: &Matrix<S>) -> Result<CompensationResult<S>> {
    check_same_shape("fit_none", y, z)?;
    Ok(CompensationResult {
        variant: CompensationKind::None,
        q: None,
        scale: S::one(),
        a: None,
        bias: None,
        in_sample_residual: residual(y, z)?,
    })
}

/// Dispatches on the requested variant.
pub fn fit<S: Scalar>(
    kind: CompensationKind,
    y: &Matrix<S>,
    z: &Matrix<S>,
    rcond: S,
) -> Result<CompensationResult<S>> {
    match kind {
        CompensationKind::None => fit_none(y, z),
        CompensationKind::Rot => fit_procrustes(y, z),
        CompensationKind::RotScale => fit_scaled_procrustes(y, z),
        CompensationKind::Ls => fit_least_squares(y, z, rcond),
        CompensationKind::Bias => fit_bias(y, z),
    }
}

/// Rewrites the kept weight block under the fitted map. Returns the new
/// weight and, for the bias variant, the offset vector to attach to the
/// layer.
pub fn apply<S: Scalar>(
    result: &CompensationResult<S>,
    w_k: &Matrix<S>,
) -> Result<(Matrix<S>, Option<Vec<S>>)> {
    let d_out = w_k.rows();
    match result.variant {
        CompensationKind::None => Ok((w_k.clone(), None)),
        CompensationKind::Rot => {
            let q = result.q.as_ref().expect("rot carries q");
            if q.cols() != d_out {
                return Err(Error::shape(
                    "apply",
                    format!("map is {:?} but weight has {d_out} rows", q.shape()),
                ));
            }
            Ok((q.matmul(w_k)?, None))
        }
        CompensationKind::RotScale => {
            let q = result.q.as_ref().expect("rot_scale carries q");
            if q.cols() != d_out {
                return Err(Error::shape(
                    "apply",
                    format!("map is {:?} but weight has {d_out} rows", q.shape()),
                ));
            }
            Ok((q.matmul(w_k)?.scale(result.scale), None))
        }
        CompensationKind::Ls => {
            let a = result.a.as_ref().expect("ls carries a");
            if a.cols() != d_out {
                return Err(Error::shape(
                    "apply",
                    format!("map is {:?} but weight has {d_out} rows", a.shape()),
                ));
            }
            Ok((a.matmul(w_k)?, None))
        }
        CompensationKind::Bias => {
            let bias = result.bias.as_ref().expect("bias carries offsets");
            if bias.len() != d_out {
                return Err(Error::shape(
                    "apply",
                    format!("bias has {} entries but weight has {d_out} rows", bias.len()),
                ));
            }
            Ok((w_k.clone(), Some(bias.clone())))
        }
    }
}
