//! Structured column pruning for linear layers with closed-form error
//! compensation.
//!
//! The crate prunes input columns of dense layers using activation-aware
//! importance scores, then refits the kept weights so the layer output stays
//! close to the original. Compensation variants: an orthogonal (Procrustes)
//! rotation, its isotropically scaled extension, an unconstrained
//! least-squares map, a mean-residual bias, or none. A greedy layerwise
//! driver applies this over serialized toy models with recorded calibration
//! activations, and a small CLI (`rcpu`) exposes generation, pruning,
//! sweeps, and evaluation.
//!
//! Core math is generic over the scalar type (`f32`/`f64`); the serialized
//! formats are fixed to float64.

pub mod compensation;
pub mod error;
pub mod gen;
pub mod io;
pub mod matrix;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod scoring;
pub mod svd;
pub mod sweep;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;
pub use svd::SvdResult;

/// Double-precision matrix, the type every serialized artifact uses.
pub type MatrixF64 = Matrix<f64>;
/// Single-precision matrix for callers trading accuracy for footprint.
pub type MatrixF32 = Matrix<f32>;
