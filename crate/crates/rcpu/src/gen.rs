//! Seeded toy-model and calibration-data generator.
//!
//! Inputs follow a factor model fixed by the seed:
//! `x_t = mu + F g_t + diag(idio) eps_t`. A few shared factors `g_t` drive
//! correlated rows with log-uniform scales, which makes the normal
//! equations of a least-squares fit genuinely ill-conditioned at small
//! calibration sizes; means stay small, as for roughly centered
//! activations. Calibration and held-out sets share the distribution; fresh
//! sample seeds give independent draws.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{LayerKind, LayerRecord, ModelSpec, Nonlinearity};
use crate::rng::SplitMix64;

const SALT_WEIGHTS: u64 = 0x11;
const SALT_ROW_STATS: u64 = 0x22;
const SALT_CALIB: u64 = 0x33;
const SALT_EVAL: u64 = 0x44;

/// Parameters for one generated artifact set.
#[derive(Debug, Clone)]
pub struct GenSpec {
    pub seed: u64,
    /// Chain of layer widths; `dims[i] -> dims[i+1]` is layer i.
    pub dims: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub n_calib: usize,
    pub n_eval: usize,
    /// Optional head-like group size applied to every layer.
    pub groups: Option<usize>,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.len() < 2 {
            return Err(Error::invalid("dims", "need at least input and output widths"));
        }
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid("dims", "all widths must be >= 2"));
        }
        if self.n_calib == 0 || self.n_eval == 0 {
            return Err(Error::invalid("n_calib/n_eval", "must be >= 1"));
        }
        if let Some(g) = self.groups {
            for w in self.dims[..self.dims.len() - 1].iter() {
                if g == 0 || w % g != 0 {
                    return Err(Error::invalid(
                        "groups",
                        format!("group size {g} does not divide layer width {w}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 0,
            dims: vec![32; 5],
            nonlinearity: Nonlinearity::Relu,
            n_calib: 256,
            n_eval: 512,
            groups: None,
        }
    }
}

/// Model plus paired calibration and held-out input tensors.
#[derive(Debug, Clone)]
pub struct Generated {
    pub model: ModelSpec<f64>,
    pub calib: Matrix<f64>,
    pub eval: Matrix<f64>,
}

struct InputModel {
    mu: Vec<f64>,
    /// Row loadings onto the shared factors (d x r, row-major).
    loadings: Vec<f64>,
    idio: Vec<f64>,
    factors: usize,
}

fn input_model(spec: &GenSpec) -> InputModel {
    let d = spec.dims[0];
    let factors = (d / 8).max(1);
    let mut rng = SplitMix64::substream(spec.seed, SALT_ROW_STATS);
    let mut mu = Vec::with_capacity(d);
    let mut loadings = vec![0.0; d * factors];
    let mut idio = Vec::with_capacity(d);
    let scale = 1.0 / (factors as f64).sqrt();
    for j in 0..d {
        let sigma = rng.uniform(0.2f64.ln(), 2.0f64.ln()).exp();
        mu.push(0.15 * sigma * rng.normal());
        for k in 0..factors {
            loadings[j * factors + k] = sigma * scale * rng.normal();
        }
        idio.push(0.05 * sigma);
    }
    InputModel {
        mu,
        loadings,
        idio,
        factors,
    }
}

/// Draws `n` fresh input columns from the seed-fixed row distribution.
/// `sample_seed` selects the noise stream, so different seeds give
/// independent samples of the same distribution.
pub fn sample_inputs(spec: &GenSpec, n: usize, sample_seed: u64) -> Result<Matrix<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let model = input_model(spec);
    let mut rng = SplitMix64::substream(sample_seed, SALT_CALIB);
    let d = spec.dims[0];
    let mut m = Matrix::zeros(d, n);
    let mut shared = vec![0.0; model.factors];
    for t in 0..n {
        for g in shared.iter_mut() {
            *g = rng.normal();
        }
        for j in 0..d {
            let factor_part: f64 = (0..model.factors)
                .map(|k| model.loadings[j * model.factors + k] * shared[k])
                .sum();
            m.set(j, t, model.mu[j] + factor_part + model.idio[j] * rng.normal());
        }
    }
    Ok(m)
}

/// Generates the model, calibration inputs, and held-out inputs for `spec`.
pub fn generate(spec: &GenSpec) -> Result<Generated> {
    spec.validate()?;
    let mut wrng = SplitMix64::substream(spec.seed, SALT_WEIGHTS);
    let depth = spec.depth();
    let mut layers = Vec::with_capacity(depth);
    for i in 0..depth {
        let d_in = spec.dims[i];
        let d_out = spec.dims[i + 1];
        let scale = 1.0 / (d_in as f64).sqrt();
        let weight = Matrix::from_fn(d_out, d_in, |_, _| scale * wrng.normal());
        let nonlinearity = if i + 1 == depth {
            Nonlinearity::None
        } else {
            spec.nonlinearity
        };
        let mut layer = LayerRecord::dense(format!("layer{i}"), weight, LayerKind::Prunable, nonlinearity);
        layer.groups = spec.groups;
        layers.push(layer);
    }
    let mut model = ModelSpec::new(layers);
    model.metadata.insert("generator.seed".into(), spec.seed.to_string());
    model.metadata.insert(
        "generator.dims".into(),
        spec.dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    model
        .metadata
        .insert("generator.nonlinearity".into(), spec.nonlinearity.to_string());
    model
        .metadata
        .insert("generator.n_calib".into(), spec.n_calib.to_string());
    model
        .metadata
        .insert("generator.n_eval".into(), spec.n_eval.to_string());
    model.validate()?;

    let calib = sample_inputs(spec, spec.n_calib, spec.seed ^ SALT_CALIB)?;
    let eval = sample_inputs(spec, spec.n_eval, spec.seed ^ SALT_EVAL)?;
    Ok(Generated { model, calib, eval })
}
