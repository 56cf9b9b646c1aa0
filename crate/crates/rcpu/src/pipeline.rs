//! Greedy layerwise pruning driver: collect activations, score columns,
//! select a mask, fit the configured compensation, rewrite the kept weights,
//! and report per-layer residuals/timing.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::compensation::{self, CompensationKind};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{LayerKind, LayerRecord, ModelSpec};
use crate::scalar::Scalar;
use crate::scoring::{score_columns_with, select_mask, PruneMask, ScoreVariant, VarianceMode};
use crate::svd::DEFAULT_RCOND;

/// Which network state the calibration activations are recorded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationMode {
    /// X comes from the unpruned network for every layer.
    Original,
    /// X comes from the partially pruned network built so far (default).
    Propagated,
}

impl fmt::Display for ActivationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActivationMode::Original => "original",
            ActivationMode::Propagated => "propagated",
        })
    }
}

impl FromStr for ActivationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "original" => Ok(ActivationMode::Original),
            "propagated" => Ok(ActivationMode::Propagated),
            other => Err(format!(
                "unknown activation mode `{other}` (expected original or propagated)"
            )),
        }
    }
}

/// Knobs for one pruning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneConfig {
    pub ratio: f64,
    pub score_variant: ScoreVariant,
    pub compensation_variant: CompensationKind,
    pub activation_mode: ActivationMode,
    pub variance_mode: VarianceMode,
    pub rcond: f64,
    pub seed: u64,
    /// Physically rewire producer rows instead of keeping gather masks.
    pub width_propagation: bool,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            ratio: 0.2,
            score_variant: ScoreVariant::VarianceAware,
            compensation_variant: CompensationKind::Rot,
            activation_mode: ActivationMode::Propagated,
            variance_mode: VarianceMode::Population,
            rcond: DEFAULT_RCOND,
            seed: 0,
            width_propagation: false,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::invalid("ratio", format!("{} not in [0, 1)", self.ratio)));
        }
        if !self.rcond.is_finite() || self.rcond <= 0.0 {
            return Err(Error::invalid("rcond", "must be finite and > 0"));
        }
        Ok(())
    }
}

/// Recorded (input, output) pair for one layer over N calibration tokens.
#[derive(Debug, Clone)]
pub struct CalibrationBatch<S> {
    pub x: Matrix<S>,
    pub y: Matrix<S>,
    pub n_tokens: usize,
}

/// Per-layer pruning outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneReport {
    pub layer: String,
    pub ratio: f64,
    pub kept: usize,
    pub residual_before: f64,
    pub residual_after: f64,
    pub variant: CompensationKind,
    pub seconds: f64,
}

impl PruneReport {
    /// One-line key=value rendering for terminal output.
    pub fn line(&self) -> String {
        format!(
            "layer={} ratio={} kept={} residual_before={:e} residual_after={:e} variant={} seconds={:.6}",
            self.layer,
            self.ratio,
            self.kept,
            self.residual_before,
            self.residual_after,
            self.variant,
            self.seconds
        )
    }
}

/// All per-layer reports from one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub records: Vec<PruneReport>,
}

impl RunReport {
    pub fn total_residual_after(&self) -> f64 {
        self.records.iter().map(|r| r.residual_after).sum()
    }

    pub fn mean_seconds_per_layer(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.records.iter().map(|r| r.seconds).sum::<f64>() / self.records.len() as f64
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("report", e.to_string()))
    }
}

/// Records a calibration batch at every prunable layer of `model` in one
/// forward pass: X is the activation entering the layer, Y = W X its linear
/// output. Layers that already carry a prune mask are rejected.
pub fn collect_activations<S: Scalar>(
    model: &ModelSpec<S>,
    calib_inputs: &Matrix<S>,
) -> Result<Vec<CalibrationBatch<S>>> {
    model.validate()?;
    if let Some(d) = model.input_dim() {
        if calib_inputs.rows() != d {
            return Err(Error::shape(
                "collect_activations",
                format!("inputs have {} rows, model expects {d}", calib_inputs.rows()),
            ));
        }
    }
    let acts = model.forward_collect(calib_inputs)?;
    let mut batches = Vec::new();
    for (i, layer) in model.layers.iter().enumerate() {
        if layer.kind != LayerKind::Prunable {
            continue;
        }
        if layer.is_pruned() {
            return Err(Error::invalid(
                "model",
                format!("layer `{}` is already pruned", layer.name),
            ));
        }
        let x = acts[i].clone();
        let y = layer.weight.matmul(&x)?;
        batches.push(CalibrationBatch {
            x,
            y,
            n_tokens: calib_inputs.cols(),
        });
    }
    Ok(batches)
}

/// Splits `W X` into the kept and dropped contributions:
/// `z = W_K X_K`, `dropped = W_D X_D`, with `z + dropped = W X`.
pub fn decompose<S: Scalar>(
    w: &Matrix<S>,
    x: &Matrix<S>,
    mask: &PruneMask,
) -> Result<(Matrix<S>, Matrix<S>)> {
    if w.cols() != x.rows() || mask.d_in() != w.cols() {
        return Err(Error::shape(
            "decompose",
            format!(
                "w {:?}, x {:?}, mask width {}",
                w.shape(),
                x.shape(),
                mask.d_in()
            ),
        ));
    }
    if mask.kept().is_empty() {
        return Err(Error::invalid("mask", "kept set must not be empty"));
    }
    let z = w.gather_cols(mask.kept())?.matmul(&x.gather_rows(mask.kept())?)?;
    let dropped = if mask.dropped().is_empty() {
        Matrix::zeros(w.rows(), x.cols())
    } else {
        w.gather_cols(mask.dropped())?
            .matmul(&x.gather_rows(mask.dropped())?)?
    };
    Ok((z, dropped))
}

/// Prunes a single layer against its calibration batch: score, select,
/// decompose, fit the configured compensation, and rewrite the kept weights.
pub fn prune_layer<S: Scalar>(
    layer: &LayerRecord<S>,
    batch: &CalibrationBatch<S>,
    config: &PruneConfig,
) -> Result<(LayerRecord<S>, PruneReport)> {
    let start = Instant::now();
    config.validate()?;
    if layer.kind != LayerKind::Prunable {
        return Err(Error::invalid(
            "layer",
            format!("`{}` is not prunable", layer.name),
        ));
    }
    if layer.is_pruned() {
        return Err(Error::invalid(
            "layer",
            format!("`{}` is already pruned", layer.name),
        ));
    }
    if batch.x.rows() != layer.weight.cols()
        || batch.y.rows() != layer.d_out()
        || batch.x.cols() != batch.y.cols()
        || batch.x.cols() != batch.n_tokens
    {
        return Err(Error::shape(
            "prune_layer",
            format!(
                "batch x {:?} / y {:?} (n_tokens {}) vs weight {:?}",
                batch.x.shape(),
                batch.y.shape(),
                batch.n_tokens,
                layer.weight.shape()
            ),
        ));
    }

    let scores = score_columns_with(&layer.weight, &batch.x, config.score_variant, config.variance_mode)?;
    let mask = select_mask(&scores, config.ratio, layer.groups)?;
    let (z, _dropped) = decompose(&layer.weight, &batch.x, &mask)?;
    let residual_before = compensation::residual(&batch.y, &z)?;

    let variant = if layer.compensate_here {
        config.compensation_variant
    } else {
        CompensationKind::None
    };
    let fitted = compensation::fit(variant, &batch.y, &z, S::from_f64_lossy(config.rcond))?;
    let w_k = layer.weight.gather_cols(mask.kept())?;
    let (new_weight, bias) = compensation::apply(&fitted, &w_k)?;

    let new_layer = LayerRecord {
        name: layer.name.clone(),
        weight: new_weight,
        input_dim: layer.input_dim,
        kind: LayerKind::Prunable,
        nonlinearity: layer.nonlinearity,
        groups: None,
        compensate_here: layer.compensate_here,
        bias,
        input_kept: Some(mask.kept().to_vec()),
    };
    let report = PruneReport {
        layer: layer.name.clone(),
        ratio: config.ratio,
        kept: mask.kept().len(),
        residual_before: residual_before.to_f64().unwrap_or(f64::NAN),
        residual_after: fitted.in_sample_residual.to_f64().unwrap_or(f64::NAN),
        variant,
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((new_layer, report))
}

/// Prunes every prunable layer of `model` in order.
///
/// In `Original` mode all calibration batches are recorded from the unpruned
/// network up front; in `Propagated` mode each layer sees the activations of
/// the partially pruned network built so far. By default dropped inputs stay
/// as a gather mask on the pruned layer; with `width_propagation` the
/// producing layer's output rows are physically deleted instead.
pub fn prune_model<S: Scalar>(
    model: &ModelSpec<S>,
    calib_inputs: &Matrix<S>,
    config: &PruneConfig,
) -> Result<(ModelSpec<S>, RunReport)> {
    config.validate()?;
    model.validate()?;
    if let Some(d) = model.input_dim() {
        if calib_inputs.rows() != d {
            return Err(Error::shape(
                "prune_model",
                format!("inputs have {} rows, model expects {d}", calib_inputs.rows()),
            ));
        }
    }

    let original_batches = match config.activation_mode {
        ActivationMode::Original => Some(collect_activations(model, calib_inputs)?),
        ActivationMode::Propagated => None,
    };

    let mut work = model.clone();
    let mut report = RunReport::default();
    // Activation entering the current layer under the pruned-so-far network.
    let mut act = calib_inputs.clone();
    let mut prunable_seen = 0usize;

    for i in 0..work.layers.len() {
        if work.layers[i].kind != LayerKind::Prunable {
            act = work.layers[i].forward(&act)?;
            continue;
        }
        let batch = match &original_batches {
            Some(batches) => batches[prunable_seen].clone(),
            None => {
                let y = work.layers[i].weight.matmul(&act)?;
                CalibrationBatch {
                    x: act.clone(),
                    y,
                    n_tokens: act.cols(),
                }
            }
        };
        prunable_seen += 1;

        let (mut new_layer, layer_report) = prune_layer(&work.layers[i], &batch, config)?;
        act = new_layer.forward(&act)?;

        if config.width_propagation && i > 0 {
            if let Some(kept) = new_layer.input_kept.take() {
                let producer = &mut work.layers[i - 1];
                producer.weight = producer.weight.gather_rows(&kept)?;
                if let Some(b) = &producer.bias {
                    producer.bias = Some(kept.iter().map(|&k| b[k]).collect());
                }
                new_layer.input_dim = kept.len();
            }
        }
        work.layers[i] = new_layer;
        report.records.push(layer_report);
    }

    work.metadata.insert("prune.ratio".into(), config.ratio.to_string());
    work.metadata
        .insert("prune.score".into(), config.score_variant.to_string());
    work.metadata
        .insert("prune.variant".into(), config.compensation_variant.to_string());
    work.metadata
        .insert("prune.activation_mode".into(), config.activation_mode.to_string());
    work.metadata.insert("prune.seed".into(), config.seed.to_string());
    work.validate()?;
    Ok((work, report))
}

/// Per-layer slice of an evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct LayerEval {
    pub layer: String,
    /// Relative error of this layer's output versus the reference; `None`
    /// when the shapes are not comparable or the reference output is zero.
    pub relative_error: Option<f64>,
}

/// Held-out comparison of a pruned model against its reference.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    pub relative_error: f64,
    pub per_layer: Vec<LayerEval>,
}

/// Relative output error `|f_model(X) - f_ref(X)|_F / |f_ref(X)|_F` on
/// held-out inputs, plus per-layer residuals where shapes allow.
pub fn evaluate<S: Scalar>(
    model: &ModelSpec<S>,
    eval_inputs: &Matrix<S>,
    reference: &ModelSpec<S>,
) -> Result<EvalMetrics> {
    model.validate()?;
    reference.validate()?;
    let model_acts = model.forward_collect(eval_inputs)?;
    let ref_acts = reference.forward_collect(eval_inputs)?;

    let model_out = model_acts.last().expect("forward_collect is non-empty");
    let ref_out = ref_acts.last().expect("forward_collect is non-empty");
    if model_out.shape() != ref_out.shape() {
        return Err(Error::shape(
            "evaluate",
            format!("outputs {:?} vs {:?}", model_out.shape(), ref_out.shape()),
        ));
    }
    let denom = ref_out.frob_norm().to_f64().unwrap_or(0.0);
    if denom == 0.0 {
        return Err(Error::invalid("reference", "reference output is all zero"));
    }
    let diff = model_out.sub(ref_out)?.frob_norm().to_f64().unwrap_or(f64::NAN);
    let relative_error = diff / denom;

    let mut per_layer = Vec::new();
    if model.layers.len() == reference.layers.len() {
        for (i, layer) in model.layers.iter().enumerate() {
            let (a, b) = (&model_acts[i + 1], &ref_acts[i + 1]);
            let rel = if a.shape() == b.shape() {
                let d = b.frob_norm().to_f64().unwrap_or(0.0);
                if d > 0.0 {
                    Some(a.sub(b)?.frob_norm().to_f64().unwrap_or(f64::NAN) / d)
                } else {
                    None
                }
            } else {
                None
            };
            per_layer.push(LayerEval {
                layer: layer.name.clone(),
                relative_error: rel,
            });
        }
    }
    Ok(EvalMetrics {
        relative_error,
        per_layer,
    })
}
