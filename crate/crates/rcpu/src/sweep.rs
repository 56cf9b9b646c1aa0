//! Cross-product sweep runner: ratios x scores x compensation variants
//! (x seeds x calibration sizes) over one model, reporting in-sample
//! residuals and held-out relative error per cell.

use serde::{Deserialize, Serialize};

use crate::compensation::CompensationKind;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelSpec;
use crate::pipeline::{evaluate, prune_model, ActivationMode, PruneConfig};
use crate::rng::SplitMix64;
use crate::scalar::Scalar;
use crate::scoring::{ScoreVariant, VarianceMode};
use crate::svd::DEFAULT_RCOND;

const SALT_SUBSAMPLE: u64 = 0x55;

/// Axes and fixed knobs of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ratios: Vec<f64>,
    pub score_variants: Vec<ScoreVariant>,
    pub compensation_variants: Vec<CompensationKind>,
    pub seeds: Vec<u64>,
    /// Calibration sizes to subsample; empty means "use the full set".
    pub calib_sizes: Vec<usize>,
    pub activation_mode: ActivationMode,
    pub variance_mode: VarianceMode,
    pub rcond: f64,
    pub width_propagation: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            ratios: vec![0.1, 0.2, 0.3],
            score_variants: vec![ScoreVariant::VarianceAware, ScoreVariant::WandaSp],
            compensation_variants: CompensationKind::ALL.to_vec(),
            seeds: vec![0],
            calib_sizes: Vec::new(),
            activation_mode: ActivationMode::Propagated,
            variance_mode: VarianceMode::Population,
            rcond: DEFAULT_RCOND,
            width_propagation: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty()
            || self.score_variants.is_empty()
            || self.compensation_variants.is_empty()
            || self.seeds.is_empty()
        {
            return Err(Error::invalid("sweep", "axis lists must be nonempty"));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(Error::invalid("ratios", format!("{r} not in [0, 1)")));
        }
        if !self.rcond.is_finite() || self.rcond <= 0.0 {
            return Err(Error::invalid("rcond", "must be finite and > 0"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        let sizes = self.calib_sizes.len().max(1);
        self.ratios.len()
            * self.score_variants.len()
            * self.compensation_variants.len()
            * self.seeds.len()
            * sizes
    }
}

/// One completed sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub score: ScoreVariant,
    pub variant: CompensationKind,
    pub seed: u64,
    pub n_calib: usize,
    pub in_sample_residual: f64,
    pub heldout_rel_error: f64,
    pub seconds_per_layer: f64,
}

impl SweepRow {
    pub fn csv_header() -> &'static str {
        "ratio,score,variant,seed,n_calib,in_sample_residual,heldout_rel_error,seconds_per_layer"
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.ratio,
            self.score,
            self.variant,
            self.seed,
            self.n_calib,
            self.in_sample_residual,
            self.heldout_rel_error,
            self.seconds_per_layer
        )
    }

    /// The csv line without the trailing wall-clock column, for
    /// determinism comparisons.
    pub fn to_csv_without_timing(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.ratio,
            self.score,
            self.variant,
            self.seed,
            self.n_calib,
            self.in_sample_residual,
            self.heldout_rel_error
        )
    }
}

/// Seeded subsample of `n` calibration columns (token positions), kept in
/// token order. `n` equal to the full width returns the input unchanged.
pub fn subsample_columns<S: Scalar>(m: &Matrix<S>, n: usize, seed: u64) -> Result<Matrix<S>> {
    if n == 0 || n > m.cols() {
        return Err(Error::invalid(
            "n_calib",
            format!("{n} not in 1..={}", m.cols()),
        ));
    }
    if n == m.cols() {
        return Ok(m.clone());
    }
    let mut rng = SplitMix64::substream(seed, SALT_SUBSAMPLE);
    let chosen = rng.sample_indices(m.cols(), n);
    m.gather_cols(&chosen)
}

/// Runs the full cross product. `on_row` fires after every completed cell so
/// callers can flush partial results.
pub fn run_sweep<S: Scalar>(
    spec: &SweepSpec,
    model: &ModelSpec<S>,
    calib: &Matrix<S>,
    eval_inputs: &Matrix<S>,
    mut on_row: impl FnMut(&SweepRow) -> Result<()>,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    model.validate()?;
    let sizes: Vec<usize> = if spec.calib_sizes.is_empty() {
        vec![calib.cols()]
    } else {
        spec.calib_sizes.clone()
    };
    let mut rows = Vec::with_capacity(spec.cell_count());
    for &ratio in &spec.ratios {
        for &score in &spec.score_variants {
            for &variant in &spec.compensation_variants {
                for &seed in &spec.seeds {
                    for &n_calib in &sizes {
                        let sub = subsample_columns(calib, n_calib, seed)?;
                        let config = PruneConfig {
                            ratio,
                            score_variant: score,
                            compensation_variant: variant,
                            activation_mode: spec.activation_mode,
                            variance_mode: spec.variance_mode,
                            rcond: spec.rcond,
                            seed,
                            width_propagation: spec.width_propagation,
                        };
                        let (pruned, report) = prune_model(model, &sub, &config)?;
                        let metrics = evaluate(&pruned, eval_inputs, model)?;
                        let row = SweepRow {
                            ratio,
                            score,
                            variant,
                            seed,
                            n_calib,
                            in_sample_residual: report.total_residual_after(),
                            heldout_rel_error: metrics.relative_error,
                            seconds_per_layer: report.mean_seconds_per_layer(),
                        };
                        on_row(&row)?;
                        rows.push(row);
                    }
                }
            }
        }
    }
    Ok(rows)
}
