//! Toy-model container: an ordered stack of dense layers with optional
//! elementwise nonlinearities, plus directory-based serialization
//! (`manifest.toml` + one tensor payload per weight/bias).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_tensor, write_tensor};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const MODEL_FORMAT: &str = "rcpu-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    None,
    Relu,
    Gelu,
}

impl Nonlinearity {
    pub fn apply<S: Scalar>(self, v: S) -> S {
        match self {
            Nonlinearity::None => v,
            Nonlinearity::Relu => {
                if v > S::zero() {
                    v
                } else {
                    S::zero()
                }
            }
            Nonlinearity::Gelu => {
                // tanh approximation of the gaussian error linear unit
                let half = S::from_f64_lossy(0.5);
                let c = S::from_f64_lossy(0.797_884_560_802_865_4); // sqrt(2/pi)
                let k = S::from_f64_lossy(0.044_715);
                half * v * (S::one() + (c * (v + k * v * v * v)).tanh())
            }
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Nonlinearity::None => "none",
            Nonlinearity::Relu => "relu",
            Nonlinearity::Gelu => "gelu",
        })
    }
}

impl FromStr for Nonlinearity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Nonlinearity::None),
            "relu" => Ok(Nonlinearity::Relu),
            "gelu" => Ok(Nonlinearity::Gelu),
            other => Err(format!(
                "unknown nonlinearity `{other}` (expected none, relu or gelu)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Prunable,
    Passthrough,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Prunable => "prunable",
            LayerKind::Passthrough => "passthrough",
        })
    }
}

impl FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "prunable" => Ok(LayerKind::Prunable),
            "passthrough" => Ok(LayerKind::Passthrough),
            other => Err(format!(
                "unknown layer kind `{other}` (expected prunable or passthrough)"
            )),
        }
    }
}

/// One dense sub-layer.
///
/// `input_dim` is the width of the incoming activation. A pruned layer
/// stores the kept input indices in `input_kept` and a weight with one
/// column per kept index; an unpruned layer has `weight.cols == input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord<S> {
    pub name: String,
    pub weight: Matrix<S>,
    pub input_dim: usize,
    pub kind: LayerKind,
    pub nonlinearity: Nonlinearity,
    pub groups: Option<usize>,
    pub compensate_here: bool,
    pub bias: Option<Vec<S>>,
    pub input_kept: Option<Vec<usize>>,
}

impl<S: Scalar> LayerRecord<S> {
    /// Fresh unpruned dense layer.
    pub fn dense(
        name: impl Into<String>,
        weight: Matrix<S>,
        kind: LayerKind,
        nonlinearity: Nonlinearity,
    ) -> Self {
        let input_dim = weight.cols();
        LayerRecord {
            name: name.into(),
            weight,
            input_dim,
            kind,
            nonlinearity,
            groups: None,
            compensate_here: true,
            bias: None,
            input_kept: None,
        }
    }

    pub fn d_out(&self) -> usize {
        self.weight.rows()
    }

    pub fn is_pruned(&self) -> bool {
        self.input_kept.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return Err(Error::invalid(
                "layer.name",
                format!("`{}` must be non-empty [A-Za-z0-9_.-]", self.name),
            ));
        }
        match &self.input_kept {
            None => {
                if self.weight.cols() != self.input_dim {
                    return Err(Error::invalid(
                        "layer.weight",
                        format!(
                            "{}: unmasked layer expects {} columns, has {}",
                            self.name,
                            self.input_dim,
                            self.weight.cols()
                        ),
                    ));
                }
                if self.kind == LayerKind::Prunable && self.input_dim < 2 {
                    return Err(Error::invalid(
                        "layer.input_dim",
                        format!("{}: prunable layers need input width >= 2", self.name),
                    ));
                }
            }
            Some(kept) => {
                if kept.len() != self.weight.cols() {
                    return Err(Error::invalid(
                        "layer.input_kept",
                        format!(
                            "{}: {} kept indices but weight has {} columns",
                            self.name,
                            kept.len(),
                            self.weight.cols()
                        ),
                    ));
                }
                let strictly_increasing = kept.windows(2).all(|w| w[0] < w[1]);
                if !strictly_increasing || kept.last().is_some_and(|&k| k >= self.input_dim) {
                    return Err(Error::invalid(
                        "layer.input_kept",
                        format!("{}: indices must be strictly increasing and < input_dim", self.name),
                    ));
                }
            }
        }
        if let Some(g) = self.groups {
            if g == 0 || !self.weight.cols().is_multiple_of(g) {
                return Err(Error::invalid(
                    "layer.groups",
                    format!(
                        "{}: group size {g} does not divide width {}",
                        self.name,
                        self.weight.cols()
                    ),
                ));
            }
        }
        if let Some(b) = &self.bias {
            if b.len() != self.d_out() {
                return Err(Error::invalid(
                    "layer.bias",
                    format!(
                        "{}: bias length {} vs {} output rows",
                        self.name,
                        b.len(),
                        self.d_out()
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Applies the layer (gather, matmul, bias, nonlinearity) to an
    /// activation of width `input_dim`.
    pub fn forward(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        if x.rows() != self.input_dim {
            return Err(Error::shape(
                "layer.forward",
                format!(
                    "{}: activation has {} rows, expected {}",
                    self.name,
                    x.rows(),
                    self.input_dim
                ),
            ));
        }
        let gathered;
        let x_eff = match &self.input_kept {
            Some(kept) => {
                gathered = x.gather_rows(kept)?;
                &gathered
            }
            None => x,
        };
        let mut pre = self.weight.matmul(x_eff)?;
        if let Some(b) = &self.bias {
            pre = pre.add_col_broadcast(b)?;
        }
        let out = pre.map(|v| self.nonlinearity.apply(v));
        if !out.is_finite() {
            return Err(Error::NonFinite { op: "layer.forward" });
        }
        Ok(out)
    }
}

/// Ordered layer stack plus free-form provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<S> {
    pub layers: Vec<LayerRecord<S>>,
    pub metadata: BTreeMap<String, String>,
}

impl<S: Scalar> ModelSpec<S> {
    pub fn new(layers: Vec<LayerRecord<S>>) -> Self {
        ModelSpec {
            layers,
            metadata: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for layer in &self.layers {
            layer.validate()?;
            if !seen.insert(layer.name.clone()) {
                return Err(Error::invalid(
                    "model.layers",
                    format!("duplicate layer name `{}`", layer.name),
                ));
            }
        }
        for pair in self.layers.windows(2) {
            if pair[1].input_dim != pair[0].d_out() {
                return Err(Error::invalid(
                    "model.layers",
                    format!(
                        "`{}` outputs {} rows but `{}` expects {}",
                        pair[0].name,
                        pair[0].d_out(),
                        pair[1].name,
                        pair[1].input_dim
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(|l| l.input_dim)
    }

    pub fn prunable_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LayerKind::Prunable)
            .map(|(i, _)| i)
            .collect()
    }

    /// Full forward pass.
    pub fn forward(&self, x: &Matrix<S>) -> Result<Matrix<S>> {
        let mut act = x.clone();
        for layer in &self.layers {
            act = layer.forward(&act)?;
        }
        Ok(act)
    }

    /// Forward pass returning the activation entering each layer followed by
    /// the final output (`layers.len() + 1` matrices).
    pub fn forward_collect(&self, x: &Matrix<S>) -> Result<Vec<Matrix<S>>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut act = x.clone();
        for layer in &self.layers {
            acts.push(act.clone());
            act = layer.forward(&act)?;
        }
        acts.push(act);
        Ok(acts)
    }
}

// --- directory serialization (f64 payloads) ---

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    #[serde(default)]
    layers: Vec<ManifestLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestLayer {
    name: String,
    kind: String,
    output_dim: usize,
    input_dim: usize,
    nonlinearity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<usize>,
    compensate: bool,
    weight: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_kept: Option<Vec<usize>>,
}

/// Writes `manifest.toml` plus one tensor payload per weight (and bias)
/// into `dir`, creating it if needed.
pub fn save_model(dir: impl AsRef<Path>, model: &ModelSpec<f64>) -> Result<()> {
    let dir = dir.as_ref();
    model.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut layers = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let weight_file = format!("{}.weight.rcpu", layer.name);
        write_tensor(dir.join(&weight_file), &layer.weight)?;
        let bias_file = match &layer.bias {
            Some(b) => {
                let file = format!("{}.bias.rcpu", layer.name);
                write_tensor(dir.join(&file), &Matrix::column(b)?)?;
                Some(file)
            }
            None => None,
        };
        layers.push(ManifestLayer {
            name: layer.name.clone(),
            kind: layer.kind.to_string(),
            output_dim: layer.d_out(),
            input_dim: layer.input_dim,
            nonlinearity: layer.nonlinearity.to_string(),
            groups: layer.groups,
            compensate: layer.compensate_here,
            weight: weight_file,
            bias: bias_file,
            input_kept: layer.input_kept.clone(),
        });
    }
    let manifest = Manifest {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        metadata: model.metadata.clone(),
        layers,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| Error::format(dir.join(MANIFEST_FILE), e.to_string()))?;
    fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| Error::io(dir.join(MANIFEST_FILE), e))
}

/// Loads a model directory written by [`save_model`], validating manifest
/// fields, payload dimensions, and layer composition.
pub fn load_model(dir: impl AsRef<Path>) -> Result<ModelSpec<f64>> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    if manifest.format != MODEL_FORMAT {
        return Err(Error::format(
            &manifest_path,
            format!("unexpected format `{}`", manifest.format),
        ));
    }
    if manifest.version != MODEL_VERSION {
        return Err(Error::format(
            &manifest_path,
            format!("unsupported version {}", manifest.version),
        ));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for ml in manifest.layers {
        let kind = LayerKind::from_str(&ml.kind)
            .map_err(|e| Error::format(&manifest_path, e))?;
        let nonlinearity = Nonlinearity::from_str(&ml.nonlinearity)
            .map_err(|e| Error::format(&manifest_path, e))?;
        let weight = read_tensor(dir.join(&ml.weight))?;
        if weight.rows() != ml.output_dim {
            return Err(Error::format(
                &manifest_path,
                format!(
                    "layer `{}`: payload has {} rows, manifest says {}",
                    ml.name,
                    weight.rows(),
                    ml.output_dim
                ),
            ));
        }
        let bias = match ml.bias {
            Some(file) => {
                let b = read_tensor(dir.join(&file))?;
                if b.cols() != 1 {
                    return Err(Error::format(
                        &manifest_path,
                        format!("layer `{}`: bias payload must be a column", ml.name),
                    ));
                }
                Some(b.into_data())
            }
            None => None,
        };
        layers.push(LayerRecord {
            name: ml.name,
            weight,
            input_dim: ml.input_dim,
            kind,
            nonlinearity,
            groups: ml.groups,
            compensate_here: ml.compensate,
            bias,
            input_kept: ml.input_kept,
        });
    }
    let model = ModelSpec {
        layers,
        metadata: manifest.metadata,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_layer(rng: &mut SplitMix64, name: &str, d_out: usize, d_in: usize) -> LayerRecord<f64> {
        LayerRecord::dense(
            name,
            Matrix::from_fn(d_out, d_in, |_, _| rng.normal()),
            LayerKind::Prunable,
            Nonlinearity::Relu,
        )
    }

    #[test]
    fn relu_and_gelu_basics() {
        assert_eq!(Nonlinearity::Relu.apply(-2.0f64), 0.0);
        assert_eq!(Nonlinearity::Relu.apply(3.0f64), 3.0);
        assert_eq!(Nonlinearity::None.apply(-2.0f64), -2.0);
        // gelu(0) = 0; gelu is close to identity for large positive inputs.
        assert_eq!(Nonlinearity::Gelu.apply(0.0f64), 0.0);
        assert!((Nonlinearity::Gelu.apply(10.0f64) - 10.0).abs() < 1e-6);
        assert!(Nonlinearity::Gelu.apply(-10.0f64).abs() < 1e-6);
    }

    #[test]
    fn forward_applies_mask_bias_nonlinearity() {
        let weight = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let layer = LayerRecord {
            name: "l".into(),
            weight,
            input_dim: 3,
            kind: LayerKind::Prunable,
            nonlinearity: Nonlinearity::Relu,
            groups: None,
            compensate_here: true,
            bias: Some(vec![0.5, 0.0]),
            input_kept: Some(vec![0, 2]),
        };
        layer.validate().unwrap();
        let x = Matrix::from_rows(&[&[1.0], &[99.0], &[-3.0]]).unwrap();
        let out = layer.forward(&x).unwrap();
        // rows 0 and 2 gathered: [1, -3]; +bias [1.5, -3]; relu [1.5, 0]
        assert_eq!(out.data(), &[1.5, 0.0]);
    }

    #[test]
    fn forward_shape_guard() {
        let mut rng = SplitMix64::new(1);
        let layer = random_layer(&mut rng, "l", 2, 3);
        let x = Matrix::<f64>::zeros(4, 1);
        assert!(layer.forward(&x).is_err());
    }

    #[test]
    fn validate_rejects_bad_records() {
        let mut rng = SplitMix64::new(2);
        let mut layer = random_layer(&mut rng, "ok", 2, 3);
        layer.validate().unwrap();

        layer.name = "bad/name".into();
        assert!(layer.validate().is_err());
        layer.name = "ok".into();

        layer.groups = Some(2); // does not divide 3
        assert!(layer.validate().is_err());
        layer.groups = None;

        layer.bias = Some(vec![0.0; 3]); // d_out is 2
        assert!(layer.validate().is_err());
        layer.bias = None;

        layer.input_kept = Some(vec![0, 2, 1]); // not increasing
        assert!(layer.validate().is_err());
        layer.input_kept = Some(vec![0, 1, 3]); // 3 >= input_dim
        assert!(layer.validate().is_err());

        let narrow = LayerRecord::dense(
            "w1",
            Matrix::<f64>::zeros(2, 1),
            LayerKind::Prunable,
            Nonlinearity::None,
        );
        assert!(narrow.validate().is_err());
    }

    #[test]
    fn model_validation_checks_composition() {
        let mut rng = SplitMix64::new(3);
        let good = ModelSpec::new(vec![
            random_layer(&mut rng, "a", 4, 3),
            random_layer(&mut rng, "b", 2, 4),
        ]);
        good.validate().unwrap();
        assert_eq!(good.prunable_indices(), vec![0, 1]);

        let bad = ModelSpec::new(vec![
            random_layer(&mut rng, "a", 4, 3),
            random_layer(&mut rng, "b", 2, 5),
        ]);
        assert!(bad.validate().is_err());

        let dup = ModelSpec::new(vec![
            random_layer(&mut rng, "a", 3, 3),
            random_layer(&mut rng, "a", 3, 3),
        ]);
        assert!(dup.validate().is_err());
    }

    #[test]
    fn forward_collect_layout() {
        let mut rng = SplitMix64::new(4);
        let model = ModelSpec::new(vec![
            random_layer(&mut rng, "a", 4, 3),
            random_layer(&mut rng, "b", 2, 4),
        ]);
        let x = Matrix::from_fn(3, 5, |_, _| rng.normal());
        let acts = model.forward_collect(&x).unwrap();
        assert_eq!(acts.len(), 3);
        assert_eq!(acts[0], x);
        assert_eq!(acts[2], model.forward(&x).unwrap());
    }

    #[test]
    fn save_load_roundtrip_bit_exact() {
        let mut rng = SplitMix64::new(5);
        let mut model = ModelSpec::new(vec![
            random_layer(&mut rng, "a", 4, 3),
            random_layer(&mut rng, "b", 2, 4),
        ]);
        model.layers[1].bias = Some(vec![0.25, -1.5]);
        model.layers[1].groups = Some(2);
        model
            .metadata
            .insert("generator.seed".into(), "5".into());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model");
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn load_rejects_tampered_manifest() {
        let mut rng = SplitMix64::new(6);
        let model = ModelSpec::new(vec![random_layer(&mut rng, "a", 3, 3)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model");
        save_model(&path, &model).unwrap();

        let manifest_path = path.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).unwrap();
        fs::write(&manifest_path, text.replace("output_dim = 3", "output_dim = 4")).unwrap();
        assert!(load_model(&path).is_err());

        fs::write(&manifest_path, "format = \"other\"\nversion = 1\n").unwrap();
        assert!(load_model(&path).is_err());

        assert!(load_model(dir.path().join("missing")).is_err());
    }
}
