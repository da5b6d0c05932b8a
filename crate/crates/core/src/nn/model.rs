use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{transpose, Activation, DenseLayer, MrConvLayer};
use crate::error::{Error, Result};

/// Which axis of the descriptor a convolution column slides over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Rows are histogram bins, each row spans every diffusion step.
    Bins,
    /// Rows are diffusion steps (the transposed descriptor).
    Steps,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub filter_sizes: Vec<usize>,
    pub filters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub orientation: Orientation,
    pub layers: Vec<ConvSpec>,
}

/// Architecture hyperparameters. With no columns the flattened input feeds
/// the dense stack directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n_bins: usize,
    pub n_steps: usize,
    pub columns: Vec<ColumnSpec>,
    pub hidden: Vec<usize>,
}

impl ModelSpec {
    /// Two columns (bins, steps), each with two MrConv layers of 32 and 16
    /// filters at widths 2, 4 and 6, then two dense layers of 256.
    pub fn deepgraph(n_bins: usize, n_steps: usize) -> Self {
        let column = |orientation| ColumnSpec {
            orientation,
            layers: vec![
                ConvSpec { filter_sizes: vec![2, 4, 6], filters: 32 },
                ConvSpec { filter_sizes: vec![2, 4, 6], filters: 16 },
            ],
        };
        Self {
            n_bins,
            n_steps,
            columns: vec![column(Orientation::Bins), column(Orientation::Steps)],
            hidden: vec![256, 256],
        }
    }

    /// Single column over bins with one filter width per layer.
    pub fn gd_cnn(n_bins: usize, n_steps: usize) -> Self {
        Self {
            n_bins,
            n_steps,
            columns: vec![ColumnSpec {
                orientation: Orientation::Bins,
                layers: vec![
                    ConvSpec { filter_sizes: vec![4], filters: 32 },
                    ConvSpec { filter_sizes: vec![4], filters: 16 },
                ],
            }],
            hidden: vec![256, 256],
        }
    }

    pub fn gd_mlp(n_bins: usize, n_steps: usize) -> Self {
        Self { n_bins, n_steps, columns: vec![], hidden: vec![256, 256] }
    }

    fn column_input(&self, orientation: Orientation) -> (usize, usize) {
        match orientation {
            Orientation::Bins => (self.n_bins, self.n_steps),
            Orientation::Steps => (self.n_steps, self.n_bins),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bins == 0 || self.n_steps == 0 {
            return Err(Error::Config("model input must be non-empty".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        for col in &self.columns {
            let (mut rows, _) = self.column_input(col.orientation);
            if col.layers.is_empty() {
                return Err(Error::Config("a convolution column needs at least one layer".into()));
            }
            for layer in &col.layers {
                if layer.filters == 0 || layer.filter_sizes.is_empty() {
                    return Err(Error::Config("conv layers need filters and filter sizes".into()));
                }
                if layer.filter_sizes.iter().any(|&m| m == 0 || m > rows) {
                    return Err(Error::Config(format!(
                        "filter sizes {:?} invalid for {rows} input rows",
                        layer.filter_sizes
                    )));
                }
                rows = layer.filter_sizes.iter().map(|&m| rows + 1 - m).sum();
            }
        }
        Ok(())
    }

    /// Length of the concatenated feature vector entering the dense stack.
    pub fn feature_len(&self) -> usize {
        if self.columns.is_empty() {
            return self.n_bins * self.n_steps;
        }
        self.columns
            .iter()
            .map(|col| {
                let (mut rows, _) = self.column_input(col.orientation);
                let mut width = 0;
                for layer in &col.layers {
                    rows = layer.filter_sizes.iter().map(|&m| rows + 1 - m).sum();
                    width = layer.filters;
                }
                rows * width
            })
            .sum()
    }
}

/// How parameters are initialized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Gaussian weights with sd `1 / sqrt(fan_in)`, zero biases.
    #[default]
    Scaled,
    /// Gaussian weights with unit sd, zero biases.
    UnitGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// Multi-column multiresolution convolutional regressor.
///
/// The same type doubles as a gradient container: gradients are returned
/// as a model with identical shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct McMrConvModel {
    spec: ModelSpec,
    pub(crate) columns: Vec<Vec<MrConvLayer>>,
    pub(crate) hidden: Vec<DenseLayer>,
    pub(crate) output: DenseLayer,
}

/// Forward-pass mode. Training mode applies inverted dropout after each
/// hidden dense layer, drawing masks from the given generator.
pub enum Mode<'a> {
    Eval,
    Train { dropout: f64, rng: &'a mut dyn RngCore },
}

struct ColumnCache {
    /// Input and output of each conv layer, row-major.
    activations: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Activations retained by a batched forward pass for backpropagation.
pub struct ForwardPass {
    batch: usize,
    columns: Vec<Vec<ColumnCache>>,
    features: Vec<f64>,
    /// Post-tanh hidden activations before dropout.
    hidden: Vec<Vec<f64>>,
    /// Inverted-dropout multipliers, empty in eval mode.
    masks: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl McMrConvModel {
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let columns = spec
            .columns
            .iter()
            .map(|col| {
                let (mut rows, mut cols) = spec.column_input(col.orientation);
                col.layers
                    .iter()
                    .map(|l| {
                        let layer = MrConvLayer::zeros(&l.filter_sizes, l.filters, cols);
                        rows = layer.output_rows(rows);
                        cols = l.filters;
                        layer
                    })
                    .collect()
            })
            .collect();
        let mut width = spec.feature_len();
        let hidden = spec
            .hidden
            .iter()
            .map(|&h| {
                let layer = DenseLayer::zeros(width, h, Activation::Tanh);
                width = h;
                layer
            })
            .collect();
        let output = DenseLayer::zeros(width, 1, Activation::Identity);
        Ok(Self { spec, columns, hidden, output })
    }

    pub fn new(spec: ModelSpec, init: Init, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = init == Init::UnitGaussian;
        for layer in model.columns.iter_mut().flatten() {
            layer.init(&mut rng, unit);
        }
        for layer in &mut model.hidden {
            layer.init(&mut rng, unit);
        }
        model.output.init(&mut rng, unit);
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn input_len(&self) -> usize {
        self.spec.n_bins * self.spec.n_steps
    }

    /// Zero-valued model with the same architecture.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.spec.clone()).expect("spec already validated")
    }

    /// Every parameter tensor in declaration order: per column, per layer,
    /// per filter size weights then bias; then hidden layers; then output.
    pub fn tensors(&self) -> Vec<(ParamKind, &[f64])> {
        let mut out = Vec::new();
        for layer in self.columns.iter().flatten() {
            for (w, b) in layer.weights.iter().zip(&layer.biases) {
                out.push((ParamKind::Weight, w.as_slice()));
                out.push((ParamKind::Bias, b.as_slice()));
            }
        }
        for layer in self.hidden.iter().chain(std::iter::once(&self.output)) {
            out.push((ParamKind::Weight, layer.weights.as_slice()));
            out.push((ParamKind::Bias, layer.bias.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        let mut out = Vec::new();
        for layer in self.columns.iter_mut().flatten() {
            for (w, b) in layer.weights.iter_mut().zip(layer.biases.iter_mut()) {
                out.push((ParamKind::Weight, w.as_mut_slice()));
                out.push((ParamKind::Bias, b.as_mut_slice()));
            }
        }
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.output)) {
            out.push((ParamKind::Weight, layer.weights.as_mut_slice()));
            out.push((ParamKind::Bias, layer.bias.as_mut_slice()));
        }
        out
    }

    /// Human-readable name of each tensor, aligned with [`Self::tensors`].
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (c, col) in self.columns.iter().enumerate() {
            for (l, layer) in col.iter().enumerate() {
                for m in &layer.filter_sizes {
                    out.push(format!("column{c}.conv{l}.size{m}.weight"));
                    out.push(format!("column{c}.conv{l}.size{m}.bias"));
                }
            }
        }
        for h in 0..self.hidden.len() {
            out.push(format!("dense{h}.weight"));
            out.push(format!("dense{h}.bias"));
        }
        out.push("output.weight".into());
        out.push("output.bias".into());
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn sum_squared_weights(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|(k, _)| *k == ParamKind::Weight)
            .flat_map(|(_, t)| t.iter())
            .map(|w| w * w)
            .sum()
    }

    fn check_batch(&self, inputs: &[&[f64]]) -> Result<()> {
        let want = self.input_len();
        if let Some(bad) = inputs.iter().find(|x| x.len() != want) {
            return Err(Error::Shape(format!(
                "model expects {}x{} descriptors ({want} values), got {}",
                self.spec.n_bins,
                self.spec.n_steps,
                bad.len()
            )));
        }
        Ok(())
    }

    /// Batched forward pass over row-major `n_bins x n_steps` inputs.
    pub fn forward(&self, inputs: &[&[f64]], mode: Mode<'_>) -> Result<ForwardPass> {
        self.check_batch(inputs)?;
        let batch = inputs.len();
        let flen = self.spec.feature_len();
        let mut features = Vec::with_capacity(batch * flen);
        let mut columns = Vec::with_capacity(batch);
        for x in inputs {
            if self.columns.is_empty() {
                features.extend_from_slice(x);
                columns.push(Vec::new());
                continue;
            }
            let mut per_sample = Vec::with_capacity(self.columns.len());
            for (col, spec) in self.columns.iter().zip(&self.spec.columns) {
                let (mut rows, _) = self.spec.column_input(spec.orientation);
                let mut current = match spec.orientation {
                    Orientation::Bins => x.to_vec(),
                    Orientation::Steps => transpose(x, self.spec.n_bins, self.spec.n_steps),
                };
                let mut activations = Vec::with_capacity(col.len());
                for layer in col {
                    let out = layer.forward_raw(&current, rows);
                    rows = layer.output_rows(rows);
                    activations.push((current, out.clone()));
                    current = out;
                }
                features.extend_from_slice(&current);
                per_sample.push(ColumnCache { activations });
            }
            columns.push(per_sample);
        }

        let mut hidden = Vec::with_capacity(self.hidden.len());
        let mut masks = Vec::new();
        let mut current = features.clone();
        let mut mode = mode;
        for layer in &self.hidden {
            let h = layer.forward_batch(&current, batch);
            current = match &mut mode {
                Mode::Eval => h.clone(),
                Mode::Train { dropout, rng } => {
                    let keep = 1.0 - *dropout;
                    let mask: Vec<f64> = (0..h.len())
                        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    let dropped = h.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    masks.push(mask);
                    dropped
                }
            };
            hidden.push(h);
        }
        let outputs = self.output.forward_batch(&current, batch);
        Ok(ForwardPass { batch, columns, features, hidden, masks, outputs })
    }

    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        Ok(self.forward(&[input], Mode::Eval)?.outputs[0])
    }

    /// Eval-mode predictions, evaluated in chunks to bound memory.
    pub fn predict_many(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(inputs.len());
        for chunk in inputs.chunks(256) {
            out.extend(self.forward(chunk, Mode::Eval)?.outputs);
        }
        Ok(out)
    }

    /// Gradient of `sum_b d_outputs[b] * yhat_b` with respect to every
    /// parameter, given the activations of `pass`.
    pub fn backward(&self, pass: &ForwardPass, d_outputs: &[f64]) -> McMrConvModel {
        assert_eq!(d_outputs.len(), pass.batch, "one output gradient per batch item");
        let batch = pass.batch;
        let mut grad = self.zeros_like();

        let last_input = match self.hidden.len() {
            0 => pass.features.clone(),
            n => apply_mask(&pass.hidden[n - 1], pass.masks.get(n - 1)),
        };
        let mut d_current = self
            .output
            .backward_batch(&last_input, batch, d_outputs, &mut grad.output, true)
            .expect("input gradient requested");

        for l in (0..self.hidden.len()).rev() {
            let h = &pass.hidden[l];
            let mask = pass.masks.get(l);
            let d_pre: Vec<f64> = d_current
                .iter()
                .enumerate()
                .map(|(i, &g)| {
                    let g = mask.map_or(g, |m| g * m[i]);
                    g * (1.0 - h[i] * h[i])
                })
                .collect();
            let input = if l == 0 {
                pass.features.clone()
            } else {
                apply_mask(&pass.hidden[l - 1], pass.masks.get(l - 1))
            };
            let need_input = l > 0 || !self.columns.is_empty();
            let d_in = self.hidden[l].backward_batch(&input, batch, &d_pre, &mut grad.hidden[l], need_input);
            if let Some(d) = d_in {
                d_current = d;
            }
        }
        if self.columns.is_empty() {
            return grad;
        }

        let flen = self.spec.feature_len();
        for (b, sample) in pass.columns.iter().enumerate() {
            let d_features = &d_current[b * flen..(b + 1) * flen];
            let mut offset = 0;
            for (c, cache) in sample.iter().enumerate() {
                let col = &self.columns[c];
                let (in_rows, _) = self.spec.column_input(self.spec.columns[c].orientation);
                let mut rows_per_layer = Vec::with_capacity(col.len());
                let mut rows = in_rows;
                for layer in col {
                    rows_per_layer.push(rows);
                    rows = layer.output_rows(rows);
                }
                let out_len = cache.activations.last().map_or(0, |(_, o)| o.len());
                let mut d_out = d_features[offset..offset + out_len].to_vec();
                offset += out_len;
                for l in (0..col.len()).rev() {
                    let (input, output) = &cache.activations[l];
                    let d_in = col[l].backward_raw(
                        input,
                        rows_per_layer[l],
                        output,
                        &d_out,
                        &mut grad.columns[c][l],
                        l > 0,
                    );
                    if let Some(d) = d_in {
                        d_out = d;
                    }
                }
            }
        }
        grad
    }
}

fn apply_mask(h: &[f64], mask: Option<&Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => h.to_vec(),
    }
}

/// Mean squared error of predictions plus `l2` times the sum of squared
/// weights (biases excluded).
pub fn loss(model: &McMrConvModel, inputs: &[&[f64]], targets: &[f64], l2: f64, mode: Mode<'_>) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidArgument("loss needs a non-empty batch with one target per input".into()));
    }
    let pass = model.forward(inputs, mode)?;
    Ok(data_loss(&pass.outputs, targets) + l2 * model.sum_squared_weights())
}

fn data_loss(outputs: &[f64], targets: &[f64]) -> f64 {
    outputs.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / targets.len() as f64
}

/// Loss and its gradient for one batch. Returns `(total_loss, data_mse, grad)`.
pub fn loss_and_gradient(
    model: &McMrConvModel,
    inputs: &[&[f64]],
    targets: &[f64],
    l2: f64,
    mode: Mode<'_>,
) -> Result<(f64, f64, McMrConvModel)> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::InvalidArgument("loss needs a non-empty batch with one target per input".into()));
    }
    let pass = model.forward(inputs, mode)?;
    let n = targets.len() as f64;
    let mse = data_loss(&pass.outputs, targets);
    let d_out: Vec<f64> = pass.outputs.iter().zip(targets).map(|(p, y)| 2.0 * (p - y) / n).collect();
    let mut grad = model.backward(&pass, &d_out);
    if l2 != 0.0 {
        for ((kind, g), (_, w)) in grad.tensors_mut().into_iter().zip(model.tensors()) {
            if kind == ParamKind::Weight {
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += 2.0 * l2 * wi;
                }
            }
        }
    }
    Ok((mse + l2 * model.sum_squared_weights(), mse, grad))
}
