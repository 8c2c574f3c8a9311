//! Fully connected ReLU network with hand-written backpropagation.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::norm::NormKind;
use crate::rng::{derive_seed, stream_rng};

/// Datasets up to this size train full-batch by default.
pub const FULL_BATCH_LIMIT: usize = 4096;
pub const DEFAULT_MINIBATCH: usize = 128;
pub const DEFAULT_HIDDEN: usize = 100;

const SHUFFLE_SALT: u64 = 0x7368_7566;
const ADV_SALT: u64 = 0x6164_7673;

/// One affine layer; `weights` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    layers: Vec<Dense>,
}

#[derive(Debug, Clone)]
pub struct LossAndGrads {
    /// Mean cross-entropy over the batch.
    pub loss: f64,
    pub grads: Vec<Dense>,
    /// Gradient of the mean loss with respect to each input row.
    pub input_grad: Array2<f64>,
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::arg(
            "layer_dims",
            format!("need at least two positive sizes, got {layer_dims:?}"),
        ));
    }
    Ok(())
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut p = logits.to_owned();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|z| (z - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl MlpModel {
    /// Uniform fan-in initialisation, `U(−1/√fan_in, 1/√fan_in)`.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = stream_rng(seed, 0);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weights =
                    Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-bound..bound));
                let bias = Array1::from_shape_simple_fn(w[1], || rng.random_range(-bound..bound));
                Dense { weights, bias }
            })
            .collect();
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    /// One hidden layer of [`DEFAULT_HIDDEN`] units.
    pub fn standard(input_dim: usize, n_classes: usize, seed: u64) -> Result<Self> {
        Self::new(&[input_dim, DEFAULT_HIDDEN, n_classes], seed)
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            layers,
        })
    }

    /// Builds a model from explicit layers, checking that shapes chain.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let first = layers.first().ok_or(Error::Empty("layer list"))?;
        let mut dims = vec![first.weights.nrows()];
        for l in &layers {
            if l.weights.nrows() != *dims.last().unwrap() || l.bias.len() != l.weights.ncols() {
                return Err(Error::Format("layer shapes do not chain".into()));
            }
            dims.push(l.weights.ncols());
        }
        check_dims(&dims)?;
        Ok(MlpModel {
            layer_dims: dims,
            layers,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn check_batch(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        if let Some(row) = x
            .rows()
            .into_iter()
            .position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite { row });
        }
        Ok(())
    }

    fn check_labels(&self, n: usize, labels: &[usize]) -> Result<()> {
        if labels.len() != n {
            return Err(Error::CountMismatch {
                images: n,
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.n_classes()) {
            return Err(Error::arg(
                "labels",
                format!("label {bad} out of range 0..{}", self.n_classes()),
            ));
        }
        Ok(())
    }

    pub(crate) fn validate_batch(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
        self.check_batch(x)?;
        self.check_labels(x.nrows(), labels)
    }

    /// Logits for each row of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut h = self.affine(0, x);
        for l in 1..self.layers.len() {
            h.mapv_inplace(|v| v.max(0.0));
            h = self.affine(l, h.view());
        }
        h
    }

    fn affine(&self, l: usize, x: ArrayView2<f64>) -> Array2<f64> {
        let layer = &self.layers[l];
        let mut z = x.dot(&layer.weights);
        z += &layer.bias;
        z
    }

    /// Hidden activations after ReLU, then logits.
    fn forward_cached(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut h = self.affine(0, x);
        for l in 1..self.layers.len() {
            h.mapv_inplace(|v| v.max(0.0));
            let next = self.affine(l, h.view());
            acts.push(h);
            h = next;
        }
        acts.push(h);
        acts
    }

    /// Sum of per-row cross-entropies and `softmax − onehot` for each row.
    fn loss_and_dlogits(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
        let mut total = 0.0;
        let mut d = logits.clone();
        for (mut row, &y) in d.rows_mut().into_iter().zip(labels) {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + row.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
            total += lse - row[y];
            row.mapv_inplace(|z| (z - lse).exp());
            row[y] -= 1.0;
        }
        (total, d)
    }

    /// Backpropagates `delta` (gradient at the logits) to parameters and input.
    /// Without `want_input` the returned input gradient is empty.
    fn backward(
        &self,
        x: ArrayView2<f64>,
        acts: &[Array2<f64>],
        mut delta: Array2<f64>,
        want_params: bool,
        want_input: bool,
    ) -> (Vec<Dense>, Array2<f64>) {
        let mut grads = Vec::with_capacity(if want_params { self.layers.len() } else { 0 });
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 { x } else { acts[l - 1].view() };
            if want_params {
                grads.push(Dense {
                    weights: input.t().dot(&delta),
                    bias: delta.sum_axis(Axis(0)),
                });
            }
            if l == 0 && !want_input {
                delta = Array2::zeros((0, 0));
                break;
            }
            let mut prev = delta.dot(&self.layers[l].weights.t());
            if l > 0 {
                Zip::from(&mut prev).and(&acts[l - 1]).for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            delta = prev;
        }
        grads.reverse();
        (grads, delta)
    }

    /// Mean cross-entropy, parameter gradients and input gradients.
    pub fn loss_and_grads(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<LossAndGrads> {
        self.check_batch(x)?;
        self.check_labels(x.nrows(), labels)?;
        if labels.is_empty() {
            return Err(Error::Empty("batch"));
        }
        Ok(self.loss_and_grads_unchecked(x, labels, true))
    }

    fn loss_and_grads_unchecked(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
        want_input: bool,
    ) -> LossAndGrads {
        let n = x.nrows() as f64;
        let acts = self.forward_cached(x);
        let (total, mut dlogits) = Self::loss_and_dlogits(acts.last().unwrap(), labels);
        dlogits /= n;
        let (grads, input_grad) = self.backward(x, &acts, dlogits, true, want_input);
        LossAndGrads {
            loss: total / n,
            grads,
            input_grad,
        }
    }

    /// Gradient of each row's own cross-entropy with respect to that row.
    pub fn input_gradients(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
        self.check_batch(x)?;
        self.check_labels(x.nrows(), labels)?;
        Ok(self.input_gradients_unchecked(x, labels))
    }

    pub(crate) fn input_gradients_unchecked(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
    ) -> Array2<f64> {
        let acts = self.forward_cached(x);
        let (_, dlogits) = Self::loss_and_dlogits(acts.last().unwrap(), labels);
        self.backward(x, &acts, dlogits, false, true).1
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self.forward(x)?.rows().into_iter().map(argmax).collect())
    }

    /// Input gradient of `logit[1] − logit[0]` at a single point.
    pub fn margin_gradient(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if self.n_classes() != 2 {
            return Err(Error::Unsupported(
                "margin gradient needs a two-class model".into(),
            ));
        }
        let xb = x.insert_axis(Axis(0));
        self.check_batch(xb)?;
        let acts = self.forward_cached(xb);
        let delta = ndarray::array![[-1.0, 1.0]];
        Ok(self
            .backward(xb, &acts, delta, false, true)
            .1
            .row(0)
            .to_owned())
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::arg(
                "params",
                format!("expected {} values, got {}", self.n_params(), params.len()),
            ));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// Writes a one-line JSON header followed by the little-endian f64 weights.
    pub fn save(&self, path: &Path, seed: u64, config_hash: &str) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            layer_dims: self.layer_dims.clone(),
            seed,
            config_hash: config_hash.into(),
            n_params: self.n_params(),
        };
        let mut bytes = serde_json::to_vec(&header)?;
        bytes.push(b'\n');
        bytes.reserve(8 * self.n_params());
        for p in self.params_flat() {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointHeader)> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| {
            Error::Format(format!("{}: missing checkpoint header", path.display()))
        })?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Format(format!(
                "{}: unknown checkpoint format `{}`",
                path.display(),
                header.format
            )));
        }
        let mut model = MlpModel::zeros(&header.layer_dims)?;
        if header.n_params != model.n_params() {
            return Err(Error::Format(format!(
                "{}: header declares {} parameters but layer dims imply {}",
                path.display(),
                header.n_params,
                model.n_params()
            )));
        }
        let blob = &bytes[nl + 1..];
        let expected = 8 * model.n_params();
        if blob.len() != expected {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: nl + 1 + expected,
                actual: bytes.len(),
            });
        }
        let params: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        model.set_params_flat(&params)?;
        Ok((model, header))
    }
}

impl Classifier for MlpModel {
    fn predict(&self, x: ArrayView1<f64>) -> usize {
        argmax(self.forward_unchecked(x.insert_axis(Axis(0))).row(0))
    }

    fn predict_batch(&self, xs: ArrayView2<f64>) -> Vec<usize> {
        self.forward_unchecked(xs)
            .rows()
            .into_iter()
            .map(argmax)
            .collect()
    }
}

pub const CHECKPOINT_FORMAT: &str = "codimlab-mlp-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub layer_dims: Vec<usize>,
    pub seed: u64,
    pub config_hash: String,
    pub n_params: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// Learning rate divided by `decay_factor` every `decay_every` epochs.
    Sgd {
        lr: f64,
        decay_factor: f64,
        decay_every: usize,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps_hat: f64,
    },
}

impl Optimizer {
    pub fn sgd() -> Self {
        Optimizer::Sgd {
            lr: 0.1,
            decay_factor: 10.0,
            decay_every: 100,
        }
    }

    pub fn adam() -> Self {
        Optimizer::Adam {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Sgd { .. } => "sgd",
            Optimizer::Adam { .. } => "adam",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub eps: f64,
    pub step: f64,
    pub iters: usize,
    pub norm: NormKind,
    pub random_start: bool,
}

impl PgdConfig {
    pub fn new(eps: f64, norm: NormKind) -> Self {
        PgdConfig {
            eps,
            step: 0.05,
            iters: 30,
            norm,
            random_start: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps >= 0.0) {
            return Err(Error::arg(
                "eps",
                format!("must be non-negative, got {}", self.eps),
            ));
        }
        if !(self.step > 0.0) {
            return Err(Error::arg(
                "step",
                format!("must be positive, got {}", self.step),
            ));
        }
        if self.iters < 1 {
            return Err(Error::arg("iters", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub epochs: usize,
    /// `None` trains full-batch up to [`FULL_BATCH_LIMIT`] points, else uses
    /// [`DEFAULT_MINIBATCH`].
    pub batch_size: Option<usize>,
    pub seed: u64,
    /// PGD adversary applied to every batch before the gradient step.
    pub adversary: Option<PgdConfig>,
    /// Box the adversary must stay in, e.g. `[0, 1]` for pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip: Option<(f64, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: Optimizer::adam(),
            epochs: 250,
            batch_size: None,
            seed: 0,
            adversary: None,
            clip: None,
        }
    }
}

impl TrainConfig {
    pub fn with_optimizer(mut self, optimizer: Optimizer) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn effective_batch(&self, n: usize) -> usize {
        match self.batch_size {
            Some(b) => b.clamp(1, n.max(1)),
            None if n <= FULL_BATCH_LIMIT => n.max(1),
            None => DEFAULT_MINIBATCH,
        }
    }

    /// FNV-1a of the JSON encoding, as hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let h = json.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
            (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
        });
        format!("{h:016x}")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean training loss per epoch (on adversarial batches when training adversarially).
    pub loss_trace: Vec<f64>,
}

struct AdamState {
    m: Vec<Dense>,
    v: Vec<Dense>,
    t: i32,
}

/// Trains `model` on `(x, labels)`. Shuffling and PGD starts derive from `config.seed`.
pub fn train(
    model: MlpModel,
    x: ArrayView2<f64>,
    labels: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut model = model;
    model.check_batch(x)?;
    model.check_labels(x.nrows(), labels)?;
    if let Some(adv) = &config.adversary {
        adv.validate()?;
    }
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty("training set"));
    }
    let batch = config.effective_batch(n);
    let full_batch = batch >= n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle_rng = stream_rng(derive_seed(config.seed, SHUFFLE_SALT), 0);
    let mut adam = match config.optimizer {
        Optimizer::Adam { .. } => Some(AdamState {
            m: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
            v: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
            t: 0,
        }),
        Optimizer::Sgd { .. } => None,
    };
    let mut trace = Vec::with_capacity(config.epochs);
    let mut batch_counter = 0u64;
    for epoch in 0..config.epochs {
        if !full_batch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let selected;
            let picked: Vec<usize>;
            let (xb, yb): (ArrayView2<f64>, &[usize]) = if full_batch {
                (x, labels)
            } else {
                selected = x.select(Axis(0), chunk);
                picked = chunk.iter().map(|&i| labels[i]).collect();
                (selected.view(), &picked)
            };
            let perturbed;
            let xb = match &config.adversary {
                Some(adv) => {
                    let seed = derive_seed(derive_seed(config.seed, ADV_SALT), batch_counter);
                    perturbed = crate::attacks::pgd_points(&model, xb, yb, adv, seed, config.clip);
                    perturbed.view()
                }
                None => xb,
            };
            batch_counter += 1;
            let lg = model.loss_and_grads_unchecked(xb, yb, false);
            if !lg.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    loss: lg.loss,
                });
            }
            epoch_loss += lg.loss * chunk.len() as f64;
            apply_update(
                &mut model,
                &lg.grads,
                &config.optimizer,
                adam.as_mut(),
                epoch,
            );
        }
        let mean = epoch_loss / n as f64;
        trace.push(mean);
    }
    if model.layers.iter().any(|l| {
        l.weights
            .iter()
            .chain(l.bias.iter())
            .any(|v| !v.is_finite())
    }) {
        return Err(Error::Divergence {
            epoch: config.epochs,
            loss: f64::NAN,
        });
    }
    Ok(TrainOutcome {
        model,
        loss_trace: trace,
    })
}

fn apply_update(
    model: &mut MlpModel,
    grads: &[Dense],
    opt: &Optimizer,
    adam: Option<&mut AdamState>,
    epoch: usize,
) {
    match (*opt, adam) {
        (
            Optimizer::Sgd {
                lr,
                decay_factor,
                decay_every,
            },
            _,
        ) => {
            let rate = lr / decay_factor.powi((epoch / decay_every.max(1)) as i32);
            for (layer, g) in model.layers.iter_mut().zip(grads) {
                layer.weights.scaled_add(-rate, &g.weights);
                layer.bias.scaled_add(-rate, &g.bias);
            }
        }
        (
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps_hat,
            },
            Some(state),
        ) => {
            state.t += 1;
            let c1 = 1.0 - beta1.powi(state.t);
            let c2 = 1.0 - beta2.powi(state.t);
            let step = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps_hat);
            };
            for (((layer, g), m), v) in model
                .layers
                .iter_mut()
                .zip(grads)
                .zip(&mut state.m)
                .zip(&mut state.v)
            {
                Zip::from(&mut layer.weights)
                    .and(&g.weights)
                    .and(&mut m.weights)
                    .and(&mut v.weights)
                    .for_each(|p, &g, m, v| step(p, g, m, v));
                Zip::from(&mut layer.bias)
                    .and(&g.bias)
                    .and(&mut m.bias)
                    .and(&mut v.bias)
                    .for_each(|p, &g, m, v| step(p, g, m, v));
            }
        }
        (Optimizer::Adam { .. }, None) => unreachable!("adam state is created with the optimizer"),
    }
}
