//! Convolutional sentence classifier.
//!
//! Embedding lookup → parallel convolution banks (ReLU, stride 1, filters
//! spanning the full embedding width) → max-over-time pooling →
//! concatenation → dense layer → softmax. Trained with plain mini-batch SGD
//! on either the squared error of the softmax outputs or cross-entropy.
//!
//! Class index 0 is non-toxic and index 1 toxic, see [`Label::index`].

mod io;
mod train;

pub use io::{CnnModelFile, MODEL_MAGIC, MODEL_VERSION};
pub use train::{train, TrainOutcome, TrainingConfig};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::exec::{map_slice, Exec};
use crate::numerics::{axpy, dot4, softmax, Matrix, SeededRng};
use crate::textprep::{EncodedDocument, PAD};

/// Output neurons: one per class.
pub const CLASSES: usize = 2;

/// Half-width of the uniform init interval for filters and the dense layer.
pub const WEIGHT_INIT_RANGE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub filters: usize,
    pub heights: Vec<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { filters: 128, heights: vec![3, 4, 5] }
    }
}

impl Architecture {
    pub fn validate(&self, max_len: usize) -> Result<()> {
        if self.filters == 0 {
            return Err(Error::Config("filter count must be at least 1".into()));
        }
        if self.heights.is_empty() || self.heights.contains(&0) {
            return Err(Error::Config(format!("filter heights must be positive, got {:?}", self.heights)));
        }
        let tallest = *self.heights.iter().max().unwrap();
        if max_len < tallest {
            return Err(Error::Config(format!(
                "padded length {max_len} is shorter than the tallest filter ({tallest})"
            )));
        }
        Ok(())
    }

    /// Length of the pooled feature vector.
    pub fn feature_len(&self) -> usize {
        self.filters * self.heights.len()
    }
}

/// `count` filters of shape `height × dim`, stored row-major one after
/// another.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvFilterBank {
    pub height: usize,
    pub count: usize,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvFilterBank {
    pub fn zeros(height: usize, count: usize, dim: usize) -> Self {
        Self { height, count, dim, weights: vec![0.0; height * dim * count], biases: vec![0.0; count] }
    }

    pub fn window(&self) -> usize {
        self.height * self.dim
    }

    pub fn filter(&self, f: usize) -> &[f64] {
        let w = self.window();
        &self.weights[f * w..(f + 1) * w]
    }
}

/// Fully connected output layer; `weights` is `inputs × CLASSES`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }
}

/// All trainable state of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub embedding: EmbeddingTable,
    pub banks: Vec<ConvFilterBank>,
    pub dense: DenseLayer,
    /// Padded document length every input must have.
    pub max_len: usize,
}

impl NetworkParams {
    /// Filters and dense weights uniform on ±[`WEIGHT_INIT_RANGE`], biases
    /// zero.
    pub fn init(embedding: EmbeddingTable, arch: &Architecture, max_len: usize, rng: &mut SeededRng) -> Result<Self> {
        arch.validate(max_len)?;
        let dim = embedding.dim();
        let banks = arch
            .heights
            .iter()
            .map(|&h| {
                let mut bank = ConvFilterBank::zeros(h, arch.filters, dim);
                for w in &mut bank.weights {
                    *w = rng.uniform_in(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE);
                }
                bank
            })
            .collect();
        let mut dense = Matrix::zeros(arch.feature_len(), CLASSES);
        for w in dense.as_mut_slice() {
            *w = rng.uniform_in(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE);
        }
        Ok(Self { embedding, banks, dense: DenseLayer { weights: dense, biases: vec![0.0; CLASSES] }, max_len })
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            filters: self.banks.first().map_or(0, |b| b.count),
            heights: self.banks.iter().map(|b| b.height).collect(),
        }
    }

    pub fn feature_len(&self) -> usize {
        self.banks.iter().map(|b| b.count).sum()
    }

    /// Checks internal shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let dim = self.embedding.dim();
        for (i, b) in self.banks.iter().enumerate() {
            if b.dim != dim || b.weights.len() != b.window() * b.count || b.biases.len() != b.count {
                return Err(Error::dim(format!("filter bank {i} is inconsistent with embedding dimension {dim}")));
            }
            if b.height > self.max_len {
                return Err(Error::Config(format!(
                    "filter height {} exceeds padded length {}",
                    b.height, self.max_len
                )));
            }
        }
        if self.dense.inputs() != self.feature_len() || self.dense.biases.len() != self.dense.outputs() {
            return Err(Error::dim(format!(
                "dense layer expects {} inputs, pooled features have {}",
                self.dense.inputs(),
                self.feature_len()
            )));
        }
        let all = self
            .banks
            .iter()
            .flat_map(|b| b.weights.iter().chain(&b.biases))
            .chain(self.dense.weights.as_slice())
            .chain(&self.dense.biases)
            .chain(self.embedding.matrix.as_slice());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network parameter".into()));
        }
        Ok(())
    }

    /// Flat parameter vector: trainable embedding rows 1..=V (when
    /// `with_embedding`), each bank's weights then biases, dense weights,
    /// dense biases.
    pub fn to_flat(&self, with_embedding: bool) -> Vec<f64> {
        let mut v = Vec::new();
        if with_embedding {
            v.extend_from_slice(&self.embedding.matrix.as_slice()[self.embedding.dim()..]);
        }
        for b in &self.banks {
            v.extend_from_slice(&b.weights);
            v.extend_from_slice(&b.biases);
        }
        v.extend_from_slice(self.dense.weights.as_slice());
        v.extend_from_slice(&self.dense.biases);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64], with_embedding: bool) -> Result<()> {
        if flat.len() != self.to_flat(with_embedding).len() {
            return Err(Error::dim(format!("flat parameter vector of length {}", flat.len())));
        }
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        if with_embedding {
            let d = self.embedding.dim();
            take(&mut self.embedding.matrix.as_mut_slice()[d..]);
        }
        for b in &mut self.banks {
            take(&mut b.weights);
            take(&mut b.biases);
        }
        take(self.dense.weights.as_mut_slice());
        take(&mut self.dense.biases);
        Ok(())
    }

    /// `θ ← θ − lr·∇E`. Embedding rows move only when the table is
    /// trainable; the padding row never moves.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if grads.banks.len() != self.banks.len() || grads.dense_weights.shape() != self.dense.weights.shape() {
            return Err(Error::dim("gradient shapes do not match the network"));
        }
        if learning_rate == 0.0 {
            return Ok(());
        }
        for (b, g) in self.banks.iter_mut().zip(&grads.banks) {
            axpy(-learning_rate, &g.weights, &mut b.weights);
            axpy(-learning_rate, &g.biases, &mut b.biases);
        }
        self.dense.weights.axpy(-learning_rate, &grads.dense_weights)?;
        axpy(-learning_rate, &grads.dense_biases, &mut self.dense.biases);
        if self.embedding.trainable {
            for (&row, g) in &grads.embedding {
                if row != PAD {
                    axpy(-learning_rate, g, self.embedding.matrix.row_mut(row));
                }
            }
        }
        Ok(())
    }
}

/// Looks up each index; padding rows come out zero.
pub fn embed(doc: &EncodedDocument, table: &EmbeddingTable) -> Result<Matrix> {
    let d = table.dim();
    let mut m = Matrix::zeros(doc.indices.len(), d);
    for (i, &idx) in doc.indices.iter().enumerate() {
        if idx >= table.rows() {
            return Err(Error::Corruption(format!(
                "token index {idx} at position {i} outside embedding table of {} rows",
                table.rows()
            )));
        }
        if idx != PAD {
            m.row_mut(i).copy_from_slice(table.row(idx));
        }
    }
    Ok(m)
}

fn conv_pre_activation(x: &Matrix, bank: &ConvFilterBank) -> Result<Matrix> {
    if x.cols() != bank.dim {
        return Err(Error::dim(format!("input width {} but filters span {}", x.cols(), bank.dim)));
    }
    if x.rows() < bank.height {
        return Err(Error::Config(format!("input of {} rows is shorter than filter height {}", x.rows(), bank.height)));
    }
    let steps = x.rows() - bank.height + 1;
    let w = bank.window();
    let data = x.as_slice();
    let mut out = Matrix::zeros(steps, bank.count);
    for t in 0..steps {
        let window = &data[t * bank.dim..t * bank.dim + w];
        let row = out.row_mut(t);
        for (f, slot) in row.iter_mut().enumerate() {
            *slot = dot4(bank.filter(f), window) + bank.biases[f];
        }
    }
    Ok(out)
}

/// ReLU feature map of shape `(L − h + 1) × F`.
pub fn conv_forward(x: &Matrix, bank: &ConvFilterBank) -> Result<Matrix> {
    let mut m = conv_pre_activation(x, bank)?;
    for v in m.as_mut_slice() {
        *v = v.max(0.0);
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pooled {
    pub values: Vec<f64>,
    /// First time step achieving each maximum.
    pub argmax: Vec<usize>,
}

pub fn max_over_time(map: &Matrix) -> Pooled {
    assert!(map.rows() > 0, "empty feature map");
    let mut values = map.row(0).to_vec();
    let mut argmax = vec![0; map.cols()];
    for t in 1..map.rows() {
        for (f, &v) in map.row(t).iter().enumerate() {
            if v > values[f] {
                values[f] = v;
                argmax[f] = t;
            }
        }
    }
    Pooled { values, argmax }
}

pub fn dense_logits(features: &[f64], dense: &DenseLayer) -> Result<Vec<f64>> {
    if features.len() != dense.inputs() {
        return Err(Error::dim(format!("dense layer takes {} features, got {}", dense.inputs(), features.len())));
    }
    let mut z = dense.biases.clone();
    for (i, &x) in features.iter().enumerate() {
        if x != 0.0 {
            axpy(x, dense.weights.row(i), &mut z);
        }
    }
    Ok(z)
}

/// `softmax(Wᵀ·features + b)`.
pub fn dense_softmax(features: &[f64], dense: &DenseLayer) -> Result<Vec<f64>> {
    Ok(softmax(&dense_logits(features, dense)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over patterns of Σⱼ (oⱼ − yⱼ)².
    #[default]
    SquaredError,
    /// Mean over patterns of −ln o_label.
    CrossEntropy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingLoss {
    pub value: f64,
    /// Number of patterns the mean was taken over.
    pub patterns: usize,
    pub kind: LossKind,
}

/// Cost of a batch of output rows against one-hot target rows, averaged
/// over the batch.
pub fn loss(outputs: &Matrix, targets: &Matrix, kind: LossKind) -> Result<TrainingLoss> {
    if outputs.shape() != targets.shape() {
        return Err(Error::dim(format!("outputs {:?} vs targets {:?}", outputs.shape(), targets.shape())));
    }
    let p = outputs.rows();
    if p == 0 {
        return Err(Error::arg("loss of an empty batch"));
    }
    let total: f64 = match kind {
        LossKind::SquaredError => {
            outputs.as_slice().iter().zip(targets.as_slice()).map(|(o, y)| (o - y) * (o - y)).sum()
        }
        LossKind::CrossEntropy => {
            let mut s = 0.0;
            for (o, y) in outputs.iter_rows().zip(targets.iter_rows()) {
                let j = y
                    .iter()
                    .position(|&v| v == 1.0)
                    .ok_or_else(|| Error::arg("cross-entropy targets must be one-hot"))?;
                if !(o[j] > 0.0) {
                    return Err(Error::Numeric(format!("output probability {} is not positive", o[j])));
                }
                s -= o[j].ln();
            }
            s
        }
    };
    Ok(TrainingLoss { value: total / p as f64, patterns: p, kind })
}

pub fn one_hot(labels: &[Label]) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), CLASSES);
    for (i, l) in labels.iter().enumerate() {
        m.set(i, l.index(), 1.0);
    }
    m
}

/// Per-example forward state retained for backpropagation.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleCache {
    pub indices: Vec<usize>,
    /// Pooled ReLU activations, banks concatenated.
    pub pooled: Vec<f64>,
    /// Time step of each pooled maximum, banks concatenated.
    pub argmax: Vec<usize>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub examples: Vec<ExampleCache>,
    max_len: usize,
    dim: usize,
    bank_shapes: Vec<(usize, usize)>,
}

impl ForwardCache {
    pub fn outputs(&self) -> Matrix {
        let rows: Vec<&[f64]> = self.examples.iter().map(|e| e.probabilities.as_slice()).collect();
        Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, CLASSES))
    }

    fn matches(&self, params: &NetworkParams) -> bool {
        self.max_len == params.max_len
            && self.dim == params.embedding.dim()
            && self.bank_shapes.iter().copied().eq(params.banks.iter().map(|b| (b.height, b.count)))
    }
}

fn forward_one(params: &NetworkParams, doc: &EncodedDocument) -> Result<ExampleCache> {
    if doc.indices.len() != params.max_len {
        return Err(Error::dim(format!(
            "document padded to {} but the network expects {}",
            doc.indices.len(),
            params.max_len
        )));
    }
    let x = embed(doc, &params.embedding)?;
    let mut pooled = Vec::with_capacity(params.feature_len());
    let mut argmax = Vec::with_capacity(params.feature_len());
    for bank in &params.banks {
        let p = max_over_time(&conv_forward(&x, bank)?);
        pooled.extend(p.values);
        argmax.extend(p.argmax);
    }
    let logits = dense_logits(&pooled, &params.dense)?;
    let probabilities = softmax(&logits);
    Ok(ExampleCache { indices: doc.indices.clone(), pooled, argmax, logits, probabilities })
}

/// Forward pass over a batch. Examples may run in parallel; the cache
/// keeps input order.
pub fn forward<D: AsRef<EncodedDocument> + Sync>(
    params: &NetworkParams,
    docs: &[D],
    exec: Exec,
) -> Result<ForwardCache> {
    let examples = map_slice(exec, docs, |d| forward_one(params, d.as_ref())).into_iter().collect::<Result<_>>()?;
    Ok(ForwardCache {
        examples,
        max_len: params.max_len,
        dim: params.embedding.dim(),
        bank_shapes: params.banks.iter().map(|b| (b.height, b.count)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    /// Sparse rows of the embedding gradient; empty for frozen tables.
    pub embedding: BTreeMap<usize, Vec<f64>>,
    pub banks: Vec<BankGradient>,
    pub dense_weights: Matrix,
    pub dense_biases: Vec<f64>,
}

impl Gradients {
    /// Same layout as [`NetworkParams::to_flat`].
    pub fn to_flat(&self, params: &NetworkParams, with_embedding: bool) -> Vec<f64> {
        let mut v = Vec::new();
        if with_embedding {
            let d = params.embedding.dim();
            for row in 1..params.embedding.rows() {
                match self.embedding.get(&row) {
                    Some(g) => v.extend_from_slice(g),
                    None => v.extend(std::iter::repeat_n(0.0, d)),
                }
            }
        }
        for b in &self.banks {
            v.extend_from_slice(&b.weights);
            v.extend_from_slice(&b.biases);
        }
        v.extend_from_slice(self.dense_weights.as_slice());
        v.extend_from_slice(&self.dense_biases);
        v
    }
}

/// Gradient of the batch loss with respect to the network output logits.
fn logit_gradient(probs: &[f64], target: Label, kind: LossKind, patterns: f64) -> Vec<f64> {
    let y = |j: usize| if j == target.index() { 1.0 } else { 0.0 };
    match kind {
        LossKind::CrossEntropy => probs.iter().enumerate().map(|(j, &o)| (o - y(j)) / patterns).collect(),
        LossKind::SquaredError => {
            // dE/do_j, then through the softmax Jacobian
            let g: Vec<f64> = probs.iter().enumerate().map(|(j, &o)| 2.0 * (o - y(j)) / patterns).collect();
            let s: f64 = probs.iter().zip(&g).map(|(o, g)| o * g).sum();
            probs.iter().zip(&g).map(|(o, g)| o * (g - s)).collect()
        }
    }
}

/// Exact gradients of the mean batch loss. Filter gradients flow only
/// through the pooled argmax positions of active (positive) units.
/// Accumulation runs in example order.
pub fn backward(params: &NetworkParams, cache: &ForwardCache, targets: &[Label], kind: LossKind) -> Result<Gradients> {
    if !cache.matches(params) {
        return Err(Error::Cache("forward cache was produced by a differently shaped network".into()));
    }
    if targets.len() != cache.examples.len() {
        return Err(Error::Cache(format!(
            "{} targets for a cache of {} examples",
            targets.len(),
            cache.examples.len()
        )));
    }
    let patterns = cache.examples.len() as f64;
    let d = params.embedding.dim();
    let table = &params.embedding;
    let mut grads = Gradients {
        embedding: BTreeMap::new(),
        banks: params
            .banks
            .iter()
            .map(|b| BankGradient { weights: vec![0.0; b.weights.len()], biases: vec![0.0; b.count] })
            .collect(),
        dense_weights: Matrix::zeros(params.dense.inputs(), params.dense.outputs()),
        dense_biases: vec![0.0; params.dense.outputs()],
    };

    for (ex, &target) in cache.examples.iter().zip(targets) {
        let dz = logit_gradient(&ex.probabilities, target, kind, patterns);
        axpy(1.0, &dz, &mut grads.dense_biases);
        let mut feature = 0;
        for (bank, bg) in params.banks.iter().zip(grads.banks.iter_mut()) {
            let w = bank.window();
            for f in 0..bank.count {
                let g = feature + f;
                let x = ex.pooled[g];
                if x != 0.0 {
                    axpy(x, &dz, grads.dense_weights.row_mut(g));
                }
                if x <= 0.0 {
                    continue;
                }
                let dpre: f64 = params.dense.weights.row(g).iter().zip(&dz).map(|(w, z)| w * z).sum();
                if dpre == 0.0 {
                    continue;
                }
                let t = ex.argmax[g];
                bg.biases[f] += dpre;
                let gw = &mut bg.weights[f * w..(f + 1) * w];
                let filter = bank.filter(f);
                for i in 0..bank.height {
                    let idx = ex.indices[t + i];
                    if idx == PAD {
                        continue;
                    }
                    axpy(dpre, table.row(idx), &mut gw[i * d..(i + 1) * d]);
                    if table.trainable {
                        let row = grads.embedding.entry(idx).or_insert_with(|| vec![0.0; d]);
                        axpy(dpre, &filter[i * d..(i + 1) * d], row);
                    }
                }
            }
            feature += bank.count;
        }
    }
    Ok(grads)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// `[p(non_toxic), p(toxic)]`.
    pub probabilities: Vec<f64>,
}

pub fn predict(params: &NetworkParams, doc: &EncodedDocument) -> Result<Prediction> {
    let ex = forward_one(params, doc)?;
    Ok(to_prediction(ex.probabilities))
}

pub fn predict_batch(params: &NetworkParams, docs: &[EncodedDocument], exec: Exec) -> Result<Vec<Prediction>> {
    map_slice(exec, docs, |d| predict(params, d)).into_iter().collect()
}

fn to_prediction(probabilities: Vec<f64>) -> Prediction {
    // ties go to class 0
    let label = if probabilities[1] > probabilities[0] { Label::Toxic } else { Label::NonToxic };
    Prediction { label, probabilities }
}
