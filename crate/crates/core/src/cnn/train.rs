use serde::{Deserialize, Serialize};

use super::{backward, forward, loss, one_hot, Architecture, LossKind, NetworkParams};
use crate::corpus::Label;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::{streams, SeededRng};
use crate::textprep::EncodedDocument;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { batch_size: 64, learning_rate: 0.005, epochs: 10, seed: 0, loss: LossKind::SquaredError }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    /// Mean per-pattern training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD. Batches are cut from a fresh seeded permutation every
/// epoch; the whole run is a pure function of its inputs and `config.seed`.
pub fn train(
    docs: &[EncodedDocument],
    labels: &[Label],
    table: EmbeddingTable,
    arch: &Architecture,
    config: &TrainingConfig,
    exec: Exec,
) -> Result<TrainOutcome> {
    config.validate()?;
    if docs.is_empty() {
        return Err(Error::arg("no training documents"));
    }
    if docs.len() != labels.len() {
        return Err(Error::dim(format!("{} documents but {} labels", docs.len(), labels.len())));
    }
    let max_len = docs[0].max_len();
    if let Some(bad) = docs.iter().position(|d| d.max_len() != max_len) {
        return Err(Error::dim(format!("document {bad} is padded to a different length")));
    }
    let mut init_rng = SeededRng::substream(config.seed, streams::WEIGHT_INIT);
    let mut params = NetworkParams::init(table, arch, max_len, &mut init_rng)?;
    let mut shuffle_rng = SeededRng::substream(config.seed, streams::BATCH_SHUFFLE);

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = shuffle_rng.permutation(docs.len());
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&EncodedDocument> = chunk.iter().map(|&i| &docs[i]).collect();
            let targets: Vec<Label> = chunk.iter().map(|&i| labels[i]).collect();
            let cache = forward(&params, &batch, exec)?;
            let e = loss(&cache.outputs(), &one_hot(&targets), config.loss)?;
            if !e.value.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1, batch: b + 1, loss: e.value });
            }
            total += e.value * chunk.len() as f64;
            let grads = backward(&params, &cache, &targets, config.loss)?;
            params.sgd_step(&grads, config.learning_rate)?;
        }
        let mean = total / docs.len() as f64;
        log::debug!("epoch {}: loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(TrainOutcome { params, epoch_losses })
}
