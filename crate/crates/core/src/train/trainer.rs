use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::dataset::Dataset;
use crate::embed::EmbeddingMatrix;
use crate::net::{
    classify, read_checkpoint, write_checkpoint, Direction, DropoutMasks, NetConfig, Network,
    Sample, DEFAULT_LEARNING_RATE,
};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub dropout: f64,
    pub batch_size: usize,
    pub hidden_units: usize,
    pub direction: Direction,
    pub num_layers: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub forget_bias_one: bool,
    pub freeze_embeddings: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            dropout: 0.2,
            batch_size: 32,
            hidden_units: 100,
            direction: Direction::Uni,
            num_layers: 1,
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: 10,
            forget_bias_one: false,
            freeze_embeddings: false,
        }
    }
}

impl Hyperparams {
    pub fn net_config(&self, seed: u64) -> NetConfig {
        NetConfig {
            hidden_units: self.hidden_units,
            dropout: self.dropout,
            direction: self.direction,
            num_layers: self.num_layers,
            seed,
            forget_bias_one: self.forget_bias_one,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.net_config(0).validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "batch size must be at least 1".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub epochs: Vec<EpochStats>,
    /// Every epoch (1-based) that reached the maximum validation accuracy.
    pub best_epochs: Vec<usize>,
    pub best_validation_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<Metrics>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub result: TrialResult,
    /// Parameters from the first epoch with the best validation accuracy.
    pub model: Network,
    pub final_model: Network,
}

fn check_compatible(data: &Dataset, vocab_size: usize, what: &str) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Degenerate(format!("{what} set is empty")));
    }
    if data.vocab_size != vocab_size {
        return Err(Error::ConfigMismatch(format!(
            "{what} set was built for vocabulary size {}, model has {vocab_size}",
            data.vocab_size
        )));
    }
    Ok(())
}

/// Threshold-0.5 metrics of `net` on `data`.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<Metrics> {
    check_compatible(data, net.embedding.vocab_size(), "evaluation")?;
    let seqs: Vec<&[u32]> = data
        .sequences
        .iter()
        .map(|s| s.indices.as_slice())
        .collect();
    let predicted: Vec<u8> = net.predict_many(&seqs)?.into_iter().map(classify).collect();
    Metrics::from_predictions(&predicted, &data.labels())
}

/// [`evaluate`] after checking that `data` was prepared the same way as the
/// model's training data.
pub fn evaluate_checked(net: &Network, meta: &ModelMeta, data: &Dataset) -> Result<Metrics> {
    if data.padded_len != meta.padded_len {
        return Err(Error::ConfigMismatch(format!(
            "dataset padded length {} differs from the model's {}",
            data.padded_len, meta.padded_len
        )));
    }
    evaluate(net, data)
}

/// Mini-batch SGD over `train` with a per-epoch seeded shuffle. Validation
/// accuracy is recorded after every epoch.
pub fn train_model(
    train: &Dataset,
    validation: &Dataset,
    hp: &Hyperparams,
    embedding: &EmbeddingMatrix,
    seed: u64,
) -> Result<TrainOutcome> {
    hp.validate()?;
    check_compatible(train, embedding.vocab_size(), "training")?;
    check_compatible(validation, embedding.vocab_size(), "validation")?;

    let mut embedding = embedding.clone();
    embedding.trainable = !hp.freeze_embeddings;
    let mut net = Network::new(hp.net_config(seed::derive(seed, "init")), embedding)?;
    let mut shuffle_rng = seed::rng(seed, "shuffle");
    let mut dropout_rng = seed::rng(seed, "dropout");

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(hp.epochs);
    let mut best: Option<(usize, Network)> = None;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, ids) in order.chunks(hp.batch_size).enumerate() {
            let batch: Vec<Sample<'_>> = ids
                .iter()
                .map(|&i| Sample {
                    indices: &train.sequences[i].indices,
                    label: train.sequences[i].label,
                })
                .collect();
            let masks = if hp.dropout > 0.0 {
                Some(
                    batch
                        .iter()
                        .map(|s| {
                            DropoutMasks::sample(&net.config, s.indices.len(), &mut dropout_rng)
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            } else {
                None
            };
            let (loss, grads) = net.loss_and_gradients(&batch, masks.as_deref())?;
            let diverged = Error::Diverged {
                epoch,
                batch: b + 1,
                loss,
            };
            if !loss.is_finite() {
                return Err(diverged);
            }
            match net.sgd_step(&grads, hp.learning_rate) {
                Err(Error::NonFinite(_)) => return Err(diverged),
                other => other?,
            }
            loss_sum += loss * batch.len() as f64;
        }

        let metrics = evaluate(&net, validation)?;
        let correct = metrics.confusion.correct();
        epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            validation_accuracy: metrics.accuracy,
        });
        if best.as_ref().is_none_or(|(c, _)| correct > *c) {
            best = Some((correct, net.clone()));
        }
    }

    let (best_correct, model) = best.expect("at least one epoch");
    let best_validation_accuracy = best_correct as f64 / validation.len() as f64;
    let best_epochs = epochs
        .iter()
        .filter(|e| e.validation_accuracy == best_validation_accuracy)
        .map(|e| e.epoch)
        .collect();
    Ok(TrainOutcome {
        result: TrialResult {
            hyperparams: hp.clone(),
            seed,
            epochs,
            best_epochs,
            best_validation_accuracy,
            test: None,
        },
        model,
        final_model: net,
    })
}

/// JSON sidecar stored next to a binary checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub version: String,
    pub config: NetConfig,
    pub padded_len: usize,
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    #[serde(default)]
    pub run: serde_json::Value,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` (binary) and `path` with a `.json` extension (sidecar).
pub fn save_model(net: &Network, meta: &ModelMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_checkpoint(net, path)?;
    let side = sidecar_path(path);
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Network, ModelMeta)> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: ModelMeta = serde_json::from_str(&text)?;
    let net = read_checkpoint(path, &meta.config)?;
    if net.embedding.vocab_size() != meta.vocab_size || net.embedding.dim() != meta.embedding_dim {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint embedding is {}x{}, sidecar says {}x{}",
            net.embedding.vocab_size(),
            net.embedding.dim(),
            meta.vocab_size,
            meta.embedding_dim
        )));
    }
    Ok((net, meta))
}
