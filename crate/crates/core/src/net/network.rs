use rayon::prelude::*;

use super::dropout::DropoutMasks;
use super::layer::{LayerCache, LstmLayer};
use super::output::{sample_loss, sample_loss_grad, DenseParams};
use super::{sigmoid, NetConfig};
use crate::embed::{accumulate_row, EmbeddingMatrix, RowGrads};
use crate::{seed, Error, Result};

/// Samples per work unit when computing batch gradients in parallel. Partial
/// sums are reduced in chunk order so the result does not depend on how
/// rayon schedules the chunks.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub indices: &'a [u32],
    pub label: u8,
}

/// Full network: embedding, LSTM stack and output node.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetConfig,
    pub embedding: EmbeddingMatrix,
    pub layers: Vec<LstmLayer>,
    pub dense: DenseParams,
}

/// Gradients shaped like the network's parameters. The embedding part is
/// row-sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LstmLayer>,
    pub dense: DenseParams,
    pub embedding: RowGrads,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    summary: Vec<f64>,
    prob: f64,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net.layers.iter().map(LstmLayer::zeros_like).collect(),
            dense: DenseParams::zeros(net.dense.w.len()),
            embedding: RowGrads::new(),
        }
    }

    fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (pa, pb) in a.params_mut().zip(b.params()) {
                pa.add_scaled(pb, 1.0);
            }
        }
        for (a, b) in self.dense.w.iter_mut().zip(&other.dense.w) {
            *a += b;
        }
        self.dense.b += other.dense.b;
        for (&i, g) in &other.embedding {
            accumulate_row(&mut self.embedding, i, g);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.params().all(|p| p.all_finite()))
            && self.dense.w.iter().all(|v| v.is_finite())
            && self.dense.b.is_finite()
            && self.embedding.values().flatten().all(|v| v.is_finite())
    }
}

impl Network {
    /// Glorot-uniform LSTM and output weights drawn from `config.seed`.
    pub fn new(config: NetConfig, embedding: EmbeddingMatrix) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(config.seed, "net-init");
        let mut layers = Vec::with_capacity(config.num_layers);
        let mut input_dim = embedding.dim();
        for _ in 0..config.num_layers {
            let layer = LstmLayer::new(input_dim, &config, &mut rng);
            input_dim = layer.output_dim();
            layers.push(layer);
        }
        let dense = DenseParams::glorot(config.output_dim(), &mut rng);
        Ok(Self {
            config,
            embedding,
            layers,
            dense,
        })
    }

    fn check_masks(&self, masks: &DropoutMasks, steps: usize) -> Result<()> {
        let dim = self.config.output_dim();
        let ok = masks.hidden.len() == self.layers.len() - 1
            && masks
                .hidden
                .iter()
                .all(|l| l.len() == steps && l.iter().all(|m| m.len() == dim))
            && masks.output.len() == dim;
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(
                "dropout masks do not match the network".into(),
            ))
        }
    }

    fn forward_cached(
        &self,
        indices: &[u32],
        masks: Option<&DropoutMasks>,
    ) -> Result<ForwardCache> {
        if indices.is_empty() {
            return Err(Error::Degenerate("empty input sequence".into()));
        }
        if let Some(m) = masks {
            self.check_masks(m, indices.len())?;
        }
        let mut inputs: Vec<Vec<f64>> = self
            .embedding
            .lookup(indices)?
            .into_iter()
            .map(<[f64]>::to_vec)
            .collect();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let cache = layer.run(&inputs);
            let is_last = l + 1 == self.layers.len();
            let next = if is_last {
                Vec::new()
            } else {
                let mut out = cache.outputs();
                if let Some(m) = masks {
                    for (v, mask) in out.iter_mut().zip(&m.hidden[l]) {
                        v.iter_mut().zip(mask).for_each(|(x, k)| *x *= k);
                    }
                }
                out
            };
            inputs = next;
            caches.push(cache);
        }
        let mut summary = caches.last().expect("at least one layer").summary();
        if let Some(m) = masks {
            summary.iter_mut().zip(&m.output).for_each(|(x, k)| *x *= k);
        }
        let prob = sigmoid(self.dense.activation(&summary));
        Ok(ForwardCache {
            layers: caches,
            summary,
            prob,
        })
    }

    /// Probability of class 1. `masks = None` is inference mode.
    pub fn forward(&self, indices: &[u32], masks: Option<&DropoutMasks>) -> Result<f64> {
        Ok(self.forward_cached(indices, masks)?.prob)
    }

    pub fn predict_proba(&self, indices: &[u32]) -> Result<f64> {
        self.forward(indices, None)
    }

    pub fn predict_many(&self, sequences: &[&[u32]]) -> Result<Vec<f64>> {
        sequences
            .par_iter()
            .map(|s| self.predict_proba(s))
            .collect()
    }

    /// Adds `dz`-scaled gradients of one sample into `grads`.
    fn backward_sample(
        &self,
        indices: &[u32],
        cache: &ForwardCache,
        masks: Option<&DropoutMasks>,
        dz: f64,
        grads: &mut Gradients,
    ) {
        for (g, s) in grads.dense.w.iter_mut().zip(&cache.summary) {
            *g += dz * s;
        }
        grads.dense.b += dz;

        let mut d_summary: Vec<f64> = self.dense.w.iter().map(|w| dz * w).collect();
        if let Some(m) = masks {
            d_summary
                .iter_mut()
                .zip(&m.output)
                .for_each(|(d, k)| *d *= k);
        }

        let steps = indices.len();
        let h = self.config.hidden_units;
        let width = self.config.output_dim();
        let mut d_out = vec![vec![0.0; width]; steps];
        d_out[steps - 1][..h].copy_from_slice(&d_summary[..h]);
        if width > h {
            d_out[0][h..].copy_from_slice(&d_summary[h..]);
        }

        for l in (0..self.layers.len()).rev() {
            let d_in = cache.layers[l].backward(&self.layers[l], &d_out, &mut grads.layers[l]);
            if l == 0 {
                for (&i, g) in indices.iter().zip(&d_in) {
                    accumulate_row(&mut grads.embedding, i, g);
                }
            } else {
                d_out = d_in;
                if let Some(m) = masks {
                    for (d, mask) in d_out.iter_mut().zip(&m.hidden[l - 1]) {
                        d.iter_mut().zip(mask).for_each(|(x, k)| *x *= k);
                    }
                }
            }
        }
    }

    /// Mean loss over the batch and its exact gradient (BPTT over every
    /// step, padding included). `masks` gives one dropout mask set per
    /// sample; `None` disables dropout.
    pub fn loss_and_gradients(
        &self,
        batch: &[Sample<'_>],
        masks: Option<&[DropoutMasks]>,
    ) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::Degenerate("empty batch".into()));
        }
        if let Some(m) = masks {
            if m.len() != batch.len() {
                return Err(Error::Dimension(format!(
                    "{} mask sets for {} samples",
                    m.len(),
                    batch.len()
                )));
            }
        }
        let m = batch.len() as f64;
        let partials: Vec<(f64, Gradients)> = batch
            .par_chunks(GRAD_CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut grads = Gradients::zeros_like(self);
                let mut loss = 0.0;
                for (j, sample) in chunk.iter().enumerate() {
                    let mask = masks.map(|all| &all[c * GRAD_CHUNK + j]);
                    let cache = self.forward_cached(sample.indices, mask)?;
                    loss += sample_loss(cache.prob, sample.label);
                    let dz = sample_loss_grad(cache.prob, sample.label) / m;
                    self.backward_sample(sample.indices, &cache, mask, dz, &mut grads);
                }
                Ok((loss, grads))
            })
            .collect::<Result<_>>()?;
        let mut iter = partials.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss += l;
            grads.add(&g);
        }
        Ok((loss / m, grads))
    }

    /// Mean loss only (no gradient bookkeeping).
    pub fn loss(&self, batch: &[Sample<'_>], masks: Option<&[DropoutMasks]>) -> Result<f64> {
        let mut total = 0.0;
        for (j, s) in batch.iter().enumerate() {
            let p = self.forward(s.indices, masks.map(|m| &m[j]))?;
            total += sample_loss(p, s.label);
        }
        Ok(total / batch.len() as f64)
    }

    /// `theta -= learning_rate * grad` for every trainable tensor. Nothing is
    /// changed if any gradient entry is non-finite.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (p, gp) in layer.params_mut().zip(g.params()) {
                p.add_scaled(gp, -learning_rate);
            }
        }
        for (w, g) in self.dense.w.iter_mut().zip(&grads.dense.w) {
            *w -= learning_rate * g;
        }
        self.dense.b -= learning_rate * grads.dense.b;
        self.embedding.apply(&grads.embedding, learning_rate);
        Ok(())
    }
}
