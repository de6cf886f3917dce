use rand::Rng;

use super::cell::{scan, scan_backward, LstmParams, StepCache};
use super::{Direction, NetConfig};
use crate::{Error, Result};

/// One LSTM layer: a left-to-right scan and, when bidirectional, an
/// independent right-to-left scan.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
}

pub(crate) struct LayerCache {
    pub fwd: Vec<StepCache>,
    /// In scan order, i.e. `bwd[j]` read input position `T - 1 - j`.
    pub bwd: Option<Vec<StepCache>>,
}

impl LstmLayer {
    pub fn new(input_dim: usize, config: &NetConfig, rng: &mut impl Rng) -> Self {
        let fb = if config.forget_bias_one { 1.0 } else { 0.0 };
        let h = config.hidden_units;
        let forward = LstmParams::glorot(input_dim, h, fb, rng);
        let backward =
            (config.direction == Direction::Bi).then(|| LstmParams::glorot(input_dim, h, fb, rng));
        Self { forward, backward }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            forward: LstmParams::zeros(self.forward.input_dim, self.forward.hidden),
            backward: self
                .backward
                .as_ref()
                .map(|b| LstmParams::zeros(b.input_dim, b.hidden)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.hidden() * if self.backward.is_some() { 2 } else { 1 }
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &LstmParams> {
        std::iter::once(&self.forward).chain(self.backward.as_ref())
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut LstmParams> {
        std::iter::once(&mut self.forward).chain(self.backward.as_mut())
    }

    pub(crate) fn run(&self, inputs: &[Vec<f64>]) -> LayerCache {
        let fwd = scan(inputs.iter().map(Vec::as_slice), &self.forward);
        let bwd = self
            .backward
            .as_ref()
            .map(|p| scan(inputs.iter().rev().map(Vec::as_slice), p));
        LayerCache { fwd, bwd }
    }
}

impl LayerCache {
    /// Per-step outputs: `[h_fwd[k]; h_bwd[k]]` where `h_bwd[k]` is the
    /// right-to-left state after reading position `k`.
    pub fn outputs(&self) -> Vec<Vec<f64>> {
        let t = self.fwd.len();
        (0..t)
            .map(|k| {
                let mut v = self.fwd[k].h.clone();
                if let Some(bwd) = &self.bwd {
                    v.extend_from_slice(&bwd[t - 1 - k].h);
                }
                v
            })
            .collect()
    }

    /// Each direction's final state: `[h_fwd[T-1]; h_bwd[0]]`.
    pub fn summary(&self) -> Vec<f64> {
        let mut v = self.fwd.last().map(|s| s.h.clone()).unwrap_or_default();
        if let Some(bwd) = &self.bwd {
            v.extend_from_slice(&bwd.last().expect("non-empty scan").h);
        }
        v
    }

    /// Backpropagate per-step output gradients (`d_out[k]` has the layer's
    /// output width). Returns gradients for the layer inputs.
    pub fn backward(
        &self,
        layer: &LstmLayer,
        d_out: &[Vec<f64>],
        grads: &mut LstmLayer,
    ) -> Vec<Vec<f64>> {
        let h = layer.hidden();
        let t = self.fwd.len();
        let d_fwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..h].to_vec()).collect();
        let mut dx = scan_backward(&self.fwd, &d_fwd, &layer.forward, &mut grads.forward);
        if let (Some(bwd), Some(params), Some(g)) =
            (&self.bwd, &layer.backward, grads.backward.as_mut())
        {
            let d_bwd: Vec<Vec<f64>> = (0..t).map(|j| d_out[t - 1 - j][h..].to_vec()).collect();
            let dx_b = scan_backward(bwd, &d_bwd, params, g);
            for (j, d) in dx_b.into_iter().enumerate() {
                for (a, b) in dx[t - 1 - j].iter_mut().zip(d) {
                    *a += b;
                }
            }
        }
        dx
    }
}

/// Run a stack of layers in inference mode and return the last layer's
/// per-step outputs (width `h`, or `2h` when bidirectional).
pub fn layer_forward(
    inputs: &[Vec<f64>],
    config: &NetConfig,
    layers: &[LstmLayer],
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::Degenerate("empty input sequence".into()));
    }
    if layers.len() != config.num_layers {
        return Err(Error::ConfigMismatch(format!(
            "config has {} layers, got {}",
            config.num_layers,
            layers.len()
        )));
    }
    let mut current: Vec<Vec<f64>> = inputs.to_vec();
    for (l, layer) in layers.iter().enumerate() {
        if current.iter().any(|x| x.len() != layer.input_dim()) {
            return Err(Error::Dimension(format!(
                "layer {l} expects inputs of width {}",
                layer.input_dim()
            )));
        }
        current = layer.run(&current).outputs();
    }
    Ok(current)
}
