use rand::Rng;

use super::NetConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Infer,
}

/// Inverted dropout: in training each entry is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; inference is the
/// identity.
pub fn dropout_apply(
    v: &[f64],
    rate: f64,
    mode: DropoutMode,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    check_rate(rate)?;
    match mode {
        DropoutMode::Infer => Ok(v.to_vec()),
        DropoutMode::Train => {
            let mask = sample_mask(v.len(), rate, rng);
            Ok(v.iter().zip(&mask).map(|(x, m)| x * m).collect())
        }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )))
    }
}

/// Multiplicative mask: each entry is `0` or `1 / (1 - rate)`.
fn sample_mask(len: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    if rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Dropout masks for one sample's forward pass.
///
/// `hidden[l][k]` masks step `k` of every non-final layer `l` before it feeds
/// the next layer; `output` masks the final layer's summary vector before the
/// output node.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub hidden: Vec<Vec<Vec<f64>>>,
    pub output: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample(config: &NetConfig, steps: usize, rng: &mut impl Rng) -> Result<Self> {
        check_rate(config.dropout)?;
        let dim = config.output_dim();
        let hidden = (1..config.num_layers)
            .map(|_| {
                (0..steps)
                    .map(|_| sample_mask(dim, config.dropout, rng))
                    .collect()
            })
            .collect();
        Ok(Self {
            hidden,
            output: sample_mask(dim, config.dropout, rng),
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(5)
    }

    #[test]
    fn zero_rate_and_inference_are_identity() {
        let v = vec![1.5, -2.0, 0.25];
        assert_eq!(
            dropout_apply(&v, 0.0, DropoutMode::Train, &mut rng()).unwrap(),
            v
        );
        assert_eq!(
            dropout_apply(&v, 0.0, DropoutMode::Infer, &mut rng()).unwrap(),
            v
        );
        assert_eq!(
            dropout_apply(&v, 0.7, DropoutMode::Infer, &mut rng()).unwrap(),
            v
        );
    }

    #[test]
    fn expectation_preserved() {
        let v = vec![1.0; 1_000_000];
        let out = dropout_apply(&v, 0.4, DropoutMode::Train, &mut rng()).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        let dropped = out.iter().filter(|&&x| x == 0.0).count() as f64 / out.len() as f64;
        assert!((dropped - 0.4).abs() < 0.005);
    }

    #[test]
    fn rate_out_of_range() {
        assert!(dropout_apply(&[1.0], 1.0, DropoutMode::Train, &mut rng()).is_err());
        assert!(dropout_apply(&[1.0], -0.1, DropoutMode::Infer, &mut rng()).is_err());
    }

    #[test]
    fn mask_shapes() {
        let cfg = NetConfig {
            hidden_units: 3,
            direction: super::super::Direction::Bi,
            num_layers: 2,
            ..NetConfig::default()
        };
        let m = DropoutMasks::sample(&cfg, 4, &mut rng()).unwrap();
        assert_eq!(m.hidden.len(), 1);
        assert_eq!(m.hidden[0].len(), 4);
        assert_eq!(m.hidden[0][0].len(), 6);
        assert_eq!(m.output.len(), 6);
    }
}
