use rand::Rng;

use super::sigmoid;
use crate::{Error, Result};

/// Probabilities are clamped into `[LOSS_EPSILON, 1 - LOSS_EPSILON]` before
/// taking logs.
pub const LOSS_EPSILON: f64 = 1e-12;

/// Output node weights: `w` has one entry per summary feature.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Vec<f64>,
    pub b: f64,
}

impl DenseParams {
    pub fn zeros(n: usize) -> Self {
        Self {
            w: vec![0.0; n],
            b: 0.0,
        }
    }

    pub fn glorot(n: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (n + 1) as f64).sqrt();
        Self {
            w: (0..n).map(|_| rng.gen_range(-limit..=limit)).collect(),
            b: 0.0,
        }
    }

    pub(crate) fn activation(&self, v: &[f64]) -> f64 {
        self.b + self.w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// `sigma(w . h + b)`.
pub fn output_node(h_final: &[f64], params: &DenseParams) -> Result<f64> {
    if h_final.len() != params.w.len() {
        return Err(Error::Dimension(format!(
            "output node expects {} inputs, got {}",
            params.w.len(),
            h_final.len()
        )));
    }
    Ok(sigmoid(params.activation(h_final)))
}

/// Class 1 when the probability reaches 0.5.
pub fn classify(probability: f64) -> u8 {
    u8::from(probability >= 0.5)
}

pub(crate) fn sample_loss(prob: f64, label: u8) -> f64 {
    let p = prob.clamp(LOSS_EPSILON, 1.0 - LOSS_EPSILON);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Derivative of the clamped per-sample loss with respect to the output
/// activation `z`.
pub(crate) fn sample_loss_grad(prob: f64, label: u8) -> f64 {
    if !(LOSS_EPSILON..=1.0 - LOSS_EPSILON).contains(&prob) {
        0.0
    } else {
        prob - f64::from(label)
    }
}

/// Mean binary cross-entropy.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} probabilities but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Degenerate("empty batch".into()));
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| sample_loss(p, y))
        .sum();
    Ok(total / probs.len() as f64)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn output_node_values() {
        let p = output_node(&[0.0, 0.0], &DenseParams::zeros(2)).unwrap();
        assert_eq!(p, 0.5);
        assert_eq!(classify(p), 1);

        let p = output_node(
            &[0.3],
            &DenseParams {
                w: vec![0.0],
                b: -20.0,
            },
        )
        .unwrap();
        assert!(p < 1e-8);
        assert_eq!(classify(p), 0);

        let p = output_node(
            &[1.0],
            &DenseParams {
                w: vec![1.0],
                b: 0.0,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(p, 0.731_058_578_630_004_9, epsilon = 1e-9);

        assert!(output_node(&[1.0, 2.0], &DenseParams::zeros(1)).is_err());
    }

    #[test]
    fn bce_values() {
        assert!(bce_loss(&[1.0], &[1]).unwrap() <= 1e-12);
        assert_abs_diff_eq!(
            bce_loss(&[0.9, 0.1], &[1, 0]).unwrap(),
            0.105_360_515_657_826_28,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            bce_loss(&[0.5], &[0]).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert!(bce_loss(&[0.0], &[1]).unwrap().is_finite());
        assert!(bce_loss(&[0.5, 0.5], &[1]).is_err());
    }
}
