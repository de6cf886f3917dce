use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::Dimension(format!(
                "{} predictions for {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (1, 1) => c.tp += 1,
                (1, _) => c.fp += 1,
                (_, 1) => c.fn_ += 1,
                _ => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn correct(&self) -> usize {
        self.tp + self.tn
    }
}

/// Threshold-0.5 classification metrics.
///
/// Ratios with a zero denominator are reported as 0 and named in
/// `degenerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Fraction of true class-0 samples predicted 0.
    pub class0_accuracy: f64,
    /// Fraction of true class-1 samples predicted 1 (same as recall).
    pub class1_accuracy: f64,
    pub confusion: Confusion,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, flags: &mut Vec<String>) -> f64 {
    if den == 0 {
        flags.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let c = confusion;
        let mut flags = Vec::new();
        let accuracy = ratio(c.correct(), c.total(), "accuracy", &mut flags);
        let precision = ratio(c.tp, c.tp + c.fp, "precision", &mut flags);
        let recall = ratio(c.tp, c.tp + c.fn_, "recall", &mut flags);
        let class0_accuracy = ratio(c.tn, c.tn + c.fp, "class0_accuracy", &mut flags);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            flags.push("f1".into());
            0.0
        };
        Self {
            accuracy,
            precision,
            recall,
            f1,
            class0_accuracy,
            class1_accuracy: recall,
            confusion,
            degenerate: flags,
        }
    }

    pub fn from_predictions(predicted: &[u8], actual: &[u8]) -> Result<Self> {
        Ok(Self::from_confusion(Confusion::from_predictions(
            predicted, actual,
        )?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub count0: usize,
    pub count1: usize,
    pub fraction0: f64,
    pub fraction1: f64,
}

pub fn class_distribution(labels: &[u8]) -> Result<ClassDistribution> {
    if labels.is_empty() {
        return Err(Error::Degenerate(
            "class distribution of an empty dataset".into(),
        ));
    }
    let count1 = labels.iter().filter(|&&l| l == 1).count();
    let count0 = labels.len() - count1;
    let n = labels.len() as f64;
    Ok(ClassDistribution {
        count0,
        count1,
        fraction0: count0 as f64 / n,
        fraction1: count1 as f64 / n,
    })
}
