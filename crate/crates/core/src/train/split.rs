use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Seeded shuffle of all sequences, then partition. Subsets of the same
    /// day can land in different partitions.
    Random,
    /// Partition in (date, subset) order: train on the earliest sequences,
    /// validate on the next block, test on the latest.
    Chronological,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(SplitMode::Random),
            "chronological" => Ok(SplitMode::Chronological),
            other => Err(Error::InvalidArgument(format!(
                "unknown split mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
    pub mode: SplitMode,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            test: 0.2,
            validation: 0.1,
            mode: SplitMode::Random,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    pub validation: Dataset,
}

pub const MIN_SEQUENCES: usize = 10;

/// Test and validation sizes are `floor(n * fraction)`; the remainder goes to
/// training.
pub fn split_dataset(data: &Dataset, spec: &SplitSpec) -> Result<Splits> {
    let fractions = [spec.train, spec.test, spec.validation];
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be in [0, 1] and sum to 1, got {fractions:?}"
        )));
    }
    let n = data.len();
    if n < MIN_SEQUENCES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SEQUENCES} sequences to split, got {n}"
        )));
    }
    let n_test = (n as f64 * spec.test + 1e-9).floor() as usize;
    let n_val = (n as f64 * spec.validation + 1e-9).floor() as usize;
    let n_train = n - n_test - n_val;
    if n_train == 0 || n_test == 0 || n_val == 0 {
        return Err(Error::Degenerate(format!(
            "empty partition: train {n_train}, test {n_test}, validation {n_val}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let take = |ids: &[usize]| {
        data.with_sequences(ids.iter().map(|&i| data.sequences[i].clone()).collect())
    };
    match spec.mode {
        SplitMode::Random => {
            order.shuffle(&mut seed::rng(spec.seed, "split"));
            Ok(Splits {
                train: take(&order[..n_train]),
                test: take(&order[n_train..n_train + n_test]),
                validation: take(&order[n_train + n_test..]),
            })
        }
        SplitMode::Chronological => {
            order.sort_by_key(|&i| (data.sequences[i].date, data.sequences[i].subset));
            Ok(Splits {
                train: take(&order[..n_train]),
                validation: take(&order[n_train..n_train + n_val]),
                test: take(&order[n_train + n_val..]),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use chrono::NaiveDate;

    use super::*;
    use crate::dataset::LabeledSequence;

    fn data(n: usize) -> Dataset {
        let sequences = (0..n)
            .map(|i| LabeledSequence {
                date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap()
                    + chrono::Days::new((i / 100) as u64),
                subset: i % 100,
                label: (i % 2) as u8,
                indices: vec![(i % 5 + 1) as u32, 0],
            })
            .collect();
        Dataset {
            padded_len: 2,
            vocab_size: 6,
            sequences,
        }
    }

    fn key(s: &LabeledSequence) -> (NaiveDate, usize) {
        (s.date, s.subset)
    }

    #[test]
    fn sizes() {
        let s = split_dataset(&data(4800), &SplitSpec::default()).unwrap();
        assert_eq!(
            (s.train.len(), s.test.len(), s.validation.len()),
            (3360, 960, 480)
        );
        let s = split_dataset(&data(10), &SplitSpec::default()).unwrap();
        assert_eq!((s.train.len(), s.test.len(), s.validation.len()), (7, 2, 1));
        let s = split_dataset(&data(7200), &SplitSpec::default()).unwrap();
        assert_eq!(
            (s.train.len(), s.test.len(), s.validation.len()),
            (5040, 1440, 720)
        );
    }

    #[test]
    fn deterministic_and_disjoint() {
        for mode in [SplitMode::Random, SplitMode::Chronological] {
            let spec = SplitSpec {
                mode,
                seed: 3,
                ..SplitSpec::default()
            };
            let d = data(537);
            let a = split_dataset(&d, &spec).unwrap();
            let b = split_dataset(&d, &spec).unwrap();
            assert_eq!(a, b);
            let mut all = HashSet::new();
            for part in [&a.train, &a.test, &a.validation] {
                for s in &part.sequences {
                    assert!(all.insert(key(s)));
                }
            }
            assert_eq!(all.len(), d.len());
        }
        let other = split_dataset(
            &data(537),
            &SplitSpec {
                seed: 4,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        let base = split_dataset(
            &data(537),
            &SplitSpec {
                seed: 3,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        assert_ne!(other.train, base.train);
    }

    #[test]
    fn chronological_orders_partitions() {
        let spec = SplitSpec {
            mode: SplitMode::Chronological,
            ..SplitSpec::default()
        };
        let s = split_dataset(&data(1000), &spec).unwrap();
        let last_train = s.train.sequences.iter().map(key).max().unwrap();
        let first_val = s.validation.sequences.iter().map(key).min().unwrap();
        let last_val = s.validation.sequences.iter().map(key).max().unwrap();
        let first_test = s.test.sequences.iter().map(key).min().unwrap();
        assert!(last_train < first_val && last_val < first_test);
    }

    #[test]
    fn errors() {
        assert!(split_dataset(&data(9), &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train: 0.5,
            ..SplitSpec::default()
        };
        assert!(split_dataset(&data(100), &bad).is_err());
        let no_val = SplitSpec {
            train: 0.8,
            test: 0.2,
            validation: 0.0,
            ..SplitSpec::default()
        };
        assert!(split_dataset(&data(100), &no_val).is_err());
    }
}
