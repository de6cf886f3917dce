use std::cmp::Ordering;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::split::Splits;
use super::trainer::{evaluate, train_model, Hyperparams, TrialResult};
use crate::dataset::Dataset;
use crate::embed::EmbeddingMatrix;
use crate::net::{Direction, Network};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Dropout,
    BatchSize,
    HiddenUnits,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Dropout => "dropout",
            SweepParam::BatchSize => "batch_size",
            SweepParam::HiddenUnits => "hidden_units",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &Hyperparams, value: f64) -> Result<Hyperparams> {
        let mut hp = base.clone();
        match self {
            SweepParam::Dropout => hp.dropout = value,
            SweepParam::BatchSize | SweepParam::HiddenUnits => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "{} must be a positive integer, got {value}",
                        self.name()
                    )));
                }
                if self == SweepParam::BatchSize {
                    hp.batch_size = value as usize;
                } else {
                    hp.hidden_units = value as usize;
                }
            }
        }
        hp.validate()?;
        Ok(hp)
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropout" => Ok(SweepParam::Dropout),
            "batch" | "batch_size" => Ok(SweepParam::BatchSize),
            "hidden" | "hidden_units" => Ok(SweepParam::HiddenUnits),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub direction: Direction,
    pub parameter: SweepParam,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<TrialResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One trial per (direction, value), every other hyperparameter fixed at
/// `base`. All trials share `seed`. Failed trials are kept with their error.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    parameter: SweepParam,
    values: &[f64],
    directions: &[Direction],
    base: &Hyperparams,
    train: &Dataset,
    validation: &Dataset,
    embedding: &EmbeddingMatrix,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() || directions.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one value and one direction".into(),
        ));
    }
    let jobs: Vec<(Direction, f64)> = directions
        .iter()
        .flat_map(|&d| values.iter().map(move |&v| (d, v)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(direction, value)| {
            let outcome = Hyperparams {
                direction,
                ..base.clone()
            };
            let outcome = parameter
                .apply(&outcome, value)
                .and_then(|hp| train_model(train, validation, &hp, embedding, seed));
            let (result, error) = match outcome {
                Ok(o) => (Some(o.result), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                direction,
                parameter,
                value,
                result,
                error,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dropout: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub hidden_units: Vec<usize>,
    pub directions: Vec<Direction>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            dropout: vec![0.2, 0.3, 0.4, 0.5, 0.6],
            batch_size: vec![8, 16, 32, 64, 128],
            hidden_units: vec![100, 128, 256, 512],
            directions: vec![Direction::Uni],
        }
    }
}

impl Grid {
    /// Cartesian product in (direction, dropout, batch, hidden) order.
    pub fn combinations(&self, base: &Hyperparams) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &direction in &self.directions {
            for &dropout in &self.dropout {
                for &batch_size in &self.batch_size {
                    for &hidden_units in &self.hidden_units {
                        out.push(Hyperparams {
                            direction,
                            dropout,
                            batch_size,
                            hidden_units,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTrial {
    pub index: usize,
    pub seed: u64,
    pub hyperparams: Hyperparams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<TrialResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridReport {
    /// In combination order.
    pub trials: Vec<GridTrial>,
    /// Indices of successful trials, best first.
    pub ranking: Vec<usize>,
    pub best: Option<usize>,
    /// Test metrics of the best trial's best-epoch model.
    pub test: Option<Metrics>,
    #[serde(skip)]
    pub best_model: Option<Network>,
}

/// Higher validation accuracy first, then smaller hidden size, then larger
/// dropout, then earlier trial.
fn rank(a: (usize, &TrialResult), b: (usize, &TrialResult)) -> Ordering {
    let (ia, ra) = a;
    let (ib, rb) = b;
    rb.best_validation_accuracy
        .total_cmp(&ra.best_validation_accuracy)
        .then(
            ra.hyperparams
                .hidden_units
                .cmp(&rb.hyperparams.hidden_units),
        )
        .then(rb.hyperparams.dropout.total_cmp(&ra.hyperparams.dropout))
        .then(ia.cmp(&ib))
}

/// Trains every combination (trial `i` uses seed `seed + i`), ranks them on
/// validation accuracy and evaluates the winner on the test set once.
pub fn grid_search(
    grid: &Grid,
    base: &Hyperparams,
    splits: &Splits,
    embedding: &EmbeddingMatrix,
    seed: u64,
) -> Result<GridReport> {
    let combos = grid.combinations(base);
    if combos.is_empty() {
        return Err(Error::InvalidArgument("grid has no combinations".into()));
    }
    let leader: Mutex<Option<(usize, TrialResult, Network)>> = Mutex::new(None);

    let trials: Vec<GridTrial> = combos
        .into_par_iter()
        .enumerate()
        .map(|(index, hyperparams)| {
            let trial_seed = seed.wrapping_add(index as u64);
            let (result, error) = match train_model(
                &splits.train,
                &splits.validation,
                &hyperparams,
                embedding,
                trial_seed,
            ) {
                Ok(outcome) => {
                    let mut lead = leader.lock().expect("leader lock");
                    let better = lead.as_ref().is_none_or(|(i, r, _)| {
                        rank((index, &outcome.result), (*i, r)) == Ordering::Less
                    });
                    if better {
                        *lead = Some((index, outcome.result.clone(), outcome.model));
                    }
                    (Some(outcome.result), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            GridTrial {
                index,
                seed: trial_seed,
                hyperparams,
                result,
                error,
            }
        })
        .collect();

    let mut ranking: Vec<usize> = trials
        .iter()
        .filter(|t| t.result.is_some())
        .map(|t| t.index)
        .collect();
    ranking.sort_by(|&a, &b| {
        rank(
            (
                a,
                trials[a].result.as_ref().expect("ranked trial succeeded"),
            ),
            (
                b,
                trials[b].result.as_ref().expect("ranked trial succeeded"),
            ),
        )
    });

    let mut trials = trials;
    let mut report = GridReport {
        trials: Vec::new(),
        best: ranking.first().copied(),
        ranking,
        test: None,
        best_model: None,
    };
    if let Some((index, _, model)) = leader.into_inner().expect("leader lock") {
        debug_assert_eq!(Some(index), report.best);
        let metrics = evaluate(&model, &splits.test)?;
        if let Some(r) = trials[index].result.as_mut() {
            r.test = Some(metrics.clone());
        }
        report.test = Some(metrics);
        report.best_model = Some(model);
    }
    report.trials = trials;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::dataset::LabeledSequence;

    fn toy(n: usize, offset: usize) -> Dataset {
        let sequences = (0..n)
            .map(|i| {
                let label = u8::from((i * 7 + offset).is_multiple_of(3));
                LabeledSequence {
                    date: NaiveDate::from_ymd_opt(2016, 4, 1).unwrap(),
                    subset: i,
                    label,
                    indices: vec![3, 1 + label as u32, 4],
                }
            })
            .collect();
        Dataset {
            padded_len: 3,
            vocab_size: 5,
            sequences,
        }
    }

    fn splits() -> Splits {
        Splits {
            train: toy(24, 0),
            test: toy(9, 1),
            validation: toy(9, 2),
        }
    }

    fn base() -> Hyperparams {
        Hyperparams {
            epochs: 2,
            learning_rate: 0.05,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn default_grid_size() {
        assert_eq!(
            Grid::default().combinations(&Hyperparams::default()).len(),
            100
        );
        let both = Grid {
            directions: vec![Direction::Uni, Direction::Bi],
            ..Grid::default()
        };
        assert_eq!(both.combinations(&Hyperparams::default()).len(), 200);
    }

    #[test]
    fn single_combination() {
        let grid = Grid {
            dropout: vec![0.3],
            batch_size: vec![4],
            hidden_units: vec![3],
            directions: vec![Direction::Uni],
        };
        let emb = EmbeddingMatrix::random(5, 4, 0).unwrap();
        let r = grid_search(&grid, &base(), &splits(), &emb, 11).unwrap();
        assert_eq!(r.ranking, vec![0]);
        assert_eq!(r.best, Some(0));
        assert!(r.test.is_some());
        assert_eq!(r.trials[0].seed, 11);
        assert_eq!(r.trials[0].result.as_ref().unwrap().test, r.test);
    }

    #[test]
    fn ranking_is_deterministic_and_ordered() {
        let grid = Grid {
            dropout: vec![0.2, 0.5],
            batch_size: vec![4, 8],
            hidden_units: vec![2, 3],
            directions: vec![Direction::Uni],
        };
        let emb = EmbeddingMatrix::random(5, 4, 0).unwrap();
        let a = grid_search(&grid, &base(), &splits(), &emb, 5).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| grid_search(&grid, &base(), &splits(), &emb, 5).unwrap());
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.ranking, b.ranking);
        assert_eq!(a.test, b.test);
        assert_eq!(a.ranking.len(), 8);
        for w in a.ranking.windows(2) {
            let (x, y) = (&a.trials[w[0]], &a.trials[w[1]]);
            let (rx, ry) = (x.result.as_ref().unwrap(), y.result.as_ref().unwrap());
            assert_ne!(rank((w[0], rx), (w[1], ry)), Ordering::Greater);
        }
        let with_test = a
            .trials
            .iter()
            .filter(|t| t.result.as_ref().unwrap().test.is_some())
            .count();
        assert_eq!(with_test, 1);
    }

    #[test]
    fn tie_break_prefers_smaller_then_more_dropout() {
        let mk = |hidden, dropout| TrialResult {
            hyperparams: Hyperparams {
                hidden_units: hidden,
                dropout,
                ..Hyperparams::default()
            },
            seed: 0,
            epochs: vec![],
            best_epochs: vec![1],
            best_validation_accuracy: 0.5,
            test: None,
        };
        assert_eq!(rank((5, &mk(100, 0.2)), (0, &mk(128, 0.2))), Ordering::Less);
        assert_eq!(rank((5, &mk(100, 0.4)), (0, &mk(100, 0.2))), Ordering::Less);
        assert_eq!(rank((0, &mk(100, 0.4)), (5, &mk(100, 0.4))), Ordering::Less);
    }

    #[test]
    fn sweep_rows_and_failures() {
        let emb = EmbeddingMatrix::random(5, 4, 0).unwrap();
        let s = splits();
        let base = Hyperparams {
            hidden_units: 3,
            batch_size: 4,
            ..base()
        };
        let rows = sweep(
            SweepParam::Dropout,
            &[0.2, 0.3, 1.5],
            &[Direction::Uni, Direction::Bi],
            &base,
            &s.train,
            &s.validation,
            &emb,
            1,
        )
        .unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows.iter().filter(|r| r.error.is_some()).count(), 2);
        for r in rows.iter().filter(|r| r.result.is_some()) {
            let hp = &r.result.as_ref().unwrap().hyperparams;
            assert_eq!(hp.dropout, r.value);
            assert_eq!(hp.direction, r.direction);
            assert_eq!(
                (hp.batch_size, hp.hidden_units),
                (base.batch_size, base.hidden_units)
            );
        }
        assert!(SweepParam::BatchSize.apply(&base, 2.5).is_err());
    }
}
