//! Run configuration: TOML file, command-line overrides and defaults.
//!
//! Every field is optional in the file. A flag beats the file, the file
//! beats the built-in default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stocktweet::embed::GLOVE_DIM;
use stocktweet::ingest::TweetColumns;
use stocktweet::net::Direction;
use stocktweet::textprep::DEFAULT_SPLIT_SIZE;
use stocktweet::train::{Grid, Hyperparams, SplitMode, SplitSpec};
use stocktweet::Error;

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),+) => {
        $( $hi.$f = $hi.$f.take().or($lo.$f); )+
    };
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tweets: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub glove: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boosters: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negations: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TweetFormat {
    /// Columns `date`, `text`, `retweets`.
    Plain,
    /// Columns `Date`, `Tweet content`, `Retweets`.
    Followthehashtag,
}

impl TweetFormat {
    pub fn columns(self) -> TweetColumns {
        match self {
            TweetFormat::Plain => TweetColumns::default(),
            TweetFormat::Followthehashtag => TweetColumns::followthehashtag(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataOpts {
    pub split_size: Option<usize>,
    pub delay: Option<usize>,
    pub tweet_format: Option<TweetFormat>,
    pub embedding_dim: Option<usize>,
    pub bins: Option<usize>,
    /// `a..b` (inclusive) or a comma list.
    pub delays: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitOpts {
    pub train: Option<f64>,
    pub test: Option<f64>,
    pub validation: Option<f64>,
    pub mode: Option<SplitMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HpOpts {
    pub dropout: Option<f64>,
    pub batch_size: Option<usize>,
    pub hidden_units: Option<usize>,
    pub direction: Option<Direction>,
    pub num_layers: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub forget_bias_one: Option<bool>,
    pub freeze_embeddings: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridOpts {
    pub dropout: Option<Vec<f64>>,
    pub batch_size: Option<Vec<usize>>,
    pub hidden_units: Option<Vec<usize>>,
    pub directions: Option<Vec<Direction>>,
}

/// Shape shared by the config file and the command-line overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub paths: Paths,
    pub data: DataOpts,
    pub split: SplitOpts,
    pub hyperparams: HpOpts,
    pub grid: GridOpts,
}

impl FileConfig {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `self` win; unset ones are taken from `lower`.
    pub fn over(mut self, lower: FileConfig) -> Self {
        overlay!(self, lower; seed, out, jobs);
        overlay!(self.paths, lower.paths; tweets, prices, glove, lexicon, boosters, negations, dataset, vocab);
        overlay!(self.data, lower.data; split_size, delay, tweet_format, embedding_dim, bins, delays);
        overlay!(self.split, lower.split; train, test, validation, mode);
        overlay!(self.hyperparams, lower.hyperparams;
            dropout, batch_size, hidden_units, direction, num_layers, learning_rate, epochs,
            forget_bias_one, freeze_embeddings);
        overlay!(self.grid, lower.grid; dropout, batch_size, hidden_units, directions);
        self
    }
}

/// Fully resolved settings. Serialized into every artifact; the output
/// directory and thread count are left out because they do not affect
/// results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub jobs: usize,
    pub paths: Paths,
    pub split_size: usize,
    pub delay: usize,
    pub tweet_format: TweetFormat,
    pub embedding_dim: usize,
    pub bins: usize,
    pub delays: Vec<usize>,
    pub split: SplitSpec,
    pub hyperparams: Hyperparams,
    pub grid: Grid,
}

/// Argument or configuration problem; exits with the configuration code.
pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_BINS: usize = 10;

pub fn parse_delays(spec: &str) -> anyhow::Result<Vec<usize>> {
    let spec = spec.trim();
    let out: Vec<usize> = if let Some((a, b)) = spec.split_once("..") {
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad delay range `{spec}`")))?;
        let b: usize = b
            .trim_start_matches('=')
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad delay range `{spec}`")))?;
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| invalid(format!("bad delay `{s}`")))
            })
            .collect::<anyhow::Result<_>>()?
    };
    if out.is_empty() {
        return Err(invalid(format!("delay list `{spec}` is empty")));
    }
    Ok(out)
}

impl RunConfig {
    pub fn resolve(c: FileConfig) -> anyhow::Result<Self> {
        let hp_default = Hyperparams::default();
        let h = c.hyperparams;
        let hyperparams = Hyperparams {
            dropout: h.dropout.unwrap_or(hp_default.dropout),
            batch_size: h.batch_size.unwrap_or(hp_default.batch_size),
            hidden_units: h.hidden_units.unwrap_or(hp_default.hidden_units),
            direction: h.direction.unwrap_or(hp_default.direction),
            num_layers: h.num_layers.unwrap_or(hp_default.num_layers),
            learning_rate: h.learning_rate.unwrap_or(hp_default.learning_rate),
            epochs: h.epochs.unwrap_or(hp_default.epochs),
            forget_bias_one: h.forget_bias_one.unwrap_or(false),
            freeze_embeddings: h.freeze_embeddings.unwrap_or(false),
        };
        let seed = c.seed.unwrap_or(DEFAULT_SEED);
        let split_default = SplitSpec::default();
        let split = SplitSpec {
            train: c.split.train.unwrap_or(split_default.train),
            test: c.split.test.unwrap_or(split_default.test),
            validation: c.split.validation.unwrap_or(split_default.validation),
            mode: c.split.mode.unwrap_or(split_default.mode),
            seed,
        };
        let g = Grid::default();
        let grid = Grid {
            dropout: c.grid.dropout.unwrap_or(g.dropout),
            batch_size: c.grid.batch_size.unwrap_or(g.batch_size),
            hidden_units: c.grid.hidden_units.unwrap_or(g.hidden_units),
            directions: c.grid.directions.unwrap_or(g.directions),
        };
        let delays = parse_delays(c.data.delays.as_deref().unwrap_or("1..7"))?;
        Ok(Self {
            seed,
            out: c.out.unwrap_or_else(|| PathBuf::from(".")),
            jobs: c.jobs.unwrap_or(0),
            paths: c.paths,
            split_size: c.data.split_size.unwrap_or(DEFAULT_SPLIT_SIZE),
            delay: c.data.delay.unwrap_or(1),
            tweet_format: c.data.tweet_format.unwrap_or(TweetFormat::Plain),
            embedding_dim: c.data.embedding_dim.unwrap_or(GLOVE_DIM),
            bins: c.data.bins.unwrap_or(DEFAULT_BINS),
            delays,
            split,
            hyperparams,
            grid,
        })
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> anyhow::Result<&'a Path> {
        match path {
            Some(p) => Ok(p.as_path()),
            None => Err(invalid(format!(
                "no {what} path given (flag or [paths] entry in the config file)"
            ))),
        }
    }
}
