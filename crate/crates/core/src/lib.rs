//! Predict next-trading-day stock direction from tweets.
//!
//! Two analysis paths share the same ingest layer:
//!
//! - a neural path: tweets are cleaned, concatenated per trading day, split
//!   into subsets for augmentation, ordinally encoded and fed through a
//!   GloVe-initialised embedding, an LSTM (uni- or bidirectional, one or two
//!   layers) and a sigmoid output node trained with mini-batch SGD on binary
//!   cross-entropy ([`textprep`], [`embed`], [`net`], [`train`]);
//! - a linear path: tweets are scored with a lexicon-and-heuristics sentiment
//!   scorer, averaged per day and correlated with price direction through the
//!   point-biserial coefficient over a sweep of label delays ([`sentiment`],
//!   [`stats`]).
//!
//! All arithmetic is `f64`. Every stochastic step takes an explicit seed so a
//! whole pipeline run is bit-reproducible.

pub mod dataset;
pub mod embed;
mod error;
pub mod ingest;
pub mod net;
pub mod seed;
pub mod sentiment;
pub mod stats;
pub mod textprep;
pub mod train;

pub use error::{Error, Result};
