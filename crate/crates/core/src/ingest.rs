//! Tweet and price CSV loading, trading-day alignment and direction labels.
//!
//! "Next day" is the next *trading* day: delays count price bars, not
//! calendar days. Tweets are attributed to the calendar date they were posted
//! on; tweets dated on a day without a price bar are dropped.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_DELAY: usize = 1;
pub const MAX_DELAY: usize = 7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub date: NaiveDate,
    pub text: String,
    pub retweet_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub close: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionLabel {
    pub date: NaiveDate,
    pub delay: usize,
    pub value: u8,
}

/// Which CSV header names hold the tweet fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetColumns {
    pub date: String,
    pub text: String,
    /// Absent column means every tweet has zero retweets.
    pub retweets: Option<String>,
}

impl Default for TweetColumns {
    fn default() -> Self {
        Self {
            date: "date".into(),
            text: "text".into(),
            retweets: Some("retweets".into()),
        }
    }
}

impl TweetColumns {
    /// Column names used by the followthehashtag spreadsheet export.
    pub fn followthehashtag() -> Self {
        Self {
            date: "Date".into(),
            text: "Tweet content".into(),
            retweets: Some("Retweets".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetLoad {
    pub tweets: Vec<Tweet>,
    /// Rows whose date (or retweet count) could not be parsed.
    pub skipped: usize,
}

/// Accepts `YYYY-MM-DD`, `DD/MM/YYYY HH:MM` and ISO `YYYY-MM-DD HH:MM:SS`.
pub fn parse_tweet_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(d);
    }
    for fmt in ["%d/%m/%Y %H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt.date());
        }
    }
    NaiveDate::parse_from_str(raw, "%d/%m/%Y").ok()
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
}

pub fn load_tweets(path: impl AsRef<Path>, columns: &TweetColumns) -> Result<TweetLoad> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let date_col = column_index(&headers, &columns.date, path)?;
    let text_col = column_index(&headers, &columns.text, path)?;
    let rt_col = columns
        .retweets
        .as_deref()
        .map(|name| column_index(&headers, name, path))
        .transpose()?;

    let mut tweets = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let Some(date) = record.get(date_col).and_then(parse_tweet_date) else {
            skipped += 1;
            continue;
        };
        let retweet_count = match rt_col.map(|c| record.get(c).unwrap_or("").trim()) {
            None | Some("") => 0,
            Some(raw) => match raw.parse::<u64>() {
                Ok(n) => n,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            },
        };
        tweets.push(Tweet {
            date,
            text: record.get(text_col).unwrap_or("").to_string(),
            retweet_count,
        });
    }
    if tweets.is_empty() {
        return Err(Error::NoRows {
            path: path.to_path_buf(),
            skipped,
        });
    }
    Ok(TweetLoad { tweets, skipped })
}

/// Loads a `date,close` CSV (header names matched case-insensitively, so a
/// Yahoo Finance export loads as-is). Bars come back sorted ascending.
pub fn load_prices(path: impl AsRef<Path>) -> Result<Vec<PriceBar>> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let date_col = find("date")?;
    let close_col = find("close")?;

    let mut seen: HashMap<NaiveDate, u64> = HashMap::new();
    let mut bars = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_date = record.get(date_col).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| Error::parse(path, line, format!("bad date `{raw_date}`")))?;
        let raw_close = record.get(close_col).unwrap_or("").trim();
        let close: f64 = raw_close
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad close `{raw_close}`")))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::parse(
                path,
                line,
                format!("close must be positive, got {close}"),
            ));
        }
        if let Some(prev) = seen.insert(date, line) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate date {date} (first seen on line {prev})"),
            ));
        }
        bars.push(PriceBar { date, close });
    }
    if bars.is_empty() {
        return Err(Error::NoRows {
            path: path.to_path_buf(),
            skipped: 0,
        });
    }
    bars.sort_by_key(|b| b.date);
    Ok(bars)
}

/// Label bar `t` with 1 when `close(t + delay) > close(t)`, else 0.
///
/// The last `delay` bars get no label. Equal closes label 0.
pub fn label_directions(bars: &[PriceBar], delay: usize) -> Result<Vec<DirectionLabel>> {
    if !(MIN_DELAY..=MAX_DELAY).contains(&delay) {
        return Err(Error::InvalidArgument(format!(
            "delay must be in [{MIN_DELAY}, {MAX_DELAY}], got {delay}"
        )));
    }
    if bars.len() < delay + 1 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} price bars for delay {delay}, got {}",
            delay + 1,
            bars.len()
        )));
    }
    if bars.windows(2).any(|w| w[0].date >= w[1].date) {
        return Err(Error::InvalidArgument(
            "price bars must be strictly increasing by date".into(),
        ));
    }
    Ok(bars
        .iter()
        .zip(&bars[delay..])
        .map(|(now, later)| DirectionLabel {
            date: now.date,
            delay,
            value: u8::from(later.close > now.close),
        })
        .collect())
}

/// Label lookup by date.
pub fn label_map(labels: &[DirectionLabel]) -> BTreeMap<NaiveDate, u8> {
    labels.iter().map(|l| (l.date, l.value)).collect()
}

/// Keep tweets whose date has a label; returns the kept tweets and the number
/// dropped (non-trading days, or the trailing unlabeled days).
pub fn retain_labeled(tweets: &[Tweet], labels: &[DirectionLabel]) -> (Vec<Tweet>, usize) {
    let labeled = label_map(labels);
    let kept: Vec<Tweet> = tweets
        .iter()
        .filter(|t| labeled.contains_key(&t.date))
        .cloned()
        .collect();
    let dropped = tweets.len() - kept.len();
    (kept, dropped)
}
