//! Tweet cleaning, per-day concatenation, subset splitting and ordinal encoding.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ingest::Tweet;
use crate::{Error, Result};

/// Index reserved for padding. It never maps to a real token.
pub const PAD_INDEX: u32 = 0;
pub const PAD_TOKEN: &str = "<pad>";

/// Split size used for training unless overridden.
pub const DEFAULT_SPLIT_SIZE: usize = 150;

static HANDLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"@\w+").unwrap());
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)(?:https?://|www\.)\S*").unwrap());

/// Remove handles and URLs only. Shared with the sentiment scorer, which
/// needs case and punctuation intact.
pub fn strip_handles_and_urls(text: &str) -> String {
    let no_handles = HANDLE.replace_all(text, " ");
    URL.replace_all(&no_handles, " ").into_owned()
}

/// Handles, then URLs, then digits, then punctuation are removed; the rest is
/// lowercased and split on whitespace.
pub fn clean_and_tokenize(text: &str) -> Vec<String> {
    let stripped = strip_handles_and_urls(text);
    let letters: String = stripped
        .chars()
        .filter(|c| !c.is_numeric())
        .map(|c| {
            if c.is_alphabetic() || c.is_whitespace() {
                c
            } else {
                ' '
            }
        })
        .collect();
    letters
        .to_lowercase()
        .split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphabetic() && !c.is_numeric())
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStream {
    pub date: NaiveDate,
    pub tokens: Vec<String>,
    /// Tweets that contributed at least one token.
    pub tweet_count: usize,
}

/// One stream per date, in date order; tokens keep tweet order, then word order.
/// Dates where every tweet cleans to nothing produce no stream.
pub fn concat_by_day(tweets: &[Tweet]) -> Vec<TokenStream> {
    let mut days: BTreeMap<NaiveDate, TokenStream> = BTreeMap::new();
    for tweet in tweets {
        let tokens = clean_and_tokenize(&tweet.text);
        if tokens.is_empty() {
            continue;
        }
        let stream = days.entry(tweet.date).or_insert_with(|| TokenStream {
            date: tweet.date,
            tokens: Vec::new(),
            tweet_count: 0,
        });
        stream.tokens.extend(tokens);
        stream.tweet_count += 1;
    }
    days.into_values().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subsets {
    pub parts: Vec<Vec<String>>,
    /// How many of the requested subsets could not be formed because the
    /// stream had fewer tokens than `k`.
    pub shortfall: usize,
}

/// Contiguous partition of the stream into `k` near-equal parts. The first
/// `len % k` parts receive one extra token.
pub fn split_into_subsets(stream: &TokenStream, k: usize) -> Result<Subsets> {
    if k < 1 {
        return Err(Error::InvalidArgument(
            "split size must be at least 1".into(),
        ));
    }
    let n = stream.tokens.len();
    if n == 0 {
        return Err(Error::Degenerate(format!(
            "empty token stream for {}",
            stream.date
        )));
    }
    let parts_wanted = k.min(n);
    let base = n / parts_wanted;
    let extra = n % parts_wanted;
    let mut parts = Vec::with_capacity(parts_wanted);
    let mut start = 0;
    for i in 0..parts_wanted {
        let len = base + usize::from(i < extra);
        parts.push(stream.tokens[start..start + len].to_vec());
        start += len;
    }
    Ok(Subsets {
        parts,
        shortfall: k - parts_wanted,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Rebuild from an index-ordered token list whose first entry is the
    /// padding symbol.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN) {
            return Err(Error::InvalidArgument(format!(
                "vocabulary must start with `{PAD_TOKEN}`"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate().skip(1) {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate vocabulary token `{t}`"
                )));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Size including the padding slot.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        match index {
            PAD_INDEX => None,
            i => self.tokens.get(i as usize).map(String::as_str),
        }
    }

    /// Index-ordered tokens, padding symbol first.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn decode(&self, indices: &[u32]) -> Vec<String> {
        indices
            .iter()
            .filter_map(|&i| self.token(i))
            .map(str::to_string)
            .collect()
    }

    /// One token per line; the line number is the index.
    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.tokens.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }
}

/// Index tokens 1..V in first-occurrence order.
pub fn build_vocabulary<'a, I, S>(token_lists: I) -> Result<Vocabulary>
where
    I: IntoIterator<Item = &'a S>,
    S: AsRef<[String]> + 'a + ?Sized,
{
    let mut tokens = vec![PAD_TOKEN.to_string()];
    let mut index = HashMap::new();
    for list in token_lists {
        for t in list.as_ref() {
            if !index.contains_key(t) {
                index.insert(t.clone(), tokens.len() as u32);
                tokens.push(t.clone());
            }
        }
    }
    if tokens.len() == 1 {
        return Err(Error::Degenerate(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    Ok(Vocabulary { tokens, index })
}

/// Map known tokens to their indices (unknown tokens are dropped) and
/// post-pad with zeros to length `n`.
pub fn encode_and_pad(tokens: &[String], vocab: &Vocabulary, n: usize) -> Result<Vec<u32>> {
    let mut out: Vec<u32> = tokens.iter().filter_map(|t| vocab.get(t)).collect();
    if out.len() > n {
        return Err(Error::InvalidArgument(format!(
            "encoded length {} exceeds padded length {n}",
            out.len()
        )));
    }
    out.resize(n, PAD_INDEX);
    Ok(out)
}
