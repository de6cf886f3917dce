//! Lexicon and rule based tweet sentiment.
//!
//! Each token's valence comes from a lexicon and is adjusted for capital
//! emphasis, preceding degree modifiers, preceding negations and a "but"
//! clause. The sum plus an exclamation bonus is squashed into [-1, 1] by
//! `S / sqrt(S^2 + alpha)`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::Tweet;
use crate::textprep::strip_handles_and_urls;
use crate::{Error, Result};

pub const EXCLAMATION_INCREMENT: f64 = 0.292;
pub const MAX_EXCLAMATIONS: usize = 3;
pub const CAPS_INCREMENT: f64 = 0.733;
pub const NEGATION_SCALAR: f64 = -0.74;
pub const BUT_BEFORE: f64 = 0.5;
pub const BUT_AFTER: f64 = 1.5;
pub const NORMALIZATION_ALPHA: f64 = 15.0;
/// How far back modifiers and negations reach.
pub const LOOKBACK: usize = 3;
/// Booster scaling by distance 1, 2, 3 from the sentiment token.
pub const BOOSTER_DAMPING: [f64; LOOKBACK] = [1.0, 0.95, 0.9];

pub const DEFAULT_BOOSTERS: &str = include_str!("../data/boosters.tsv");
pub const DEFAULT_NEGATIONS: &str = include_str!("../data/negations.txt");
/// Small illustrative valence table for demos and tests.
pub const DEMO_LEXICON: &str = include_str!("../data/demo_lexicon.tsv");

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    valences: HashMap<String, f64>,
    boosters: HashMap<String, f64>,
    negations: HashSet<String>,
}

/// Parses `token<TAB>value[<TAB>...]` lines. Blank lines are skipped; extra
/// columns are ignored so the four-column VADER distribution file loads as is.
pub fn parse_weights(text: &str, source: &Path) -> Result<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let token = cols.next().unwrap_or_default().trim();
        let value = cols
            .next()
            .ok_or_else(|| Error::parse(source, n as u64 + 1, "expected token<TAB>value"))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, n as u64 + 1, format!("bad value `{value}`")))?;
        if token.is_empty() || !value.is_finite() {
            return Err(Error::parse(
                source,
                n as u64 + 1,
                "empty token or non-finite value",
            ));
        }
        out.entry(token.to_lowercase()).or_insert(value);
    }
    Ok(out)
}

pub fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Lexicon {
    pub fn new(
        valences: HashMap<String, f64>,
        boosters: HashMap<String, f64>,
        negations: HashSet<String>,
    ) -> Result<Self> {
        if valences.is_empty() || boosters.is_empty() || negations.is_empty() {
            return Err(Error::InvalidArgument(
                "valence, booster and negation tables must all be non-empty".into(),
            ));
        }
        if valences
            .values()
            .chain(boosters.values())
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("lexicon value".into()));
        }
        Ok(Self {
            valences,
            boosters,
            negations,
        })
    }

    /// Valences from `valences`, with the bundled booster and negation lists.
    pub fn with_default_modifiers(valences: HashMap<String, f64>) -> Result<Self> {
        let boosters = parse_weights(DEFAULT_BOOSTERS, Path::new("<bundled boosters>"))?;
        Self::new(valences, boosters, parse_word_list(DEFAULT_NEGATIONS))
    }

    pub fn demo() -> Self {
        let valences = parse_weights(DEMO_LEXICON, Path::new("<demo lexicon>"))
            .expect("bundled lexicon parses");
        Self::with_default_modifiers(valences).expect("bundled lexicon is valid")
    }

    /// Missing booster or negation paths fall back to the bundled lists.
    pub fn load(
        valences: &Path,
        boosters: Option<&Path>,
        negations: Option<&Path>,
    ) -> Result<Self> {
        let v = parse_weights(&read(valences)?, valences)?;
        let b = match boosters {
            Some(p) => parse_weights(&read(p)?, p)?,
            None => parse_weights(DEFAULT_BOOSTERS, Path::new("<bundled boosters>"))?,
        };
        let n = match negations {
            Some(p) => parse_word_list(&read(p)?),
            None => parse_word_list(DEFAULT_NEGATIONS),
        };
        Self::new(v, b, n)
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(&token.to_lowercase()).copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    fn is_negation(&self, lower: &str) -> bool {
        self.negations.contains(lower) || lower.contains("n't")
    }
}

/// `S / sqrt(S^2 + alpha)`, clamped to [-1, 1].
pub fn normalize(sum: f64) -> f64 {
    (sum / (sum * sum + NORMALIZATION_ALPHA).sqrt()).clamp(-1.0, 1.0)
}

fn is_all_caps(token: &str) -> bool {
    token.chars().any(char::is_alphabetic) && !token.chars().any(char::is_lowercase)
}

struct Token<'a> {
    raw: &'a str,
    lower: String,
}

fn tokens(text: &str) -> Vec<Token<'_>> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| w.chars().count() > 1)
        .map(|raw| Token {
            raw,
            lower: raw.to_lowercase(),
        })
        .collect()
}

fn booster_increment(tok: &Token<'_>, valence: f64, caps_differ: bool, lex: &Lexicon) -> f64 {
    let Some(&inc) = lex.boosters.get(&tok.lower) else {
        return 0.0;
    };
    let mut scalar = if valence < 0.0 { -inc } else { inc };
    if caps_differ && is_all_caps(tok.raw) {
        scalar += CAPS_INCREMENT.copysign(valence);
    }
    scalar
}

/// Compound score in [-1, 1]. Handles and URLs are removed first; case and
/// punctuation are kept because the heuristics read them.
pub fn score_tweet(text: &str, lex: &Lexicon) -> f64 {
    let text = strip_handles_and_urls(text);
    let toks = tokens(&text);
    let caps = toks.iter().filter(|t| is_all_caps(t.raw)).count();
    let caps_differ = caps > 0 && caps < toks.len();

    let mut sentiments = Vec::with_capacity(toks.len());
    for (i, tok) in toks.iter().enumerate() {
        let base = match lex.valences.get(&tok.lower) {
            Some(&v) if !lex.boosters.contains_key(&tok.lower) => v,
            _ => {
                sentiments.push(0.0);
                continue;
            }
        };
        let mut valence = base;
        if caps_differ && is_all_caps(tok.raw) {
            valence += CAPS_INCREMENT.copysign(valence);
        }
        for d in 0..LOOKBACK.min(i) {
            let prev = &toks[i - d - 1];
            if lex.valences.contains_key(&prev.lower) {
                continue;
            }
            valence += booster_increment(prev, valence, caps_differ, lex) * BOOSTER_DAMPING[d];
            if lex.is_negation(&prev.lower) {
                valence *= NEGATION_SCALAR;
            }
        }
        sentiments.push(valence);
    }

    if let Some(b) = toks.iter().position(|t| t.lower == "but") {
        for (i, s) in sentiments.iter_mut().enumerate() {
            if i < b {
                *s *= BUT_BEFORE;
            } else if i > b {
                *s *= BUT_AFTER;
            }
        }
    }

    let mut sum: f64 = sentiments.iter().sum();
    if sum != 0.0 {
        let marks = text
            .chars()
            .filter(|&c| c == '!')
            .count()
            .min(MAX_EXCLAMATIONS);
        sum += (marks as f64 * EXCLAMATION_INCREMENT).copysign(sum);
    }
    normalize(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredTweet {
    pub date: NaiveDate,
    pub compound: f64,
    pub retweet_count: u64,
}

pub fn score_tweets(tweets: &[Tweet], lex: &Lexicon) -> Vec<ScoredTweet> {
    tweets
        .par_iter()
        .map(|t| ScoredTweet {
            date: t.date,
            compound: score_tweet(&t.text, lex),
            retweet_count: t.retweet_count,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateMode {
    Simple,
    Weighted,
}

impl std::fmt::Display for AggregateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AggregateMode::Simple => "simple",
            AggregateMode::Weighted => "weighted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailySentiment {
    pub date: NaiveDate,
    pub mean_compound: f64,
    /// Weighted by `1 + retweet_count`.
    pub weighted_compound: f64,
    pub tweet_count: usize,
}

impl DailySentiment {
    pub fn value(&self, mode: AggregateMode) -> f64 {
        match mode {
            AggregateMode::Simple => self.mean_compound,
            AggregateMode::Weighted => self.weighted_compound,
        }
    }
}

pub fn retweet_weight(retweets: u64) -> f64 {
    1.0 + retweets as f64
}

/// One row per calendar day present in `scores`, in date order.
pub fn aggregate_daily(scores: &[ScoredTweet]) -> Vec<DailySentiment> {
    let mut days: BTreeMap<NaiveDate, Vec<&ScoredTweet>> = BTreeMap::new();
    for s in scores {
        days.entry(s.date).or_default().push(s);
    }
    days.into_iter()
        .map(|(date, day)| {
            let n = day.len() as f64;
            let mean = day.iter().map(|s| s.compound).sum::<f64>() / n;
            let (num, den) = day.iter().fold((0.0, 0.0), |(num, den), s| {
                let w = retweet_weight(s.retweet_count);
                (num + w * s.compound, den + w)
            });
            DailySentiment {
                date,
                mean_compound: mean,
                weighted_compound: (num / den).clamp(-1.0, 1.0),
                tweet_count: day.len(),
            }
        })
        .collect()
}

pub fn write_daily_csv(path: impl AsRef<Path>, daily: &[DailySentiment]) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["date", "mean_compound", "weighted_compound", "tweet_count"])
        .map_err(csv_err)?;
    for d in daily {
        w.write_record([
            d.date.to_string(),
            d.mean_compound.to_string(),
            d.weighted_compound.to_string(),
            d.tweet_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges; all equal when the input range is degenerate.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Equal-width bins over `[min, max]`; the maximum lands in the last bin.
pub fn score_histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins < 1 {
        return Err(Error::InvalidArgument(
            "histogram needs at least one bin".into(),
        ));
    }
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("histogram needs finite values".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let edges = (0..=bins)
        .map(|i| {
            if i == bins {
                max
            } else {
                min + width * i as f64
            }
        })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let bin = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn lex(entries: &[(&str, f64)]) -> Lexicon {
        let v = entries.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        Lexicon::with_default_modifiers(v).unwrap()
    }

    fn good() -> Lexicon {
        lex(&[("good", 1.9), ("bad", -2.5), ("great", 2.0)])
    }

    #[test]
    fn no_hits_is_zero() {
        assert_eq!(score_tweet("the and of", &good()), 0.0);
        assert_eq!(score_tweet("", &good()), 0.0);
        assert_eq!(score_tweet("!!! wow", &good()), 0.0);
    }

    #[test]
    fn normalization_example() {
        assert!((score_tweet("great", &good()) - 0.4588314677411235).abs() < TOL);
        assert!((normalize(2.0) - 2.0 / 19f64.sqrt()).abs() < TOL);
    }

    #[test]
    fn exclamations() {
        assert!((score_tweet("good!!", &good()) - 0.5398691817681098).abs() < TOL);
        let three = score_tweet("good!!!", &good());
        assert_eq!(three, score_tweet("good!!!!!!", &good()));
        assert!((three - normalize(1.9 + 3.0 * 0.292)).abs() < TOL);
        assert!((score_tweet("bad!", &good()) - normalize(-2.5 - 0.292)).abs() < TOL);
    }

    #[test]
    fn negation_booster_caps_but() {
        let l = good();
        assert!((score_tweet("not good", &l) - -0.3412376512543242).abs() < TOL);
        assert!((score_tweet("isn't good", &l) - -0.3412376512543242).abs() < TOL);
        assert!((score_tweet("very good", &l) - 0.4927250317396701).abs() < TOL);
        assert!((score_tweet("very bad", &l) - -0.584918592770089).abs() < TOL);
        assert!((score_tweet("GOOD movie", &l) - 0.5622182239284726).abs() < TOL);
        assert_eq!(score_tweet("GOOD", &l), score_tweet("good", &l));
        assert!((score_tweet("good but bad", &l) - -0.5858817654461621).abs() < TOL);
        assert!((score_tweet("very slightly good", &l) - 0.4376902125924931).abs() < TOL);
        // negation four tokens back is out of reach
        assert_eq!(
            score_tweet("not the big red good", &l),
            score_tweet("good", &l)
        );
    }

    #[test]
    fn booster_alone_has_no_valence() {
        let l = lex(&[("very", 1.0), ("good", 1.9)]);
        assert_eq!(score_tweet("very", &l), 0.0);
    }

    #[test]
    fn handles_and_urls_ignored() {
        let l = good();
        assert_eq!(
            score_tweet("@bad good https://bad.example", &l),
            score_tweet("good", &l)
        );
    }

    #[test]
    fn parses_vader_style_rows() {
        let t = "good\t1.9\t0.9\t[2, 2, 1]\n\nBad\t-2.5\n";
        let m = parse_weights(t, Path::new("x")).unwrap();
        assert_eq!(m["good"], 1.9);
        assert_eq!(m["bad"], -2.5);
        assert!(matches!(
            parse_weights("good 1.9", Path::new("x")),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(parse_weights("good\tNaN", Path::new("x")).is_err());
        assert!(Lexicon::new(HashMap::new(), m.clone(), parse_word_list("not")).is_err());
        assert!(Lexicon::demo().len() > 10);
    }

    #[test]
    fn aggregation() {
        let d = NaiveDate::from_ymd_opt(2016, 4, 1).unwrap();
        let s = |c, r| ScoredTweet {
            date: d,
            compound: c,
            retweet_count: r,
        };
        let day = aggregate_daily(&[s(0.5, 3), s(-0.5, 1)]);
        assert_eq!(day.len(), 1);
        assert!(day[0].mean_compound.abs() < TOL);
        assert!((day[0].weighted_compound - (4.0 * 0.5 - 2.0 * 0.5) / 6.0).abs() < TOL);
        assert_eq!(day[0].tweet_count, 2);
        let one = aggregate_daily(&[s(0.3, 9)]);
        assert_eq!((one[0].mean_compound, one[0].weighted_compound), (0.3, 0.3));
        let d2 = d.succ_opt().unwrap();
        let two = aggregate_daily(&[
            ScoredTweet {
                date: d2,
                ..s(0.1, 0)
            },
            s(0.2, 0),
        ]);
        assert_eq!(two.iter().map(|x| x.date).collect::<Vec<_>>(), vec![d, d2]);
        assert!(aggregate_daily(&[]).is_empty());
    }

    #[test]
    fn histogram() {
        assert_eq!(
            score_histogram(&[0.0, 0.0, 1.0], 2).unwrap().counts,
            vec![2, 1]
        );
        assert_eq!(score_histogram(&[0.4], 3).unwrap().counts, vec![1, 0, 0]);
        let h = score_histogram(&[-1.0, -0.5, 0.0, 0.5, 1.0], 4).unwrap();
        assert_eq!(h.counts, vec![1, 1, 1, 2]);
        assert_eq!(h.edges, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(score_histogram(&[1.0], 0).is_err());
        assert!(score_histogram(&[], 2).is_err());
    }

    #[test]
    fn daily_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let d = NaiveDate::from_ymd_opt(2016, 4, 1).unwrap();
        write_daily_csv(
            &p,
            &[DailySentiment {
                date: d,
                mean_compound: 0.25,
                weighted_compound: 0.5,
                tweet_count: 2,
            }],
        )
        .unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "date,mean_compound,weighted_compound,tweet_count\n2016-04-01,0.25,0.5,2\n"
        );
    }

    mod props {
        use proptest::prelude::*;

        use super::*;

        proptest! {
            #[test]
            fn normalize_odd_monotone_bounded(a in -1e6f64..1e6, b in -1e6f64..1e6) {
                prop_assert!((normalize(-a) + normalize(a)).abs() <= 1e-12);
                if a < b {
                    prop_assert!(normalize(a) <= normalize(b));
                }
                prop_assert!(normalize(a).abs() <= 1.0);
            }

            #[test]
            fn scores_bounded(text in "[a-zA-Z!@:/. ']{0,80}") {
                let l = Lexicon::demo();
                let s = score_tweet(&text, &l);
                prop_assert!((-1.0..=1.0).contains(&s));
            }

            #[test]
            fn equal_weights_match_mean(scores in prop::collection::vec(-1.0f64..1.0, 1..50), r in 0u64..1000) {
                let d = NaiveDate::from_ymd_opt(2016, 4, 1).unwrap();
                let tw: Vec<_> = scores.iter().map(|&c| ScoredTweet { date: d, compound: c, retweet_count: r }).collect();
                let day = aggregate_daily(&tw)[0];
                prop_assert!((day.mean_compound - day.weighted_compound).abs() <= 1e-12);
            }

            #[test]
            fn histogram_counts_sum(values in prop::collection::vec(-1.0f64..1.0, 1..100), bins in 1usize..20) {
                let h = score_histogram(&values, bins).unwrap();
                prop_assert_eq!(h.counts.iter().sum::<usize>(), values.len());
                prop_assert_eq!(h.edges.len(), bins + 1);
            }
        }
    }
}
