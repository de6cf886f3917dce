// Synthetic tweet/price corpus written to disk for end-to-end runs.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BIN: &str = env!("CARGO_BIN_EXE_stocktweet");
pub const GLOVE_DIM: usize = 10;

const WORDS: &[&str] = &[
    "apple", "iphone", "stock", "shares", "market", "today", "earnings", "price", "buy", "sell",
    "watch", "tim", "cook", "store", "launch", "quarter", "tech", "trading", "week", "news",
    "good", "great", "bad", "weak", "strong", "gain", "loss", "crash", "love", "hate", "bullish",
    "fear", "very", "not", "never", "really", "but",
];

pub struct Corpus {
    pub tweets: PathBuf,
    pub prices: PathBuf,
    pub glove: PathBuf,
    pub lexicon: PathBuf,
    pub days: usize,
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Tweets on `days` consecutive trading days, prices running ten days
/// further so every delay up to 7 has a label.
pub fn write(dir: &Path, days: usize, tweets_per_day: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dates = trading_days(NaiveDate::from_ymd_opt(2016, 4, 4).unwrap(), days + 10);

    let prices = dir.join("prices.csv");
    let mut w = csv::Writer::from_path(&prices).unwrap();
    w.write_record(["date", "close"]).unwrap();
    let mut close = 100.0_f64;
    for d in &dates {
        close += rng.gen_range(-2.0..2.0);
        w.write_record([d.format("%Y-%m-%d").to_string(), format!("{close:.2}")])
            .unwrap();
    }
    w.flush().unwrap();

    let tweets = dir.join("tweets.csv");
    let mut w = csv::Writer::from_path(&tweets).unwrap();
    w.write_record(["date", "text", "retweets"]).unwrap();
    for d in &dates[..days] {
        for t in 0..tweets_per_day {
            let n = rng.gen_range(6..13);
            let mut words: Vec<String> = (0..n)
                .map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string())
                .collect();
            if rng.gen_bool(0.2) {
                words[0] = words[0].to_uppercase();
            }
            if rng.gen_bool(0.2) {
                words.push("!!".into());
            }
            if t % 5 == 0 {
                words.insert(0, "@trader".into());
                words.push("https://t.co/abc".into());
            }
            let stamp = format!("{} {:02}:{:02}:00", d.format("%Y-%m-%d"), 9 + t % 8, t % 60);
            w.write_record([stamp, words.join(" "), rng.gen_range(0..6).to_string()])
                .unwrap();
        }
    }
    w.flush().unwrap();

    let glove = dir.join("glove.txt");
    let mut text = String::new();
    for word in WORDS {
        let v: Vec<String> = (0..GLOVE_DIM)
            .map(|_| format!("{:.5}", rng.gen_range(-1.0..1.0)))
            .collect();
        text.push_str(&format!("{word} {}\n", v.join(" ")));
    }
    fs::write(&glove, text).unwrap();

    let lexicon = dir.join("lexicon.tsv");
    fs::write(
        &lexicon,
        "good\t1.9\ngreat\t3.1\nbad\t-2.5\nweak\t-1.7\nstrong\t2.3\ngain\t2.4\nloss\t-1.3\ncrash\t-1.7\nlove\t3.2\nhate\t-2.7\nbullish\t1.9\nfear\t-2.2\n",
    )
    .unwrap();

    Corpus {
        tweets,
        prices,
        glove,
        lexicon,
        days,
    }
}

pub fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("spawn stocktweet")
}

pub fn run_ok(cwd: &Path, args: &[&str]) -> Output {
    let out = run(cwd, args);
    assert!(
        out.status.success(),
        "stocktweet {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}
