use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;
use stocktweet::dataset::{self, BuildReport, Dataset};
use stocktweet::embed::{load_glove, Coverage, EmbeddingMatrix};
use stocktweet::ingest::{label_directions, label_map, load_prices, load_tweets, PriceBar, Tweet};
use stocktweet::net::Direction;
use stocktweet::seed;
use stocktweet::sentiment::{
    aggregate_daily, score_histogram, score_tweets, write_daily_csv, AggregateMode, DailySentiment,
    Histogram, Lexicon,
};
use stocktweet::stats::{delay_sweep, moments, CorrelationReport, Moments};
use stocktweet::textprep::{build_vocabulary, concat_by_day, TokenStream, Vocabulary};
use stocktweet::train::{
    class_distribution, evaluate, evaluate_checked, grid_search, load_model, save_model,
    split_dataset, sweep as run_sweep, train_model, ClassDistribution, Grid, Hyperparams, Metrics,
    ModelMeta, SweepParam, SweepRow, TrialResult,
};

use crate::config::{invalid, RunConfig};
use crate::report::{join, run_metadata, write_csv, write_json, VERSION};

struct Corpus {
    tweets: Vec<Tweet>,
    skipped_rows: usize,
    bars: Vec<PriceBar>,
}

fn load_corpus(cfg: &RunConfig, need_prices: bool) -> anyhow::Result<Corpus> {
    let tweets_path = cfg.require(&cfg.paths.tweets, "tweets")?;
    let load = load_tweets(tweets_path, &cfg.tweet_format.columns())?;
    let bars = if need_prices {
        load_prices(cfg.require(&cfg.paths.prices, "prices")?)?
    } else {
        Vec::new()
    };
    Ok(Corpus {
        tweets: load.tweets,
        skipped_rows: load.skipped,
        bars,
    })
}

struct Prepared {
    dataset: Dataset,
    report: BuildReport,
    day_labels: Vec<u8>,
}

fn prepare(
    streams: &[TokenStream],
    bars: &[PriceBar],
    vocab: &Vocabulary,
    cfg: &RunConfig,
    k: usize,
) -> anyhow::Result<Prepared> {
    let labels = label_map(&label_directions(bars, cfg.delay)?);
    let (dataset, report) = dataset::build(streams, &labels, k, vocab)?;
    let day_labels = streams
        .iter()
        .filter_map(|s| labels.get(&s.date).copied())
        .collect();
    Ok(Prepared {
        dataset,
        report,
        day_labels,
    })
}

#[derive(Serialize)]
struct PrepReport {
    tweets_loaded: usize,
    rows_skipped: usize,
    days_with_tokens: usize,
    labeled_days: usize,
    unlabeled_days: usize,
    split_size: usize,
    subset_shortfall: usize,
    sequences: usize,
    padded_len: usize,
    vocab_size: usize,
    day_classes: ClassDistribution,
    sequence_classes: ClassDistribution,
}

pub fn prep(cfg: &RunConfig) -> anyhow::Result<()> {
    let corpus = load_corpus(cfg, true)?;
    let streams = concat_by_day(&corpus.tweets);
    let vocab = build_vocabulary(streams.iter().map(|s| &s.tokens))?;
    let p = prepare(&streams, &corpus.bars, &vocab, cfg, cfg.split_size)?;

    p.dataset
        .write_jsonl(cfg.out_path("dataset.jsonl"), Some(cfg.seed))?;
    vocab.write_file(cfg.out_path("vocab.txt"))?;
    let report = PrepReport {
        tweets_loaded: corpus.tweets.len(),
        rows_skipped: corpus.skipped_rows,
        days_with_tokens: streams.len(),
        labeled_days: p.report.days,
        unlabeled_days: p.report.unlabeled_days,
        split_size: cfg.split_size,
        subset_shortfall: p.report.subset_shortfall,
        sequences: p.dataset.len(),
        padded_len: p.dataset.padded_len,
        vocab_size: vocab.len(),
        day_classes: class_distribution(&p.day_labels)?,
        sequence_classes: class_distribution(&p.dataset.labels())?,
    };
    write_json(&cfg.out_path("prep_report.json"), "prep", cfg, &report)?;
    println!(
        "{} labeled days -> {} sequences (padded length {}, vocabulary {})",
        report.labeled_days, report.sequences, report.padded_len, report.vocab_size
    );
    Ok(())
}

fn lexicon(cfg: &RunConfig) -> anyhow::Result<Lexicon> {
    let path = cfg.require(&cfg.paths.lexicon, "lexicon")?;
    Ok(Lexicon::load(
        path,
        cfg.paths.boosters.as_deref(),
        cfg.paths.negations.as_deref(),
    )?)
}

#[derive(Serialize)]
struct ModeSummary {
    mode: AggregateMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    moments: Option<Moments>,
    histogram: Histogram,
}

fn daily_outputs(
    cfg: &RunConfig,
    corpus: &Corpus,
) -> anyhow::Result<(Vec<DailySentiment>, Vec<ModeSummary>)> {
    let lex = lexicon(cfg)?;
    let daily = aggregate_daily(&score_tweets(&corpus.tweets, &lex));
    if daily.is_empty() {
        return Err(stocktweet::Error::Degenerate("no scored days".into()).into());
    }
    write_daily_csv(cfg.out_path("daily_sentiment.csv"), &daily)?;

    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for mode in [AggregateMode::Simple, AggregateMode::Weighted] {
        let values: Vec<f64> = daily.iter().map(|d| d.value(mode)).collect();
        let histogram = score_histogram(&values, cfg.bins)?;
        for (i, c) in histogram.counts.iter().enumerate() {
            rows.push(vec![
                mode.to_string(),
                histogram.edges[i].to_string(),
                histogram.edges[i + 1].to_string(),
                c.to_string(),
            ]);
        }
        summaries.push(ModeSummary {
            mode,
            moments: moments(&values).ok(),
            histogram,
        });
    }
    write_csv(
        &cfg.out_path("histogram.csv"),
        &["mode", "bin_start", "bin_end", "count"],
        &rows,
    )?;
    for s in &summaries {
        if let Some(w) = s.moments.as_ref().and_then(|m| m.warning.as_ref()) {
            eprintln!("warning ({}): {w}", s.mode);
        }
    }
    Ok((daily, summaries))
}

#[derive(Serialize)]
struct SentimentReport {
    tweets: usize,
    rows_skipped: usize,
    days: usize,
    modes: Vec<ModeSummary>,
}

pub fn sentiment(cfg: &RunConfig) -> anyhow::Result<()> {
    let corpus = load_corpus(cfg, false)?;
    let (daily, modes) = daily_outputs(cfg, &corpus)?;
    let report = SentimentReport {
        tweets: corpus.tweets.len(),
        rows_skipped: corpus.skipped_rows,
        days: daily.len(),
        modes,
    };
    write_json(
        &cfg.out_path("sentiment_report.json"),
        "sentiment",
        cfg,
        &report,
    )?;
    println!("scored {} tweets over {} days", report.tweets, report.days);
    Ok(())
}

#[derive(Serialize)]
struct CorrelationOutput {
    days: usize,
    reports: Vec<CorrelationReport>,
    modes: Vec<ModeSummary>,
}

pub fn correlate(cfg: &RunConfig) -> anyhow::Result<()> {
    let corpus = load_corpus(cfg, true)?;
    let (daily, modes) = daily_outputs(cfg, &corpus)?;
    let mut reports = Vec::new();
    for mode in [AggregateMode::Simple, AggregateMode::Weighted] {
        reports.extend(delay_sweep(&daily, &corpus.bars, &cfg.delays, mode));
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.delay.to_string(),
                r.mode.to_string(),
                r.r_pb.map(|v| v.to_string()).unwrap_or_default(),
                r.n.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_path("correlation.csv"),
        &["delay", "mode", "r_pb", "n"],
        &rows,
    )?;
    for r in &reports {
        match (r.r_pb, &r.warning) {
            (Some(v), _) => println!(
                "delay {} {:>8}: r_pb = {v:+.4} (n = {})",
                r.delay, r.mode, r.n
            ),
            (None, Some(w)) => println!("delay {} {:>8}: unavailable ({w})", r.delay, r.mode),
            (None, None) => {}
        }
    }
    let out = CorrelationOutput {
        days: daily.len(),
        reports,
        modes,
    };
    write_json(&cfg.out_path("correlation.json"), "correlate", cfg, &out)
}

struct TrainingInputs {
    dataset: Dataset,
    embedding: EmbeddingMatrix,
    coverage: Option<Coverage>,
}

fn embedding_for(
    vocab: &Vocabulary,
    cfg: &RunConfig,
) -> anyhow::Result<(EmbeddingMatrix, Option<Coverage>)> {
    match &cfg.paths.glove {
        Some(path) => {
            let (emb, cov) = load_glove(
                path,
                vocab,
                cfg.embedding_dim,
                seed::derive(cfg.seed, "embedding-oov"),
            )?;
            Ok((emb, Some(cov)))
        }
        None => Ok((
            EmbeddingMatrix::random(
                vocab.len(),
                cfg.embedding_dim,
                seed::derive(cfg.seed, "embedding-random"),
            )?,
            None,
        )),
    }
}

fn training_inputs(cfg: &RunConfig) -> anyhow::Result<TrainingInputs> {
    let data_path = cfg.require(&cfg.paths.dataset, "dataset")?;
    let (dataset, _) = Dataset::read_jsonl(data_path)?;
    dataset.validate()?;
    let vocab_path = cfg
        .paths
        .vocab
        .clone()
        .unwrap_or_else(|| data_path.with_file_name("vocab.txt"));
    let vocab = Vocabulary::read_file(&vocab_path)?;
    if vocab.len() != dataset.vocab_size {
        return Err(stocktweet::Error::ConfigMismatch(format!(
            "{} has {} entries but the dataset was encoded with {}",
            vocab_path.display(),
            vocab.len(),
            dataset.vocab_size
        ))
        .into());
    }
    let (embedding, coverage) = embedding_for(&vocab, cfg)?;
    Ok(TrainingInputs {
        dataset,
        embedding,
        coverage,
    })
}

#[derive(Serialize)]
struct SplitSizes {
    train: usize,
    validation: usize,
    test: usize,
}

#[derive(Serialize)]
struct TrainReport {
    sizes: SplitSizes,
    train_classes: ClassDistribution,
    #[serde(skip_serializing_if = "Option::is_none")]
    embedding_coverage: Option<Coverage>,
    trial: TrialResult,
    validation: Metrics,
    test: Metrics,
}

fn meta(
    cfg: &RunConfig,
    command: &str,
    net: &stocktweet::net::Network,
    padded_len: usize,
    hp: &Hyperparams,
    seed: u64,
) -> ModelMeta {
    ModelMeta {
        version: VERSION.to_string(),
        config: net.config.clone(),
        padded_len,
        vocab_size: net.embedding.vocab_size(),
        embedding_dim: net.embedding.dim(),
        hyperparams: hp.clone(),
        seed,
        run: run_metadata(command, cfg),
    }
}

pub fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let inputs = training_inputs(cfg)?;
    let splits = split_dataset(&inputs.dataset, &cfg.split)?;
    for (name, part) in [
        ("train", &splits.train),
        ("validation", &splits.validation),
        ("test", &splits.test),
    ] {
        part.write_jsonl(cfg.out_path(&format!("{name}.jsonl")), Some(cfg.seed))?;
    }
    let hp = &cfg.hyperparams;
    let outcome = train_model(
        &splits.train,
        &splits.validation,
        hp,
        &inputs.embedding,
        cfg.seed,
    )?;
    let validation = evaluate(&outcome.model, &splits.validation)?;
    let test = evaluate(&outcome.model, &splits.test)?;
    let mut trial = outcome.result;
    trial.test = Some(test.clone());

    save_model(
        &outcome.model,
        &meta(
            cfg,
            "train",
            &outcome.model,
            inputs.dataset.padded_len,
            hp,
            cfg.seed,
        ),
        cfg.out_path("model.bin"),
    )?;
    let rows: Vec<Vec<String>> = trial
        .epochs
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.validation_accuracy.to_string(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_path("epochs.csv"),
        &["epoch", "train_loss", "validation_accuracy"],
        &rows,
    )?;

    println!(
        "best validation accuracy {:.4} at epoch(s) {}; test accuracy {:.4}, F1 {:.4}",
        trial.best_validation_accuracy,
        join(&trial.best_epochs, ","),
        test.accuracy,
        test.f1
    );
    let report = TrainReport {
        sizes: SplitSizes {
            train: splits.train.len(),
            validation: splits.validation.len(),
            test: splits.test.len(),
        },
        train_classes: class_distribution(&splits.train.labels())?,
        embedding_coverage: inputs.coverage,
        trial,
        validation,
        test,
    };
    write_json(&cfg.out_path("train_report.json"), "train", cfg, &report)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|e| invalid(format!("bad {what} `{v}`: {e}")))
        })
        .collect()
}

pub const SPLIT_SIZES: [usize; 10] = [25, 50, 100, 150, 200, 250, 300, 350, 400, 450];

fn table_values(param: SweepParam) -> Vec<f64> {
    match param {
        SweepParam::Dropout => vec![0.2, 0.3, 0.4, 0.5, 0.6],
        SweepParam::BatchSize => vec![8.0, 16.0, 32.0, 64.0, 128.0],
        SweepParam::HiddenUnits => vec![100.0, 128.0, 256.0, 512.0],
    }
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    parameter: &'a str,
    accuracy_kind: &'static str,
    rows: &'a [SweepRow],
}

#[derive(Serialize)]
struct SplitSizeRun {
    split_size: usize,
    repeat: u64,
    seed: u64,
    sequences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<TrialResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn sweep(
    cfg: &RunConfig,
    param: &str,
    values: Option<&str>,
    directions: &str,
    repeats: u64,
) -> anyhow::Result<()> {
    if matches!(param, "split-size" | "split_size") {
        return sweep_split_size(cfg, values, repeats);
    }
    let parameter: SweepParam = param.parse()?;
    let values = match values {
        Some(v) => parse_list(v, "value")?,
        None => table_values(parameter),
    };
    let directions: Vec<Direction> = parse_list(directions, "direction")?;
    let inputs = training_inputs(cfg)?;
    let splits = split_dataset(&inputs.dataset, &cfg.split)?;
    let rows = run_sweep(
        parameter,
        &values,
        &directions,
        &cfg.hyperparams,
        &splits.train,
        &splits.validation,
        &inputs.embedding,
        cfg.seed,
    )?;

    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let (acc, epochs) = r
                .result
                .as_ref()
                .map_or((String::new(), String::new()), |t| {
                    (
                        t.best_validation_accuracy.to_string(),
                        join(&t.best_epochs, ";"),
                    )
                });
            vec![
                r.direction.to_string(),
                r.value.to_string(),
                acc,
                epochs,
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let name = parameter.name();
    write_csv(
        &cfg.out_path(&format!("sweep_{name}.csv")),
        &[
            "direction",
            name,
            "validation_accuracy",
            "best_epochs",
            "error",
        ],
        &table,
    )?;
    for row in &table {
        println!(
            "{:>4} {name}={:<6} accuracy={} epochs={} {}",
            row[0], row[1], row[2], row[3], row[4]
        );
    }
    let out = SweepOutput {
        parameter: name,
        accuracy_kind: "validation",
        rows: &rows,
    };
    write_json(
        &cfg.out_path(&format!("sweep_{name}.json")),
        "sweep",
        cfg,
        &out,
    )
}

fn sweep_split_size(cfg: &RunConfig, values: Option<&str>, repeats: u64) -> anyhow::Result<()> {
    if repeats == 0 {
        return Err(invalid("--repeats must be at least 1"));
    }
    let sizes: Vec<usize> = match values {
        Some(v) => parse_list(v, "split size")?,
        None => SPLIT_SIZES.to_vec(),
    };
    let corpus = load_corpus(cfg, true)?;
    let streams = concat_by_day(&corpus.tweets);
    let vocab = build_vocabulary(streams.iter().map(|s| &s.tokens))?;
    let (embedding, _) = embedding_for(&vocab, cfg)?;

    let jobs: Vec<(usize, u64)> = sizes
        .iter()
        .flat_map(|&k| (0..repeats).map(move |r| (k, r)))
        .collect();
    let runs: Vec<SplitSizeRun> = jobs
        .par_iter()
        .map(|&(k, r)| {
            let run_seed = cfg.seed.wrapping_add(r);
            let attempt = || -> anyhow::Result<(usize, TrialResult)> {
                let p = prepare(&streams, &corpus.bars, &vocab, cfg, k)?;
                let spec = stocktweet::train::SplitSpec {
                    seed: run_seed,
                    ..cfg.split.clone()
                };
                let splits = split_dataset(&p.dataset, &spec)?;
                let out = train_model(
                    &splits.train,
                    &splits.validation,
                    &cfg.hyperparams,
                    &embedding,
                    run_seed,
                )?;
                Ok((p.dataset.len(), out.result))
            };
            let (sequences, result, error) = match attempt() {
                Ok((n, res)) => (n, Some(res), None),
                Err(e) => (0, None, Some(format!("{e:#}"))),
            };
            SplitSizeRun {
                split_size: k,
                repeat: r,
                seed: run_seed,
                sequences,
                result,
                error,
            }
        })
        .collect();

    let mut rows = Vec::new();
    for &k in &sizes {
        let accs: Vec<f64> = runs
            .iter()
            .filter(|r| r.split_size == k)
            .filter_map(|r| r.result.as_ref().map(|t| t.best_validation_accuracy))
            .collect();
        if !accs.is_empty() {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            println!(
                "split size {k:>4}: validation accuracy {mean:.4} over {} run(s)",
                accs.len()
            );
            rows.push(vec![k.to_string(), mean.to_string()]);
        }
    }
    for r in runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "split size {} repeat {} failed: {}",
            r.split_size,
            r.repeat,
            r.error.as_deref().unwrap_or("")
        );
    }
    write_csv(
        &cfg.out_path("split_size.csv"),
        &["split_size", "accuracy"],
        &rows,
    )?;

    #[derive(Serialize)]
    struct Out<'a> {
        accuracy_kind: &'static str,
        runs: &'a [SplitSizeRun],
    }
    write_json(
        &cfg.out_path("sweep_split_size.json"),
        "sweep",
        cfg,
        &Out {
            accuracy_kind: "validation (mean over repeats in split_size.csv)",
            runs: &runs,
        },
    )
}

pub fn gridsearch(
    cfg: &RunConfig,
    which: Option<&str>,
    directions: Option<&str>,
) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    cfg.grid = match which {
        Some("default") => Grid::default(),
        Some("config") | None => cfg.grid.clone(),
        Some(other) => {
            return Err(invalid(format!(
                "unknown grid `{other}` (expected `default` or `config`)"
            )))
        }
    };
    if let Some(d) = directions {
        cfg.grid.directions = parse_list(d, "direction")?;
    }
    let inputs = training_inputs(&cfg)?;
    let splits = split_dataset(&inputs.dataset, &cfg.split)?;
    let total = cfg.grid.combinations(&cfg.hyperparams).len();
    eprintln!("grid search over {total} combinations");
    let report = grid_search(
        &cfg.grid,
        &cfg.hyperparams,
        &splits,
        &inputs.embedding,
        cfg.seed,
    )?;

    let rows: Vec<Vec<String>> = report
        .ranking
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let t = &report.trials[i];
            let r = t.result.as_ref().expect("ranked trials succeeded");
            vec![
                (rank + 1).to_string(),
                i.to_string(),
                t.hyperparams.direction.to_string(),
                t.hyperparams.dropout.to_string(),
                t.hyperparams.batch_size.to_string(),
                t.hyperparams.hidden_units.to_string(),
                r.best_validation_accuracy.to_string(),
                join(&r.best_epochs, ";"),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_path("grid_summary.csv"),
        &[
            "rank",
            "trial",
            "direction",
            "dropout",
            "batch_size",
            "hidden_units",
            "validation_accuracy",
            "best_epochs",
        ],
        &rows,
    )?;
    for t in report.trials.iter().filter(|t| t.error.is_some()) {
        eprintln!(
            "trial {} failed: {}",
            t.index,
            t.error.as_deref().unwrap_or("")
        );
    }
    if let (Some(best), Some(model)) = (report.best, &report.best_model) {
        let t = &report.trials[best];
        save_model(
            model,
            &meta(
                &cfg,
                "gridsearch",
                model,
                inputs.dataset.padded_len,
                &t.hyperparams,
                t.seed,
            ),
            cfg.out_path("best_model.bin"),
        )?;
        let test = report.test.as_ref().expect("best trial has test metrics");
        println!(
            "best: {} dropout {} batch {} hidden {} -> validation {:.4}, test {:.4}",
            t.hyperparams.direction,
            t.hyperparams.dropout,
            t.hyperparams.batch_size,
            t.hyperparams.hidden_units,
            t.result
                .as_ref()
                .map_or(0.0, |r| r.best_validation_accuracy),
            test.accuracy
        );
    } else {
        eprintln!("every trial failed; no best combination");
    }
    write_json(
        &cfg.out_path("grid_report.json"),
        "gridsearch",
        &cfg,
        &report,
    )
}

#[derive(Serialize)]
struct EvaluationReport<'a> {
    model: &'a Path,
    data: &'a Path,
    model_meta: &'a ModelMeta,
    metrics: &'a Metrics,
}

pub fn evaluate_model(cfg: &RunConfig, model: &Path, data: &Path) -> anyhow::Result<()> {
    let (net, model_meta) =
        load_model(model).with_context(|| format!("loading model {}", model.display()))?;
    let (dataset, _) = Dataset::read_jsonl(data)?;
    let metrics = evaluate_checked(&net, &model_meta, &dataset)?;
    let c = metrics.confusion;
    println!(
        "accuracy {:.4} precision {:.4} recall {:.4} F1 {:.4} (TP {} FP {} TN {} FN {})",
        metrics.accuracy, metrics.precision, metrics.recall, metrics.f1, c.tp, c.fp, c.tn, c.fn_
    );
    for flag in &metrics.degenerate {
        eprintln!("warning: {flag} has a zero denominator and is reported as 0");
    }
    let report = EvaluationReport {
        model,
        data,
        model_meta: &model_meta,
        metrics: &metrics,
    };
    write_json(&cfg.out_path("evaluation.json"), "evaluate", cfg, &report)
}
