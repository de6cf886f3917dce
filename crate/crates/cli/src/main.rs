mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stocktweet::net::Direction;
use stocktweet::train::SplitMode;

use config::{FileConfig, RunConfig, TweetFormat};

#[derive(Parser, Debug)]
#[command(
    name = "stocktweet",
    version,
    about = "Stock direction from tweets: LSTM training and lexicon sentiment analysis"
)]
struct Cli {
    /// TOML run configuration. Flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 means all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct TweetArgs {
    /// Tweet CSV.
    #[arg(long)]
    tweets: Option<PathBuf>,
    /// Daily price CSV with `date` and `close` columns.
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long, value_enum)]
    tweet_format: Option<TweetFormat>,
}

#[derive(Args, Debug, Default)]
struct LexiconArgs {
    /// `token<TAB>valence` file.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// `token<TAB>increment` file; bundled list if omitted.
    #[arg(long)]
    boosters: Option<PathBuf>,
    /// One negation word per line; bundled list if omitted.
    #[arg(long)]
    negations: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct DatasetArgs {
    /// JSON-lines dataset written by `prep`.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Vocabulary written by `prep`.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// GloVe text file; random embeddings if omitted.
    #[arg(long)]
    glove: Option<PathBuf>,
    #[arg(long)]
    embedding_dim: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct SplitArgs {
    /// `random` or `chronological`.
    #[arg(long)]
    split_mode: Option<SplitMode>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    validation_fraction: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct HpArgs {
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, alias = "batch-size")]
    batch: Option<usize>,
    #[arg(long, alias = "hidden-units")]
    hidden: Option<usize>,
    /// `uni` or `bi`.
    #[arg(long)]
    direction: Option<Direction>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long, alias = "learning-rate")]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Start the forget-gate bias at 1.
    #[arg(long)]
    forget_bias_one: bool,
    /// Keep embeddings fixed during training.
    #[arg(long)]
    freeze_embeddings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean, concatenate per day, split into subsets and encode.
    Prep {
        #[command(flatten)]
        input: TweetArgs,
        /// Subsets per day.
        #[arg(long)]
        split_size: Option<usize>,
        /// Label delay in trading days.
        #[arg(long)]
        delay: Option<usize>,
    },
    /// Score tweets and aggregate per day.
    Sentiment {
        #[command(flatten)]
        input: TweetArgs,
        #[command(flatten)]
        lexicon: LexiconArgs,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Daily sentiment against price direction over a range of delays.
    Correlate {
        #[command(flatten)]
        input: TweetArgs,
        #[command(flatten)]
        lexicon: LexiconArgs,
        /// `1..7` or `1,4`.
        #[arg(long)]
        delays: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Train one model and report validation and test metrics.
    Train {
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Vary one hyperparameter with the rest fixed.
    Sweep {
        /// dropout, batch, hidden or split-size.
        #[arg(long)]
        param: String,
        /// Comma-separated values; the usual table values if omitted.
        #[arg(long)]
        values: Option<String>,
        /// Comma-separated directions.
        #[arg(long, default_value = "uni,bi")]
        directions: String,
        /// Runs per split size (seed + r).
        #[arg(long, default_value_t = 1)]
        repeats: u64,
        #[command(flatten)]
        input: TweetArgs,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Exhaustive search over dropout x batch x hidden.
    Gridsearch {
        /// `default` ignores the config file's `[grid]` table; `config`
        /// (the default) uses it where present.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated directions; overrides the grid's.
        #[arg(long)]
        directions: Option<String>,
        #[command(flatten)]
        data: DatasetArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Metrics of a saved model on a dataset file.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

impl TweetArgs {
    fn apply(&self, c: &mut FileConfig) {
        c.paths.tweets = self.tweets.clone();
        c.paths.prices = self.prices.clone();
        c.data.tweet_format = self.tweet_format;
    }
}

impl LexiconArgs {
    fn apply(&self, c: &mut FileConfig) {
        c.paths.lexicon = self.lexicon.clone();
        c.paths.boosters = self.boosters.clone();
        c.paths.negations = self.negations.clone();
    }
}

impl DatasetArgs {
    fn apply(&self, c: &mut FileConfig) {
        c.paths.dataset = self.dataset.clone();
        c.paths.vocab = self.vocab.clone();
        c.paths.glove = self.glove.clone();
        c.data.embedding_dim = self.embedding_dim;
    }
}

impl SplitArgs {
    fn apply(&self, c: &mut FileConfig) {
        c.split.mode = self.split_mode;
        c.split.train = self.train_fraction;
        c.split.test = self.test_fraction;
        c.split.validation = self.validation_fraction;
    }
}

impl HpArgs {
    fn apply(&self, c: &mut FileConfig) {
        let h = &mut c.hyperparams;
        h.dropout = self.dropout;
        h.batch_size = self.batch;
        h.hidden_units = self.hidden;
        h.direction = self.direction;
        h.num_layers = self.layers;
        h.learning_rate = self.lr;
        h.epochs = self.epochs;
        h.forget_bias_one = self.forget_bias_one.then_some(true);
        h.freeze_embeddings = self.freeze_embeddings.then_some(true);
    }
}

fn resolve(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut flags = FileConfig {
        seed: cli.seed,
        out: cli.out.clone(),
        jobs: cli.jobs,
        ..FileConfig::default()
    };
    match &cli.command {
        Command::Prep {
            input,
            split_size,
            delay,
        } => {
            input.apply(&mut flags);
            flags.data.split_size = *split_size;
            flags.data.delay = *delay;
        }
        Command::Sentiment {
            input,
            lexicon,
            bins,
        } => {
            input.apply(&mut flags);
            lexicon.apply(&mut flags);
            flags.data.bins = *bins;
        }
        Command::Correlate {
            input,
            lexicon,
            delays,
            bins,
        } => {
            input.apply(&mut flags);
            lexicon.apply(&mut flags);
            flags.data.delays = delays.clone();
            flags.data.bins = *bins;
        }
        Command::Train { data, split, hp }
        | Command::Gridsearch {
            data, split, hp, ..
        } => {
            data.apply(&mut flags);
            split.apply(&mut flags);
            hp.apply(&mut flags);
        }
        Command::Sweep {
            input,
            data,
            split,
            hp,
            ..
        } => {
            input.apply(&mut flags);
            data.apply(&mut flags);
            split.apply(&mut flags);
            hp.apply(&mut flags);
        }
        Command::Evaluate { .. } => {}
    }
    let file = match &cli.config {
        Some(p) => FileConfig::read(p)?,
        None => FileConfig::default(),
    };
    RunConfig::resolve(flags.over(file))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = resolve(&cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build_global()?;
    std::fs::create_dir_all(&cfg.out)?;
    match cli.command {
        Command::Prep { .. } => commands::prep(&cfg),
        Command::Sentiment { .. } => commands::sentiment(&cfg),
        Command::Correlate { .. } => commands::correlate(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Sweep {
            param,
            values,
            directions,
            repeats,
            ..
        } => commands::sweep(&cfg, &param, values.as_deref(), &directions, repeats),
        Command::Gridsearch {
            grid, directions, ..
        } => commands::gridsearch(&cfg, grid.as_deref(), directions.as_deref()),
        Command::Evaluate { model, data } => commands::evaluate_model(&cfg, &model, &data),
    }
}

/// 3 input/parse, 4 configuration, 5 degenerate data, 6 numerical failure,
/// 1 anything else. Clap's own usage errors exit with 2.
fn exit_code(err: &anyhow::Error) -> u8 {
    use stocktweet::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. }
                | E::Csv { .. }
                | E::MissingColumn { .. }
                | E::NoRows { .. }
                | E::Parse { .. }
                | E::Json(_) => 3,
                E::InvalidArgument(_) | E::ConfigMismatch(_) | E::Dimension(_) => 4,
                E::Degenerate(_) => 5,
                E::NonFinite(_) | E::Diverged { .. } => 6,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
        {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
