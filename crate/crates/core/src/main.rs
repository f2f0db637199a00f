use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topmine::corpus::InputFormat;
use topmine::eval::{runtime_decomposition, write_runtime_csv, BenchConfig, ComparisonConfig};
use topmine::lda::RepeatedWordRule;
use topmine::pipeline::{self, IngestSettings, MiningSettings, ModelSettings, PipelineConfig, Stage};
use topmine::synth::SyntheticConfig;
use topmine::Error;

#[derive(Parser)]
#[command(name = "topmine", version, about = "Topical phrase mining and phrase-constrained topic modeling")]
struct Cli {
    /// Worker threads; 0 uses every core, 1 is the sequential reference mode.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Directory holding stage artifacts. Overrides the config file.
    #[arg(long, global = true, env = "TOPMINE_WORKDIR")]
    workdir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize an input file into corpus.json.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: FormatArg,
        /// Keep stop words instead of removing them.
        #[arg(long)]
        keep_stop_words: bool,
        /// Replace the built-in stop list (one word per line).
        #[arg(long)]
        stop_words: Option<PathBuf>,
        #[arg(long)]
        no_lowercase: bool,
    },
    /// Count frequent phrases into phrases.tsv.
    Mine(MiningArgs),
    /// Partition documents into phrases, writing segments.jsonl.
    Segment {
        #[arg(long, default_value_t = topmine::segment::DEFAULT_THRESHOLD, allow_hyphen_values = true)]
        threshold: f64,
    },
    /// Train the phrase-constrained topic model into model.json.
    Train(ModelArgs),
    /// Write per-topic word and phrase rankings (topics.tsv, topics.txt).
    Topics {
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Compare held-out perplexity of LDA and the phrase model (metrics.csv).
    Perplexity {
        #[arg(long, default_value_t = 0.1)]
        holdout: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = topmine::eval::DEFAULT_FOLD_IN_SWEEPS)]
        fold_in_sweeps: usize,
        #[arg(long, default_value_t = topmine::segment::DEFAULT_THRESHOLD, allow_hyphen_values = true)]
        threshold: f64,
        #[command(flatten)]
        mining: MiningArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Time phrase mining against topic modeling on synthetic corpora.
    Bench {
        /// Corpus sizes in tokens, comma separated (e.g. 1e4,2e4,4e4).
        #[arg(long, value_delimiter = ',', default_value = "1e4,2e4,4e4")]
        sizes: Vec<String>,
        #[arg(long, default_value_t = 10)]
        topics: usize,
        #[arg(long, default_value_t = 2000)]
        iters: usize,
        #[arg(long)]
        seed: u64,
        /// Mining runs per size; the fastest is reported.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Output CSV; defaults to bench.csv in the work directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop after this stage.
        #[arg(long, value_parser = parse_stage)]
        stage: Option<Stage>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Auto,
    Jsonl,
    Lines,
}

impl From<FormatArg> for InputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Auto => InputFormat::Auto,
            FormatArg::Jsonl => InputFormat::Jsonl,
            FormatArg::Lines => InputFormat::Lines,
        }
    }
}

#[derive(Args)]
struct MiningArgs {
    /// Minimum phrase count (the floor when --support-rate is given).
    #[arg(long, default_value_t = 5)]
    min_support: u64,
    /// Minimum support as a fraction of the corpus token count.
    #[arg(long)]
    support_rate: Option<f64>,
    /// Longest phrase to mine; 0 for no limit.
    #[arg(long, default_value_t = 6)]
    max_len: usize,
}

impl MiningArgs {
    fn settings(&self) -> MiningSettings {
        MiningSettings {
            min_support: self.min_support,
            support_rate: self.support_rate,
            max_len: self.max_len,
        }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 10)]
    topics: usize,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    /// Defaults to half the iterations.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Symmetric document-topic prior; defaults to 50 / topics.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long)]
    optimize_hyper: bool,
    #[arg(long, default_value_t = 50)]
    optimize_interval: usize,
    /// Ignore earlier repeats of a word inside one phrase in the word-topic term.
    #[arg(long)]
    held_out_repeats: bool,
}

impl ModelArgs {
    fn settings(&self) -> ModelSettings {
        ModelSettings {
            topics: self.topics,
            iterations: self.iters,
            burn_in: self.burn_in,
            alpha: self.alpha,
            beta: self.beta,
            optimize_hyperparams: self.optimize_hyper,
            optimize_interval: self.optimize_interval,
            repeated_words: if self.held_out_repeats {
                RepeatedWordRule::HeldOutCount
            } else {
                RepeatedWordRule::Exact
            },
        }
    }
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_size(s: &str) -> Result<usize, Error> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("bad corpus size {s:?}")))?;
    if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0) {
        return Err(Error::Parameter(format!("bad corpus size {s:?}")));
    }
    Ok(v as usize)
}

fn check_model(settings: &ModelSettings, seed: u64) -> Result<topmine::lda::TopicModelConfig, Error> {
    let c = settings.model_config(seed);
    let v = c.violations(None);
    if v.is_empty() {
        Ok(c)
    } else {
        Err(Error::Config(v))
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let workdir = cli.workdir.clone().unwrap_or_else(|| PathBuf::from("topmine-out"));
    let dir = workdir.as_path();
    match cli.command {
        Command::Ingest {
            input,
            format,
            keep_stop_words,
            stop_words,
            no_lowercase,
        } => {
            if !input.is_file() {
                return Err(Error::Config(vec![format!("input file {} not found", input.display())]));
            }
            let settings = IngestSettings {
                format: format.into(),
                remove_stop_words: !keep_stop_words,
                stop_words_file: stop_words,
                lowercase: !no_lowercase,
            };
            let c = pipeline::ingest_stage(&input, settings.format, &settings.options()?, dir)?;
            log::info!("{} documents, {} tokens, {} words", c.num_docs(), c.total_tokens, c.vocab.len());
        }
        Command::Mine(m) => {
            let counter = pipeline::mine_stage(dir, &m.settings().miner_config())?;
            log::info!("{} frequent phrases", counter.len());
        }
        Command::Segment { threshold } => {
            pipeline::segment_stage(dir, threshold)?;
        }
        Command::Train(m) => {
            let config = check_model(&m.settings(), m.seed)?;
            pipeline::train_stage(dir, &config)?;
        }
        Command::Topics { top_n } => {
            let report = pipeline::topics_stage(dir, top_n)?;
            print!("{}", report.to_table());
        }
        Command::Perplexity {
            holdout,
            folds,
            fold_in_sweeps,
            threshold,
            mining,
            model,
        } => {
            let config = ComparisonConfig {
                miner: mining.settings().miner_config(),
                threshold,
                model: check_model(&model.settings(), model.seed)?,
                holdout,
                folds,
                fold_in_sweeps,
            };
            let rows = pipeline::perplexity_stage(dir, &config)?;
            topmine::eval::write_comparison_csv(&rows, std::io::stdout().lock())
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        }
        Command::Bench {
            sizes,
            topics,
            iters,
            seed,
            repeats,
            out,
        } => {
            let sizes = sizes.iter().map(|s| parse_size(s)).collect::<Result<Vec<_>, _>>()?;
            let model = check_model(
                &ModelSettings {
                    topics,
                    iterations: iters,
                    ..ModelSettings::default()
                },
                seed,
            )?;
            let cfg = BenchConfig {
                synth: SyntheticConfig {
                    topics,
                    seed,
                    ..SyntheticConfig::default()
                },
                miner: MiningSettings::default().miner_config(),
                threshold: topmine::segment::DEFAULT_THRESHOLD,
                model,
                mining_repeats: repeats,
            };
            let rows = runtime_decomposition(&sizes, &cfg)?;
            let out = out.unwrap_or_else(|| dir.join("bench.csv"));
            write_csv(&out, |w| write_runtime_csv(&rows, w))?;
            write_runtime_csv(&rows, std::io::stdout().lock())
                .map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
        }
        Command::Run { config, stage } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(w) = cli.workdir {
                cfg.workdir = w;
            }
            let done = pipeline::run_pipeline(&cfg, stage)?;
            log::info!(
                "finished {} in {}",
                done.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "),
                cfg.workdir.display()
            );
        }
    }
    Ok(())
}

fn write_csv<F>(path: &Path, body: F) -> Result<(), Error>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    body(&mut buf).map_err(|e| Error::Io { path: path.into(), source: e })?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io { path: parent.into(), source: e })?;
    }
    fs::write(path, buf).map_err(|e| Error::Io { path: path.into(), source: e })
}

/// 2 for invalid input or configuration, 1 for any other failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Parameter(_) => 2,
        Error::Stage { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = pipeline::with_threads(threads, move || run(cli)).and_then(|r| r);
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
