//! End-to-end driver: ingest, mine, segment, train, report, evaluate.
//!
//! Each stage reads the artifacts of the previous stages from the work
//! directory and writes its own, so a run can be stopped after any stage
//! and resumed later. Artifacts are written to `<name>.partial` and renamed
//! once complete; a failed stage leaves its `.partial` file behind.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{default_stop_words, ingest, parse_stop_words, read_documents, Corpus, IngestOptions, InputFormat};
use crate::error::{Error, Result};
use crate::eval::{compare_models, write_comparison_csv, ComparisonConfig, FoldComparison, DEFAULT_FOLD_IN_SWEEPS};
use crate::lda::{gibbs_run, BetaPrior, Checkpoint, RepeatedWordRule, TopicEstimates, TopicModelConfig, TrainedModel};
use crate::miner::{mine, MinSupport, MinerConfig, PhraseCounter};
use crate::ranking::{phrase_renderings, report, topical_frequency, TopicReport};
use crate::segment::{read_segments, segment_corpus, write_segments, Partition, SignificanceParams, DEFAULT_THRESHOLD};

pub const CORPUS_FILE: &str = "corpus.json";
pub const PHRASES_FILE: &str = "phrases.tsv";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const MODEL_FILE: &str = "model.json";
pub const TOPICS_FILE: &str = "topics.tsv";
pub const TOPICS_TABLE_FILE: &str = "topics.txt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Mine,
    Segment,
    Train,
    Topics,
    Perplexity,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Mine,
        Stage::Segment,
        Stage::Train,
        Stage::Topics,
        Stage::Perplexity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Mine => "mine",
            Stage::Segment => "segment",
            Stage::Train => "train",
            Stage::Topics => "topics",
            Stage::Perplexity => "perplexity",
        }
    }

    /// Files this stage writes into the work directory.
    pub fn artifacts(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[CORPUS_FILE],
            Stage::Mine => &[PHRASES_FILE],
            Stage::Segment => &[SEGMENTS_FILE],
            Stage::Train => &[MODEL_FILE],
            Stage::Topics => &[TOPICS_FILE, TOPICS_TABLE_FILE],
            Stage::Perplexity => &[METRICS_FILE],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::param(format!("unknown stage {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSettings {
    pub format: InputFormat,
    pub remove_stop_words: bool,
    /// One stop word per line; replaces the built-in list.
    pub stop_words_file: Option<PathBuf>,
    pub lowercase: bool,
}

impl Default for IngestSettings {
    fn default() -> Self {
        Self {
            format: InputFormat::Auto,
            remove_stop_words: true,
            stop_words_file: None,
            lowercase: true,
        }
    }
}

impl IngestSettings {
    pub fn options(&self) -> Result<IngestOptions> {
        let stop_words = match (&self.stop_words_file, self.remove_stop_words) {
            (_, false) => Default::default(),
            (Some(p), true) => parse_stop_words(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
            (None, true) => default_stop_words(),
        };
        Ok(IngestOptions {
            stop_words,
            lowercase: self.lowercase,
            normalizer: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningSettings {
    /// Absolute minimum support, or the floor when `support_rate` is set.
    pub min_support: u64,
    /// Minimum support as a fraction of the corpus token count.
    pub support_rate: Option<f64>,
    /// Longest phrase to mine; 0 means no limit.
    pub max_len: usize,
}

impl Default for MiningSettings {
    fn default() -> Self {
        Self {
            min_support: 5,
            support_rate: None,
            max_len: 6,
        }
    }
}

impl MiningSettings {
    pub fn miner_config(&self) -> MinerConfig {
        MinerConfig {
            min_support: match self.support_rate {
                Some(rate) => MinSupport::Rate {
                    rate,
                    floor: self.min_support,
                },
                None => MinSupport::Absolute(self.min_support),
            },
            max_len: (self.max_len > 0).then_some(self.max_len),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationSettings {
    pub threshold: f64,
}

impl Default for SegmentationSettings {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub topics: usize,
    pub iterations: usize,
    /// Defaults to half the iterations.
    pub burn_in: Option<usize>,
    /// Symmetric starting value; defaults to `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub optimize_hyperparams: bool,
    pub optimize_interval: usize,
    pub repeated_words: RepeatedWordRule,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            topics: 10,
            iterations: 1000,
            burn_in: None,
            alpha: None,
            beta: 0.01,
            optimize_hyperparams: false,
            optimize_interval: 50,
            repeated_words: RepeatedWordRule::Exact,
        }
    }
}

impl ModelSettings {
    pub fn model_config(&self, seed: u64) -> TopicModelConfig {
        let mut c = TopicModelConfig::new(self.topics, seed).with_iterations(self.iterations);
        c.topics = self.topics;
        if let Some(b) = self.burn_in {
            c.burn_in = b;
        }
        let alpha = self.alpha.unwrap_or(50.0 / self.topics.max(1) as f64);
        c.alpha = vec![alpha; self.topics];
        c.beta = BetaPrior::Symmetric(self.beta);
        c.optimize_hyperparams = self.optimize_hyperparams;
        c.optimize_interval = self.optimize_interval;
        c.repeated_words = self.repeated_words;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    pub top_n: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { top_n: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    pub holdout: f64,
    pub folds: usize,
    pub fold_in_sweeps: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self {
            holdout: 0.1,
            folds: 1,
            fold_in_sweeps: DEFAULT_FOLD_IN_SWEEPS,
        }
    }
}

/// Everything a pipeline run needs. `seed` has no default in the file
/// format: a config without one is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub input: PathBuf,
    #[serde(default = "default_workdir")]
    pub workdir: PathBuf,
    #[serde(default)]
    pub ingest: IngestSettings,
    #[serde(default)]
    pub mining: MiningSettings,
    #[serde(default)]
    pub segmentation: SegmentationSettings,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub report: ReportSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
}

fn default_workdir() -> PathBuf {
    PathBuf::from("topmine-out")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            input: PathBuf::from("corpus.txt"),
            workdir: default_workdir(),
            ingest: IngestSettings::default(),
            mining: MiningSettings::default(),
            segmentation: SegmentationSettings::default(),
            model: ModelSettings::default(),
            report: ReportSettings::default(),
            evaluation: EvaluationSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim_end().to_string()]))
    }

    /// Parses a TOML file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.input = base.join(&cfg.input);
        cfg.workdir = base.join(&cfg.workdir);
        if let Some(p) = &cfg.ingest.stop_words_file {
            cfg.ingest.stop_words_file = Some(base.join(p));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_config(&self) -> TopicModelConfig {
        self.model.model_config(self.seed)
    }

    pub fn comparison_config(&self) -> ComparisonConfig {
        ComparisonConfig {
            miner: self.mining.miner_config(),
            threshold: self.segmentation.threshold,
            model: self.model_config(),
            holdout: self.evaluation.holdout,
            folds: self.evaluation.folds,
            fold_in_sweeps: self.evaluation.fold_in_sweeps,
        }
    }
}

/// Every violated constraint, prefixed with the stage it belongs to.
/// Only checks the local file system.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<String> {
    let mut v = Vec::new();
    if !cfg.input.is_file() {
        v.push(format!("ingest: input file {} not found", cfg.input.display()));
    }
    if let Some(p) = &cfg.ingest.stop_words_file {
        if !p.is_file() {
            v.push(format!("ingest: stop word file {} not found", p.display()));
        }
    }
    let m = &cfg.mining;
    match m.support_rate {
        None if m.min_support == 0 => v.push("phrase_miner: minimum support must be at least 1".into()),
        Some(r) if !(r.is_finite() && r >= 0.0) => {
            v.push(format!("phrase_miner: support rate must be finite and >= 0, got {r}"))
        }
        Some(r) if r == 0.0 && m.min_support == 0 => {
            v.push("phrase_miner: minimum support must be at least 1".into())
        }
        _ => {}
    }
    if cfg.segmentation.threshold.is_nan() {
        v.push("segmenter: threshold must not be NaN".into());
    }
    v.extend(
        cfg.model_config()
            .violations(None)
            .into_iter()
            .map(|s| format!("phrase_lda: {s}")),
    );
    if cfg.report.top_n == 0 {
        v.push("ranking: top_n must be at least 1".into());
    }
    let e = &cfg.evaluation;
    if !(e.holdout > 0.0 && e.holdout < 1.0) {
        v.push(format!("evaluation: holdout must be in (0, 1), got {}", e.holdout));
    }
    if e.folds == 0 {
        v.push("evaluation: folds must be at least 1".into());
    }
    v
}

/// Writes `dir/name` through a `.partial` file that is renamed on success.
fn write_artifact<F>(dir: &Path, name: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let path = dir.join(name);
    let partial = dir.join(format!("{name}.partial"));
    let file = File::create(&partial).map_err(|e| Error::io(&partial, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)?;
    out.flush().map_err(|e| Error::io(&partial, e))?;
    drop(out);
    fs::rename(&partial, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn io_err(dir: &Path, name: &str) -> impl Fn(std::io::Error) -> Error {
    let path = dir.join(name);
    move |e| Error::io(path.clone(), e)
}

pub fn ingest_stage(input: &Path, format: InputFormat, options: &IngestOptions, workdir: &Path) -> Result<Corpus> {
    let raw = read_documents(input, format)?;
    let corpus = ingest(&raw, options)?;
    fs::create_dir_all(workdir).map_err(|e| Error::io(workdir, e))?;
    write_artifact(workdir, CORPUS_FILE, |out| Ok(serde_json::to_writer(out, &corpus)?))?;
    Ok(corpus)
}

pub fn load_corpus(workdir: &Path) -> Result<Corpus> {
    let corpus: Corpus = serde_json::from_reader(open(workdir, CORPUS_FILE)?)?;
    corpus.validate()?;
    Ok(corpus)
}

pub fn mine_stage(workdir: &Path, config: &MinerConfig) -> Result<PhraseCounter> {
    let corpus = load_corpus(workdir)?;
    let counter = mine(&corpus, config)?;
    write_artifact(workdir, PHRASES_FILE, |out| {
        counter
            .write_tsv(&corpus.vocab, out)
            .map_err(io_err(workdir, PHRASES_FILE))
    })?;
    Ok(counter)
}

/// Reads the phrase table; every stored entry is kept.
pub fn load_phrases(workdir: &Path, corpus: &Corpus) -> Result<PhraseCounter> {
    PhraseCounter::read_tsv(open(workdir, PHRASES_FILE)?, &corpus.vocab, 1)
}

pub fn segment_stage(workdir: &Path, threshold: f64) -> Result<Vec<Partition>> {
    let corpus = load_corpus(workdir)?;
    let counter = load_phrases(workdir, &corpus)?;
    let params = SignificanceParams::new(threshold, corpus.total_tokens.max(1) as u64)?;
    let partitions = segment_corpus(&corpus, &counter, &params);
    write_artifact(workdir, SEGMENTS_FILE, |out| write_segments(&corpus, &partitions, out))?;
    Ok(partitions)
}

pub fn load_segments(workdir: &Path, corpus: &Corpus) -> Result<Vec<Partition>> {
    read_segments(open(workdir, SEGMENTS_FILE)?, corpus)
}

pub fn train_stage(workdir: &Path, config: &TopicModelConfig) -> Result<TrainedModel> {
    let corpus = load_corpus(workdir)?;
    let partitions = load_segments(workdir, &corpus)?;
    let model = gibbs_run(&corpus, &partitions, config)?;
    let checkpoint = Checkpoint::new(&model, &corpus);
    write_artifact(workdir, MODEL_FILE, |out| checkpoint.write(out))?;
    Ok(model)
}

/// Loads the checkpoint and checks it against the corpus and segments.
pub fn load_model(workdir: &Path, corpus: &Corpus, partitions: &[Partition]) -> Result<TrainedModel> {
    let checkpoint = Checkpoint::read(open(workdir, MODEL_FILE)?)?;
    let state = checkpoint.restore(corpus, partitions)?;
    let doc_lens: Vec<usize> = corpus.docs.iter().map(|d| d.len()).collect();
    Ok(TrainedModel {
        estimates: TopicEstimates::from_state(&state, &checkpoint.config, &doc_lens),
        sample_log: state.z.clone(),
        state,
        config: checkpoint.config,
    })
}

pub fn topics_stage(workdir: &Path, top_n: usize) -> Result<TopicReport> {
    let corpus = load_corpus(workdir)?;
    let partitions = load_segments(workdir, &corpus)?;
    let model = load_model(workdir, &corpus, &partitions)?;
    let tf = topical_frequency(&model.sample_log, &partitions, &corpus)?;
    let renderings = phrase_renderings(&corpus, &partitions);
    let rep = report(&model.estimates, &tf, &corpus.vocab, &renderings, top_n)?;
    write_artifact(workdir, TOPICS_FILE, |out| rep.write_tsv(out).map_err(io_err(workdir, TOPICS_FILE)))?;
    write_artifact(workdir, TOPICS_TABLE_FILE, |out| {
        out.write_all(rep.to_table().as_bytes())
            .map_err(io_err(workdir, TOPICS_TABLE_FILE))
    })?;
    Ok(rep)
}

pub fn perplexity_stage(workdir: &Path, config: &ComparisonConfig) -> Result<Vec<FoldComparison>> {
    let corpus = load_corpus(workdir)?;
    let rows = compare_models(&corpus, config)?;
    write_artifact(workdir, METRICS_FILE, |out| {
        write_comparison_csv(&rows, out).map_err(io_err(workdir, METRICS_FILE))
    })?;
    Ok(rows)
}

/// Runs the stages in order, stopping after `until` if given. Returns the
/// stages that ran. An invalid configuration fails before anything is
/// written.
pub fn run_pipeline(cfg: &PipelineConfig, until: Option<Stage>) -> Result<Vec<Stage>> {
    let violations = validate_config(cfg);
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let dir = cfg.workdir.as_path();
    let mut done = Vec::new();
    for stage in Stage::ALL {
        if until.is_some_and(|u| stage > u) {
            break;
        }
        log::info!("stage {stage}");
        let result = match stage {
            Stage::Ingest => cfg
                .ingest
                .options()
                .and_then(|o| ingest_stage(&cfg.input, cfg.ingest.format, &o, dir))
                .map(drop),
            Stage::Mine => mine_stage(dir, &cfg.mining.miner_config()).map(drop),
            Stage::Segment => segment_stage(dir, cfg.segmentation.threshold).map(drop),
            Stage::Train => train_stage(dir, &cfg.model_config()).map(drop),
            Stage::Topics => topics_stage(dir, cfg.report.top_n).map(drop),
            Stage::Perplexity => perplexity_stage(dir, &cfg.comparison_config()).map(drop),
        };
        result.map_err(|e| Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        })?;
        done.push(stage);
    }
    Ok(done)
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T, F>(threads: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}
