//! Seeded corpora drawn from a known phrase-topic model, for tests and
//! benchmarks.
//!
//! Every topic owns a block of exclusive words, and all topics emit a pool
//! of shared words. Both get Zipf-like weights; the shared pool is ranked
//! in a different random order per topic, so a shared word is likely
//! under several topics at different rates. Each topic
//! has a fixed inventory of phrases whose words are drawn from the topic's
//! own word distribution. A document draws `θ ~ Dir(α)` and fills chunks
//! with units: a single word takes its topic from `θ`, while a phrase of
//! length `s` takes topic `k` with probability proportional to `θ_k^s`,
//! which is what independent per-token topics conditioned on agreeing
//! inside the phrase would give.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, Gamma};

use crate::corpus::{Corpus, Document, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::segment::{Partition, Span};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub vocab_size: usize,
    pub docs: usize,
    /// Units per document, inclusive range.
    pub units_per_doc: (usize, usize),
    /// Units per chunk, at most this many.
    pub max_chunk_units: usize,
    pub phrases_per_topic: usize,
    /// Phrase length, inclusive range.
    pub phrase_len: (usize, usize),
    /// Probability that a unit is a phrase rather than a single word.
    pub phrase_rate: f64,
    /// Fraction of the vocabulary shared by all topics.
    pub shared_fraction: f64,
    /// Total probability of the shared words within each topic.
    pub shared_mass: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            topics: 5,
            vocab_size: 200,
            docs: 2000,
            units_per_doc: (8, 16),
            max_chunk_units: 4,
            phrases_per_topic: 12,
            phrase_len: (2, 3),
            phrase_rate: 0.5,
            shared_fraction: 0.3,
            shared_mass: 0.3,
            alpha: 0.1,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Phrases of each topic.
    pub phrases: Vec<Vec<Vec<WordId>>>,
    /// Document-topic proportions used to generate each document.
    pub theta: Vec<Vec<f64>>,
    /// The generating units of each document: a phrase or a single word.
    pub units: Vec<Partition>,
    /// Topic of each unit.
    pub unit_topics: Vec<Vec<u32>>,
}

struct Model {
    word_dist: Vec<(Vec<WordId>, WeightedIndex<f64>)>,
    phrases: Vec<Vec<Vec<WordId>>>,
    /// Normalized independent Gamma draws give `θ ~ Dir(α)`.
    gamma: Option<Gamma<f64>>,
}

impl SyntheticConfig {
    fn check(&self) -> Result<()> {
        let shared = self.shared_count();
        let ok = self.topics >= 1
            && self.vocab_size >= self.topics + shared
            && shared >= 1
            && self.units_per_doc.0 >= 1
            && self.units_per_doc.0 <= self.units_per_doc.1
            && self.max_chunk_units >= 1
            && self.phrase_len.0 >= 2
            && self.phrase_len.0 <= self.phrase_len.1
            && (0.0..=1.0).contains(&self.phrase_rate)
            && (0.0..1.0).contains(&self.shared_mass)
            && self.alpha > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::param(format!("invalid synthetic corpus settings: {self:?}")))
        }
    }

    fn shared_count(&self) -> usize {
        ((self.vocab_size as f64 * self.shared_fraction).round() as usize).max(1)
    }

    fn build(&self, rng: &mut ChaCha8Rng) -> Result<Model> {
        let shared: Vec<WordId> = (0..self.shared_count() as WordId).collect();
        let own = (self.vocab_size - shared.len()) / self.topics;
        let mut word_dist = Vec::with_capacity(self.topics);
        let mut phrases = Vec::with_capacity(self.topics);
        let mut taken: HashSet<Vec<WordId>> = HashSet::new();
        for k in 0..self.topics {
            let start = shared.len() + k * own;
            // the last topic absorbs the remainder of the vocabulary
            let end = if k + 1 == self.topics { self.vocab_size } else { start + own };
            let exclusive: Vec<WordId> = (start as WordId..end as WordId).collect();
            let words: Vec<WordId> = shared.iter().chain(&exclusive).copied().collect();
            // shared words are Zipf-weighted too, in a topic-specific order
            let mut order: Vec<usize> = (0..shared.len()).collect();
            order.shuffle(rng);
            let zipf = |n: usize| (1..=n).map(|r| 1.0 / r as f64).sum::<f64>();
            let (zs, ze) = (zipf(shared.len()), zipf(exclusive.len()));
            let weights: Vec<f64> = order
                .iter()
                .map(|&r| self.shared_mass / ((r + 1) as f64 * zs))
                .chain((0..exclusive.len()).map(|r| (1.0 - self.shared_mass) / ((r + 1) as f64 * ze)))
                .collect();
            let dist = WeightedIndex::new(&weights).map_err(|e| Error::param(e.to_string()))?;

            // lengths cycle through the allowed range so every length is stocked
            let lengths = self.phrase_len.1 - self.phrase_len.0 + 1;
            let mut list: Vec<Vec<WordId>> = Vec::with_capacity(self.phrases_per_topic);
            let mut attempts = 0;
            while list.len() < self.phrases_per_topic && attempts < 1000 * self.phrases_per_topic.max(1) {
                attempts += 1;
                let len = self.phrase_len.0 + list.len() % lengths;
                let p: Vec<WordId> = (0..len).map(|_| words[dist.sample(rng)]).collect();
                if p.windows(2).all(|w| w[0] != w[1]) && taken.insert(p.clone()) {
                    list.push(p);
                }
            }
            word_dist.push((words, dist));
            phrases.push(list);
        }
        let gamma = if self.topics > 1 {
            Some(Gamma::new(self.alpha, 1.0).map_err(|e| Error::param(e.to_string()))?)
        } else {
            None
        };
        Ok(Model {
            word_dist,
            phrases,
            gamma,
        })
    }
}

fn vocabulary(size: usize) -> Vocabulary {
    let width = size.saturating_sub(1).to_string().len();
    Vocabulary::from((0..size).map(|i| format!("w{i:0width$}")).collect::<Vec<_>>())
}

fn draw_document(
    cfg: &SyntheticConfig,
    model: &Model,
    rng: &mut ChaCha8Rng,
) -> Draw {
    let theta = match &model.gamma {
        Some(g) => {
            let draws: Vec<f64> = (0..cfg.topics).map(|_| g.sample(rng)).collect();
            let total: f64 = draws.iter().sum();
            if total > 0.0 {
                draws.iter().map(|x| x / total).collect()
            } else {
                vec![1.0 / cfg.topics as f64; cfg.topics]
            }
        }
        None => vec![1.0],
    };
    let topic_dist = WeightedIndex::new(&theta).ok();
    let units = rng.random_range(cfg.units_per_doc.0..=cfg.units_per_doc.1);
    let mut tokens = Vec::new();
    let mut chunk_starts = Vec::new();
    let mut spans = Vec::new();
    let mut topics = Vec::new();
    let mut left = units;
    while left > 0 {
        let n = rng.random_range(1..=cfg.max_chunk_units.min(left));
        chunk_starts.push(tokens.len());
        for _ in 0..n {
            let start = tokens.len();
            let len = rng.random_range(cfg.phrase_len.0..=cfg.phrase_len.1);
            let k = if rng.random_bool(cfg.phrase_rate) {
                let weights: Vec<f64> = theta.iter().map(|t| t.powi(len as i32)).collect();
                let k = WeightedIndex::new(&weights)
                    .ok()
                    .or_else(|| topic_dist.clone())
                    .map_or(0, |d| d.sample(rng));
                let same_len: Vec<&Vec<WordId>> = model.phrases[k].iter().filter(|p| p.len() == len).collect();
                match same_len.choose(rng) {
                    Some(p) => tokens.extend_from_slice(p),
                    None => {
                        let (words, dist) = &model.word_dist[k];
                        tokens.push(words[dist.sample(rng)]);
                    }
                }
                k
            } else {
                let k = topic_dist.as_ref().map_or(0, |d| d.sample(rng));
                let (words, dist) = &model.word_dist[k];
                tokens.push(words[dist.sample(rng)]);
                k
            };
            spans.push(Span::new(start, tokens.len()));
            topics.push(k as u32);
        }
        left -= n;
    }
    Draw {
        tokens,
        chunk_starts,
        theta,
        spans,
        topics,
    }
}

struct Draw {
    tokens: Vec<WordId>,
    chunk_starts: Vec<usize>,
    theta: Vec<f64>,
    spans: Vec<Span>,
    topics: Vec<u32>,
}

/// Draws `cfg.docs` documents.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    generate_inner(cfg, None)
}

/// Draws documents until the corpus holds exactly `tokens` tokens; the
/// last document is cut short as needed. `cfg.docs` is ignored.
pub fn generate_tokens(cfg: &SyntheticConfig, tokens: usize) -> Result<SyntheticCorpus> {
    generate_inner(cfg, Some(tokens))
}

fn generate_inner(cfg: &SyntheticConfig, target: Option<usize>) -> Result<SyntheticCorpus> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = cfg.build(&mut rng)?;
    let vocab = vocabulary(cfg.vocab_size);
    let mut docs = Vec::new();
    let mut thetas = Vec::new();
    let mut units = Vec::new();
    let mut unit_topics = Vec::new();
    let mut total = 0;
    loop {
        match target {
            Some(t) if total >= t => break,
            None if docs.len() >= cfg.docs => break,
            _ => {}
        }
        let mut d = draw_document(cfg, &model, &mut rng);
        if let Some(t) = target {
            let n = t - total;
            d.tokens.truncate(n);
            d.chunk_starts.retain(|&s| s < n);
            let keep = d.spans.iter().take_while(|s| s.start < n).count();
            d.spans.truncate(keep);
            d.topics.truncate(keep);
            if let Some(last) = d.spans.last_mut() {
                last.end = last.end.min(n);
            }
        }
        total += d.tokens.len();
        docs.push(Document::from_tokens(format!("doc{}", docs.len()), d.tokens, d.chunk_starts, &vocab));
        thetas.push(d.theta);
        units.push(Partition { spans: d.spans });
        unit_topics.push(d.topics);
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(docs, vocab)?,
        phrases: model.phrases,
        theta: thetas,
        units,
        unit_topics,
    })
}
