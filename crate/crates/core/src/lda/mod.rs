//! Phrase-constrained LDA.
//!
//! Each phrase instance of the segmentation is a clique of latent topic
//! variables that must all share one value, so the sampler draws one topic
//! per phrase instead of one per token. With an all-singleton partition this
//! is ordinary collapsed Gibbs LDA.

mod checkpoint;
mod hyper;
mod joint;
mod sampler;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::segment::Partition;

pub use checkpoint::Checkpoint;
pub use hyper::{minka_alpha_step, minka_beta_step, optimize_alpha, optimize_beta, optimize_hyperparameters};
pub use joint::{log_joint, log_joint_tokens};
pub use sampler::{clique_conditional, gibbs_run, gibbs_run_chains, Sampler, TrainedModel};

/// Dirichlet prior over the words of a topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaPrior {
    Symmetric(f64),
    PerWord(Vec<f64>),
}

impl BetaPrior {
    #[inline]
    pub fn get(&self, word: usize) -> f64 {
        match self {
            BetaPrior::Symmetric(b) => *b,
            BetaPrior::PerWord(v) => v[word],
        }
    }

    pub fn sum(&self, vocab_size: usize) -> f64 {
        match self {
            BetaPrior::Symmetric(b) => b * vocab_size as f64,
            BetaPrior::PerWord(v) => v.iter().sum(),
        }
    }
}

/// How the word-topic factor treats a word that occurs more than once in
/// the same phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatedWordRule {
    /// The j-th occurrence of a word sees the earlier occurrences of that
    /// word in the same phrase: `β_w + n_wk + (#earlier w)`. This is the
    /// exact ratio of collapsed joints.
    #[default]
    Exact,
    /// `β_w + n_wk` for every occurrence, ignoring earlier repeats.
    HeldOutCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModelConfig {
    pub topics: usize,
    pub alpha: Vec<f64>,
    pub beta: BetaPrior,
    pub iterations: usize,
    pub burn_in: usize,
    #[serde(default)]
    pub optimize_hyperparams: bool,
    pub optimize_interval: usize,
    pub seed: u64,
    #[serde(default)]
    pub repeated_words: RepeatedWordRule,
}

impl TopicModelConfig {
    /// Symmetric `α = 50/K`, `β = 0.01`, 1000 iterations with half burn-in.
    pub fn new(topics: usize, seed: u64) -> Self {
        let topics = topics.max(1);
        Self {
            topics,
            alpha: vec![50.0 / topics as f64; topics],
            beta: BetaPrior::Symmetric(0.01),
            iterations: 1000,
            burn_in: 500,
            optimize_hyperparams: false,
            optimize_interval: 50,
            seed,
            repeated_words: RepeatedWordRule::Exact,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = vec![alpha; self.topics];
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = BetaPrior::Symmetric(beta);
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = iterations / 2;
        self
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Lists every violated constraint.
    pub fn violations(&self, vocab_size: Option<usize>) -> Vec<String> {
        let mut v = Vec::new();
        if self.topics == 0 {
            v.push("topics must be at least 1".to_string());
        }
        if self.alpha.len() != self.topics {
            v.push(format!("alpha has {} entries, expected {}", self.alpha.len(), self.topics));
        }
        if self.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            v.push("alpha entries must be finite and > 0".to_string());
        }
        match &self.beta {
            BetaPrior::Symmetric(b) if !(b.is_finite() && *b > 0.0) => {
                v.push("beta must be finite and > 0".to_string())
            }
            BetaPrior::PerWord(bs) => {
                if bs.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                    v.push("beta entries must be finite and > 0".to_string());
                }
                if let Some(n) = vocab_size {
                    if bs.len() != n {
                        v.push(format!("beta has {} entries, vocabulary has {n}", bs.len()));
                    }
                }
            }
            _ => {}
        }
        if self.iterations > 0 && self.burn_in >= self.iterations {
            v.push(format!(
                "burn_in ({}) must be less than iterations ({})",
                self.burn_in, self.iterations
            ));
        }
        if self.optimize_hyperparams && self.optimize_interval == 0 {
            v.push("optimize_interval must be at least 1".to_string());
        }
        v
    }

    pub fn validate(&self, vocab_size: Option<usize>) -> Result<()> {
        let v = self.violations(vocab_size);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::param(v.join("; ")))
        }
    }
}

/// Clique topics plus the three count tables they induce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicModelState {
    pub topics: usize,
    pub vocab_size: usize,
    /// Topic of each phrase instance, per document.
    pub z: Vec<Vec<u32>>,
    /// Tokens per topic.
    pub n_k: Vec<u64>,
    /// Tokens per (document, topic), row-major `D x K`.
    pub n_dk: Vec<u32>,
    /// Tokens per (word, topic), row-major `V x K`.
    pub n_xk: Vec<u32>,
}

impl TopicModelState {
    pub fn empty(topics: usize, vocab_size: usize, num_docs: usize) -> Self {
        Self {
            topics,
            vocab_size,
            z: vec![Vec::new(); num_docs],
            n_k: vec![0; topics],
            n_dk: vec![0; num_docs * topics],
            n_xk: vec![0; vocab_size * topics],
        }
    }

    /// Rebuilds all counts from clique topics.
    pub fn from_assignments(
        z: Vec<Vec<u32>>,
        topics: usize,
        corpus: &Corpus,
        partitions: &[Partition],
    ) -> Result<Self> {
        check_shapes(&z, topics, corpus, partitions)?;
        let mut state = Self::empty(topics, corpus.vocab.len(), corpus.num_docs());
        for (d, (doc, part)) in corpus.docs.iter().zip(partitions).enumerate() {
            for (g, span) in part.spans.iter().enumerate() {
                state.add(d, z[d][g] as usize, &doc.tokens[span.range()]);
            }
        }
        state.z = z;
        Ok(state)
    }

    #[inline]
    pub fn doc_topic(&self, d: usize, k: usize) -> u32 {
        self.n_dk[d * self.topics + k]
    }

    #[inline]
    pub fn word_topic(&self, x: usize, k: usize) -> u32 {
        self.n_xk[x * self.topics + k]
    }

    pub fn num_docs(&self) -> usize {
        self.z.len()
    }

    #[inline]
    pub(crate) fn add(&mut self, d: usize, k: usize, words: &[u32]) {
        let kk = self.topics;
        self.n_k[k] += words.len() as u64;
        self.n_dk[d * kk + k] += words.len() as u32;
        for &w in words {
            self.n_xk[w as usize * kk + k] += 1;
        }
    }

    #[inline]
    pub(crate) fn remove(&mut self, d: usize, k: usize, words: &[u32]) {
        let kk = self.topics;
        self.n_k[k] -= words.len() as u64;
        self.n_dk[d * kk + k] -= words.len() as u32;
        for &w in words {
            self.n_xk[w as usize * kk + k] -= 1;
        }
    }

    /// Takes clique `(d, g)` out of the counts; its `z` entry is left as is.
    pub fn remove_clique(&mut self, corpus: &Corpus, partitions: &[Partition], d: usize, g: usize) {
        let span = partitions[d].spans[g];
        let k = self.z[d][g] as usize;
        self.remove(d, k, &corpus.docs[d].tokens[span.range()]);
    }

    /// Assigns topic `k` to clique `(d, g)` and adds it to the counts.
    pub fn add_clique(&mut self, corpus: &Corpus, partitions: &[Partition], d: usize, g: usize, k: usize) {
        let span = partitions[d].spans[g];
        self.z[d][g] = k as u32;
        self.add(d, k, &corpus.docs[d].tokens[span.range()]);
    }

    /// Compares the maintained counts with a from-scratch recount.
    pub fn check_consistency(&self, corpus: &Corpus, partitions: &[Partition]) -> Result<()> {
        let fresh = Self::from_assignments(self.z.clone(), self.topics, corpus, partitions)?;
        let mismatch = |what: &str| Err(Error::Contract(format!("{what} differ from a recount")));
        if fresh.n_k != self.n_k {
            return mismatch("topic totals");
        }
        if fresh.n_dk != self.n_dk {
            return mismatch("document-topic counts");
        }
        if fresh.n_xk != self.n_xk {
            return mismatch("word-topic counts");
        }
        Ok(())
    }

    /// Per-token topics, expanding each clique's topic over its tokens.
    pub fn token_topics(&self, partitions: &[Partition]) -> Vec<Vec<u32>> {
        self.z
            .iter()
            .zip(partitions)
            .map(|(zd, part)| {
                zd.iter()
                    .zip(&part.spans)
                    .flat_map(|(&k, s)| std::iter::repeat_n(k, s.len()))
                    .collect()
            })
            .collect()
    }
}

fn check_shapes(z: &[Vec<u32>], topics: usize, corpus: &Corpus, partitions: &[Partition]) -> Result<()> {
    if partitions.len() != corpus.num_docs() || z.len() != corpus.num_docs() {
        return Err(Error::Contract(format!(
            "{} documents, {} partitions, {} assignment rows",
            corpus.num_docs(),
            partitions.len(),
            z.len()
        )));
    }
    for (d, (zd, part)) in z.iter().zip(partitions).enumerate() {
        if zd.len() != part.len() {
            return Err(Error::Contract(format!(
                "document {d}: {} assignments for {} phrases",
                zd.len(),
                part.len()
            )));
        }
        if let Some(&k) = zd.iter().find(|&&k| k as usize >= topics) {
            return Err(Error::Contract(format!("document {d}: topic {k} out of range")));
        }
    }
    Ok(())
}

/// Point estimates of the document-topic and topic-word distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEstimates {
    pub topics: usize,
    pub vocab_size: usize,
    /// `D x K`, row-major.
    pub theta: Vec<f64>,
    /// `K x V`, row-major.
    pub phi: Vec<f64>,
}

impl TopicEstimates {
    pub fn from_state(state: &TopicModelState, config: &TopicModelConfig, doc_lens: &[usize]) -> Self {
        let kk = state.topics;
        let v = state.vocab_size;
        let alpha_sum = config.alpha_sum();
        let beta_sum = config.beta.sum(v);
        let mut theta = Vec::with_capacity(doc_lens.len() * kk);
        for (d, &n) in doc_lens.iter().enumerate() {
            let denom = n as f64 + alpha_sum;
            theta.extend((0..kk).map(|k| (state.doc_topic(d, k) as f64 + config.alpha[k]) / denom));
        }
        let mut phi = vec![0.0; kk * v];
        for k in 0..kk {
            let denom = state.n_k[k] as f64 + beta_sum;
            for x in 0..v {
                phi[k * v + x] = (state.word_topic(x, k) as f64 + config.beta.get(x)) / denom;
            }
        }
        Self {
            topics: kk,
            vocab_size: v,
            theta,
            phi,
        }
    }

    pub fn theta(&self, d: usize) -> &[f64] {
        &self.theta[d * self.topics..(d + 1) * self.topics]
    }

    pub fn phi(&self, k: usize) -> &[f64] {
        &self.phi[k * self.vocab_size..(k + 1) * self.vocab_size]
    }

    pub fn num_docs(&self) -> usize {
        self.theta.len() / self.topics.max(1)
    }

    /// A topic-word matrix with every row uniform over the vocabulary.
    pub fn uniform_phi(topics: usize, vocab_size: usize) -> Self {
        Self {
            topics,
            vocab_size,
            theta: Vec::new(),
            phi: vec![1.0 / vocab_size as f64; topics * vocab_size],
        }
    }
}
