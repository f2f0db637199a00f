//! Frequent contiguous phrase mining.
//!
//! Counts every contiguous token sequence (within a chunk) whose corpus
//! frequency reaches the minimum support. Lengths are mined in increasing
//! order. Two prunings keep the candidate set small:
//!
//! * position-based Apriori pruning: a length-`n` candidate starts at `i` only
//!   if the length-`n-1` phrases at `i` and `i+1` are both frequent;
//! * data antimonotonicity: a document without any length-`n` candidate is
//!   dropped from all later rounds.
//!
//! Round `n` must finish corpus-wide before round `n+1` starts. Inside a round
//! documents are sharded over the current rayon pool and the per-worker
//! counters are summed, so the result does not depend on the thread count.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary, WordId};
use crate::error::{Error, Result};

type Counts = HashMap<Box<[WordId]>, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinSupport {
    Absolute(u64),
    /// `max(floor, ceil(rate * L))` for a corpus of `L` tokens.
    Rate { rate: f64, floor: u64 },
}

impl Default for MinSupport {
    fn default() -> Self {
        MinSupport::Absolute(5)
    }
}

impl MinSupport {
    pub fn resolve(&self, total_tokens: usize) -> Result<u64> {
        let eps = match *self {
            MinSupport::Absolute(n) => n,
            MinSupport::Rate { rate, floor } => {
                if !(rate.is_finite() && rate >= 0.0) {
                    return Err(Error::param(format!("support rate must be finite and >= 0, got {rate}")));
                }
                floor.max((rate * total_tokens as f64).ceil() as u64)
            }
        };
        if eps == 0 {
            return Err(Error::param("minimum support must be at least 1"));
        }
        Ok(eps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub min_support: MinSupport,
    /// Longest phrase to mine; `None` mines until every document drops out.
    pub max_len: Option<usize>,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            min_support: MinSupport::default(),
            max_len: Some(6),
        }
    }
}

impl MinerConfig {
    pub fn absolute(eps: u64) -> Self {
        Self {
            min_support: MinSupport::Absolute(eps),
            ..Self::default()
        }
    }

    pub fn unbounded(eps: u64) -> Self {
        Self {
            min_support: MinSupport::Absolute(eps),
            max_len: None,
        }
    }
}

/// Frequent phrases and their exact corpus frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhraseCounter {
    counts: Counts,
    min_support: u64,
}

impl PhraseCounter {
    /// Builds a counter from stored entries, dropping anything below `min_support`.
    pub fn from_entries<I>(entries: I, min_support: u64) -> Self
    where
        I: IntoIterator<Item = (Vec<WordId>, u64)>,
    {
        let counts = entries
            .into_iter()
            .filter(|(p, c)| !p.is_empty() && *c >= min_support)
            .map(|(p, c)| (p.into_boxed_slice(), c))
            .collect();
        Self {
            counts,
            min_support,
        }
    }

    /// Stored frequency of `phrase`, 0 if it is not frequent.
    pub fn count(&self, phrase: &[WordId]) -> u64 {
        self.counts.get(phrase).copied().unwrap_or(0)
    }

    pub fn min_support(&self) -> u64 {
        self.min_support
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[WordId], u64)> {
        self.counts.iter().map(|(k, &v)| (&**k, v))
    }

    pub fn max_phrase_len(&self) -> usize {
        self.counts.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    /// Entries ordered by descending count, then by surface text.
    pub fn sorted_entries(&self, vocab: &Vocabulary) -> Vec<(String, u64)> {
        let mut out: Vec<(String, u64)> = self.iter().map(|(p, c)| (vocab.join(p), c)).collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Writes `phrase<TAB>count` lines.
    pub fn write_tsv<W: Write>(&self, vocab: &Vocabulary, mut out: W) -> std::io::Result<()> {
        for (phrase, count) in self.sorted_entries(vocab) {
            writeln!(out, "{phrase}\t{count}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(input: R, vocab: &Vocabulary, min_support: u64) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::format("phrase table", e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let bad = |d: &str| Error::format("phrase table", format!("line {}: {d}", i + 1));
            let (text, count) = line.rsplit_once('\t').ok_or_else(|| bad("missing tab"))?;
            let count: u64 = count.trim().parse().map_err(|_| bad("bad count"))?;
            let ids = vocab
                .lookup_phrase(text)
                .ok_or_else(|| bad("phrase has a word outside the vocabulary"))?;
            entries.push((ids, count));
        }
        Ok(Self::from_entries(entries, min_support))
    }
}

/// Per-round bookkeeping exposed for verification.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MiningTrace {
    /// For each document, the phrase length at which it had no candidate left
    /// and was dropped. `None` if it was still active when mining stopped.
    pub dropped_at: Vec<Option<usize>>,
    /// Total active positions at the start of each round, indexed by `n - 1`.
    pub active_positions: Vec<usize>,
}

struct ActiveDoc {
    doc: usize,
    positions: Vec<u32>,
}

pub fn mine(corpus: &Corpus, config: &MinerConfig) -> Result<PhraseCounter> {
    mine_with_trace(corpus, config).map(|(c, _)| c)
}

pub fn mine_with_trace(corpus: &Corpus, config: &MinerConfig) -> Result<(PhraseCounter, MiningTrace)> {
    let eps = config.min_support.resolve(corpus.total_tokens)?;
    if config.max_len == Some(0) {
        return Err(Error::param("max phrase length must be at least 1"));
    }
    let docs = &corpus.docs;
    let chunk_ends: Vec<Vec<u32>> = docs
        .par_iter()
        .map(|d| d.chunk_ends().into_iter().map(|e| e as u32).collect())
        .collect();

    let mut trace = MiningTrace {
        dropped_at: vec![None; docs.len()],
        active_positions: Vec::new(),
    };
    let mut counts = count_windows(
        docs.iter().enumerate().flat_map(|(d, doc)| (0..doc.len() as u32).map(move |i| (d, i))),
        corpus,
        1,
    );
    let mut active: Vec<ActiveDoc> = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        if doc.is_empty() {
            trace.dropped_at[d] = Some(1);
        } else {
            active.push(ActiveDoc {
                doc: d,
                positions: (0..doc.len() as u32).collect(),
            });
        }
    }
    trace
        .active_positions
        .push(active.iter().map(|a| a.positions.len()).sum());

    let mut n = 2;
    while !active.is_empty() && config.max_len.is_none_or(|m| n <= m) {
        // Keep positions whose length-(n-1) phrase is frequent, then keep the
        // ones whose right neighbour (same chunk) survived too: those are the
        // starts of length-n candidates. The last surviving index never
        // qualifies since it has no right neighbour.
        let counts_ref = &counts;
        active.par_iter_mut().for_each(|a| {
            let tokens = &docs[a.doc].tokens;
            let ends = &chunk_ends[a.doc];
            let frequent: Vec<u32> = a
                .positions
                .iter()
                .copied()
                .filter(|&i| {
                    let i = i as usize;
                    counts_ref.get(&tokens[i..i + n - 1]).copied().unwrap_or(0) >= eps
                })
                .collect();
            a.positions = frequent
                .windows(2)
                .filter(|w| w[1] == w[0] + 1 && ends[w[0] as usize] == ends[w[1] as usize])
                .map(|w| w[0])
                .collect();
        });
        for a in active.iter().filter(|a| a.positions.is_empty()) {
            trace.dropped_at[a.doc] = Some(n);
        }
        active.retain(|a| !a.positions.is_empty());
        trace
            .active_positions
            .push(active.iter().map(|a| a.positions.len()).sum());

        let round = count_windows(
            active
                .iter()
                .flat_map(|a| a.positions.iter().map(move |&i| (a.doc, i))),
            corpus,
            n,
        );
        counts.extend(round);
        n += 1;
    }

    counts.retain(|_, c| *c >= eps);
    Ok((
        PhraseCounter {
            counts,
            min_support: eps,
        },
        trace,
    ))
}

/// Counts the length-`n` windows starting at each `(doc, position)`.
fn count_windows<I>(starts: I, corpus: &Corpus, n: usize) -> Counts
where
    I: Iterator<Item = (usize, u32)>,
{
    let starts: Vec<(usize, u32)> = starts.collect();
    let add = |mut acc: Counts, &(d, i): &(usize, u32)| {
        let i = i as usize;
        let key = &corpus.docs[d].tokens[i..i + n];
        match acc.get_mut(key) {
            Some(c) => *c += 1,
            None => {
                acc.insert(key.into(), 1);
            }
        }
        acc
    };
    if rayon::current_num_threads() <= 1 {
        return starts.iter().fold(Counts::new(), add);
    }
    starts
        .par_chunks(4096)
        .map(|chunk| chunk.iter().fold(Counts::new(), add))
        .reduce(Counts::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_into(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        })
}

fn merge_into(mut big: Counts, small: Counts) -> Counts {
    for (k, v) in small {
        *big.entry(k).or_insert(0) += v;
    }
    big
}
