//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use topmine::corpus::{Corpus, Document, Vocabulary};
use topmine::lda::TopicModelConfig;
use topmine::miner::PhraseCounter;
use topmine::segment::{significance, Merge, Partition, Span};

/// Corpus over words `w0..w{v-1}` from raw id sequences and chunk starts.
/// Chunk starts of empty documents are ignored.
pub fn corpus_from(docs: &[(Vec<u32>, Vec<usize>)], v: usize) -> Corpus {
    let vocab = Vocabulary::from((0..v).map(|i| format!("w{i}")).collect::<Vec<_>>());
    let docs = docs
        .iter()
        .enumerate()
        .map(|(i, (t, c))| {
            let starts = if t.is_empty() { Vec::new() } else { c.clone() };
            Document::from_tokens(format!("d{i}"), t.clone(), starts, &vocab)
        })
        .collect();
    Corpus::new(docs, vocab).unwrap()
}

/// Random corpus: up to `max_docs` documents of up to `max_len` tokens over
/// `v` words, each split into random chunks.
pub fn random_corpus(rng: &mut impl Rng, max_docs: usize, max_len: usize, v: usize) -> Corpus {
    let n = rng.random_range(1..=max_docs);
    let docs: Vec<(Vec<u32>, Vec<usize>)> = (0..n)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            let tokens: Vec<u32> = (0..len).map(|_| rng.random_range(0..v as u32)).collect();
            let mut starts = Vec::new();
            for i in 0..len {
                if i == 0 || rng.random_bool(0.15) {
                    starts.push(i);
                }
            }
            (tokens, starts)
        })
        .collect();
    corpus_from(&docs, v)
}

/// Every contiguous n-gram inside a chunk, counted over the corpus.
pub fn all_ngrams(corpus: &Corpus) -> HashMap<Vec<u32>, u64> {
    let mut counts = HashMap::new();
    for doc in &corpus.docs {
        for chunk in doc.chunks() {
            for s in chunk.clone() {
                for e in s + 1..=chunk.end {
                    *counts.entry(doc.tokens[s..e].to_vec()).or_insert(0) += 1;
                }
            }
        }
    }
    counts
}

/// Brute-force frequent phrase table.
pub fn frequent_ngrams(corpus: &Corpus, eps: u64, max_len: Option<usize>) -> HashMap<Vec<u32>, u64> {
    all_ngrams(corpus)
        .into_iter()
        .filter(|(p, c)| *c >= eps && max_len.is_none_or(|m| p.len() <= m))
        .collect()
}

pub fn counter_map(counter: &PhraseCounter) -> HashMap<Vec<u32>, u64> {
    counter.iter().map(|(p, c)| (p.to_vec(), c)).collect()
}

/// Checks that `merges` is exactly what a greedy agglomeration would do:
/// each merge joins the most significant adjacent pair in its chunk
/// (leftmost on ties), every merge clears `threshold`, and no remaining pair
/// does. Returns the replayed partition.
pub fn replay_greedy(
    doc: &Document,
    counter: &PhraseCounter,
    total_tokens: u64,
    threshold: f64,
    merges: &[Merge],
) -> Result<Partition, String> {
    let sig = |a: Span, b: Span| {
        let f12 = counter.count(&doc.tokens[a.start..b.end]);
        if f12 == 0 {
            f64::NEG_INFINITY
        } else {
            significance(
                counter.count(&doc.tokens[a.range()]),
                counter.count(&doc.tokens[b.range()]),
                f12,
                total_tokens,
            )
        }
    };
    let mut spans: Vec<Span> = Vec::new();
    let mut merges = merges.iter().peekable();
    for chunk in doc.chunks() {
        let mut cur: Vec<Span> = chunk.map(|i| Span::new(i, i + 1)).collect();
        loop {
            let best = (0..cur.len().saturating_sub(1))
                .map(|i| (i, sig(cur[i], cur[i + 1])))
                .fold(None::<(usize, f64)>, |acc, (i, s)| match acc {
                    Some((_, b)) if b >= s => acc,
                    _ => Some((i, s)),
                });
            match best {
                Some((i, s)) if s >= threshold && s > f64::NEG_INFINITY => {
                    let m = merges.next().ok_or("greedy merge missing from log")?;
                    if m.left != cur[i] || m.right != cur[i + 1] {
                        return Err(format!("expected merge {:?}+{:?}, log has {:?}", cur[i], cur[i + 1], m));
                    }
                    if (m.significance - s).abs() > 1e-12 {
                        return Err(format!("logged significance {} != {s}", m.significance));
                    }
                    cur[i] = Span::new(cur[i].start, cur[i + 1].end);
                    cur.remove(i + 1);
                }
                _ => break,
            }
        }
        spans.extend(cur);
    }
    if merges.next().is_some() {
        return Err("log has merges beyond the greedy stopping point".into());
    }
    Ok(Partition { spans })
}

/// `ln Γ(a + n) − ln Γ(a)` for integer `n`.
pub fn ln_rising(a: f64, n: u64) -> f64 {
    (0..n).map(|i| (a + i as f64).ln()).sum()
}

/// Full collapsed log joint of a per-token topic assignment, including all
/// normalizing terms, from rising factorials.
pub fn reference_log_joint(corpus: &Corpus, topics: &[Vec<u32>], alpha: &[f64], beta: f64) -> f64 {
    let kk = alpha.len();
    let v = corpus.vocab.len();
    let a_sum: f64 = alpha.iter().sum();
    let b_sum = beta * v as f64;
    let mut lj = 0.0;
    let mut n_xk = vec![0u64; v * kk];
    let mut n_k = vec![0u64; kk];
    for (doc, z) in corpus.docs.iter().zip(topics) {
        let mut n_dk = vec![0u64; kk];
        for (&w, &k) in doc.tokens.iter().zip(z) {
            n_dk[k as usize] += 1;
            n_xk[w as usize * kk + k as usize] += 1;
            n_k[k as usize] += 1;
        }
        for k in 0..kk {
            lj += ln_rising(alpha[k], n_dk[k]);
        }
        lj -= ln_rising(a_sum, doc.len() as u64);
    }
    for k in 0..kk {
        for x in 0..v {
            lj += ln_rising(beta, n_xk[x * kk + k]);
        }
        lj -= ln_rising(b_sum, n_k[k]);
    }
    lj
}

/// Per-token topics of clique assignments.
pub fn expand(partitions: &[Partition], z: &[Vec<u32>]) -> Vec<Vec<u32>> {
    partitions
        .iter()
        .zip(z)
        .map(|(p, zd)| {
            p.spans
                .iter()
                .zip(zd)
                .flat_map(|(s, &k)| std::iter::repeat_n(k, s.len()))
                .collect()
        })
        .collect()
}

/// Plain token-level collapsed Gibbs LDA with a symmetric β. Random draws
/// follow the same protocol as the library sampler: ChaCha8 seeded from
/// the config seed, uniform initial topics in document order, one uniform
/// `f64` per token scaled by the weight total and matched by cumulative
/// scan over topics in order.
pub struct ReferenceLda<'a> {
    corpus: &'a Corpus,
    alpha: Vec<f64>,
    beta: f64,
    rng: ChaCha8Rng,
    pub z: Vec<Vec<u32>>,
    n_dk: Vec<Vec<f64>>,
    n_wk: Vec<Vec<f64>>,
    n_k: Vec<f64>,
}

impl<'a> ReferenceLda<'a> {
    pub fn new(corpus: &'a Corpus, config: &TopicModelConfig, beta: f64) -> Self {
        let kk = config.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let z: Vec<Vec<u32>> = corpus
            .docs
            .iter()
            .map(|d| (0..d.len()).map(|_| rng.random_range(0..kk as u32)).collect())
            .collect();
        let mut n_dk = vec![vec![0.0; kk]; corpus.num_docs()];
        let mut n_wk = vec![vec![0.0; kk]; corpus.vocab.len()];
        let mut n_k = vec![0.0; kk];
        for (d, doc) in corpus.docs.iter().enumerate() {
            for (i, &w) in doc.tokens.iter().enumerate() {
                let k = z[d][i] as usize;
                n_dk[d][k] += 1.0;
                n_wk[w as usize][k] += 1.0;
                n_k[k] += 1.0;
            }
        }
        Self {
            corpus,
            alpha: config.alpha.clone(),
            beta,
            rng,
            z,
            n_dk,
            n_wk,
            n_k,
        }
    }

    pub fn sweep(&mut self) {
        let kk = self.alpha.len();
        let v_beta = self.beta * self.corpus.vocab.len() as f64;
        let mut p = vec![0.0; kk];
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.tokens.iter().enumerate() {
                let w = w as usize;
                let old = self.z[d][i] as usize;
                self.n_dk[d][old] -= 1.0;
                self.n_wk[w][old] -= 1.0;
                self.n_k[old] -= 1.0;
                let mut total = 0.0;
                for k in 0..kk {
                    p[k] = (self.alpha[k] + self.n_dk[d][k]) * (self.beta + self.n_wk[w][k]) / (v_beta + self.n_k[k]);
                    total += p[k];
                }
                let u = self.rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut new = kk - 1;
                for (k, &pk) in p.iter().enumerate() {
                    acc += pk;
                    if u < acc {
                        new = k;
                        break;
                    }
                }
                self.z[d][i] = new as u32;
                self.n_dk[d][new] += 1.0;
                self.n_wk[w][new] += 1.0;
                self.n_k[new] += 1.0;
            }
        }
    }
}

/// Digamma at `n + 1` for integer `n`: `H_n − γ`.
pub fn digamma_int_plus_one(n: u64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    (1..=n).map(|i| 1.0 / i as f64).sum::<f64>() - EULER_GAMMA
}
