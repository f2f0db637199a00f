//! Held-out perplexity by document completion, the LDA vs phrase-constrained
//! comparison built on it, and the mining/modeling runtime benchmark.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::lda::{gibbs_run, TopicEstimates, TopicModelConfig};
use crate::miner::{mine, MinerConfig};
use crate::segment::{segment_corpus, Partition, SignificanceParams};
use crate::synth::{generate_tokens, SyntheticConfig};

pub const DEFAULT_FOLD_IN_SWEEPS: usize = 100;
pub const DEFAULT_HOLDOUT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityResult {
    pub model_name: String,
    /// Tokens actually scored.
    pub held_out_tokens: usize,
    pub log_likelihood: f64,
    pub perplexity: f64,
    pub bits: f64,
    /// Second-half tokens missing from the training vocabulary.
    pub skipped_tokens: usize,
    /// Documents with nothing to score.
    pub skipped_docs: usize,
}

/// Settings of the per-document Gibbs runs that estimate `θ` on the observed
/// half with `φ` held fixed. `θ` is averaged over the second half of the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldIn {
    pub sweeps: usize,
    pub seed: u64,
}

impl FoldIn {
    pub fn new(seed: u64) -> Self {
        Self {
            sweeps: DEFAULT_FOLD_IN_SWEEPS,
            seed,
        }
    }
}

/// The RNG of a held-out document depends only on the seed and the
/// document id, so results do not depend on document order.
fn doc_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(b))
}

struct DocScore {
    id: String,
    log_likelihood: f64,
    scored: usize,
    skipped: usize,
}

/// Gibbs fold-in of the observed cliques; returns the averaged `θ`.
fn fold_in_theta(cliques: &[Vec<usize>], phi: &TopicEstimates, alpha: &[f64], fold_in: &FoldIn, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let kk = phi.topics;
    let alpha_sum: f64 = alpha.iter().sum();
    let observed: usize = cliques.iter().map(Vec::len).sum();
    if observed == 0 {
        return alpha.iter().map(|a| a / alpha_sum).collect();
    }
    let v = phi.vocab_size;
    let mut n_k = vec![0usize; kk];
    let mut z: Vec<usize> = cliques.iter().map(|_| rng.random_range(0..kk)).collect();
    for (c, &k) in cliques.iter().zip(&z) {
        n_k[k] += c.len();
    }
    let denom = observed as f64 + alpha_sum;
    let estimate = |n_k: &[usize]| -> Vec<f64> { (0..kk).map(|k| (n_k[k] as f64 + alpha[k]) / denom).collect() };
    if fold_in.sweeps == 0 {
        return estimate(&n_k);
    }
    let keep_from = fold_in.sweeps / 2;
    let mut sum = vec![0.0; kk];
    let mut kept = 0usize;
    let mut w = vec![0.0; kk];
    for sweep in 0..fold_in.sweeps {
        for (c, zc) in cliques.iter().zip(z.iter_mut()) {
            n_k[*zc] -= c.len();
            let mut max = f64::NEG_INFINITY;
            for k in 0..kk {
                let base = alpha[k] + n_k[k] as f64;
                let row = &phi.phi[k * v..(k + 1) * v];
                let lp: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| (base + j as f64).ln() + row[x].ln())
                    .sum();
                w[k] = lp;
                max = max.max(lp);
            }
            let mut total = 0.0;
            for p in w.iter_mut() {
                *p = (*p - max).exp();
                total += *p;
            }
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = kk - 1;
            for (k, &p) in w.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            *zc = pick;
            n_k[pick] += c.len();
        }
        if sweep >= keep_from {
            for (s, t) in sum.iter_mut().zip(estimate(&n_k)) {
                *s += t;
            }
            kept += 1;
        }
    }
    sum.iter().map(|s| s / kept as f64).collect()
}

/// Document-completion perplexity.
///
/// For each held-out document the tokens before the midpoint (`len / 2`)
/// are folded in: their phrase cliques (cut at the midpoint) get topics
/// by Gibbs sampling against the fixed `φ`, giving `θ`. Each remaining token
/// is scored with `Σ_k θ_k φ_{k,x}`. Words are matched to the training
/// vocabulary by text; unknown words are skipped and counted.
pub fn perplexity(
    model_name: &str,
    estimates: &TopicEstimates,
    alpha: &[f64],
    train_vocab: &Vocabulary,
    held_out: &Corpus,
    partitions: &[Partition],
    fold_in: &FoldIn,
) -> Result<PerplexityResult> {
    if held_out.num_docs() == 0 {
        return Err(Error::param("held-out set is empty"));
    }
    if partitions.len() != held_out.num_docs() {
        return Err(Error::param(format!(
            "{} partitions for {} held-out documents",
            partitions.len(),
            held_out.num_docs()
        )));
    }
    if alpha.len() != estimates.topics || estimates.topics == 0 {
        return Err(Error::param("alpha must have one entry per topic"));
    }
    if estimates.vocab_size != train_vocab.len() {
        return Err(Error::param("estimates and training vocabulary disagree in size"));
    }
    let same_vocab = held_out.vocab == *train_vocab;
    let map: Vec<Option<usize>> = if same_vocab {
        (0..train_vocab.len()).map(Some).collect()
    } else {
        held_out
            .vocab
            .words()
            .iter()
            .map(|w| train_vocab.id(w).map(|i| i as usize))
            .collect()
    };
    let kk = estimates.topics;
    let v = estimates.vocab_size;

    let mut scores: Vec<DocScore> = held_out
        .docs
        .par_iter()
        .zip(partitions)
        .map(|(doc, part)| {
            let mid = doc.len() / 2;
            let ids: Vec<Option<usize>> = doc.tokens.iter().map(|&t| map[t as usize]).collect();
            let cliques: Vec<Vec<usize>> = part
                .spans
                .iter()
                .filter(|s| s.start < mid)
                .map(|s| ids[s.start..s.end.min(mid)].iter().flatten().copied().collect::<Vec<_>>())
                .filter(|c| !c.is_empty())
                .collect();
            let mut rng = doc_rng(fold_in.seed, &doc.id);
            let theta = fold_in_theta(&cliques, estimates, alpha, fold_in, &mut rng);
            let mut ll = 0.0;
            let mut scored = 0;
            let mut skipped = 0;
            for x in &ids[mid..] {
                match *x {
                    Some(x) => {
                        let p: f64 = (0..kk).map(|k| theta[k] * estimates.phi[k * v + x]).sum();
                        ll += p.ln();
                        scored += 1;
                    }
                    None => skipped += 1,
                }
            }
            DocScore {
                id: doc.id.clone(),
                log_likelihood: ll,
                scored,
                skipped,
            }
        })
        .collect();
    // fixed summation order
    scores.sort_by(|a, b| a.id.cmp(&b.id).then(a.log_likelihood.total_cmp(&b.log_likelihood)));
    let tokens: usize = scores.iter().map(|s| s.scored).sum();
    let skipped_tokens = scores.iter().map(|s| s.skipped).sum();
    let skipped_docs = scores.iter().filter(|s| s.scored == 0).count();
    if skipped_docs > 0 {
        log::warn!("{model_name}: {skipped_docs} held-out documents had no tokens to score");
    }
    if tokens == 0 {
        return Err(Error::param("held-out set has no scorable tokens"));
    }
    let ll: f64 = scores.iter().map(|s| s.log_likelihood).sum();
    let perplexity = (-ll / tokens as f64).exp();
    Ok(PerplexityResult {
        model_name: model_name.to_string(),
        held_out_tokens: tokens,
        log_likelihood: ll,
        perplexity,
        bits: perplexity.log2(),
        skipped_tokens,
        skipped_docs,
    })
}

/// Document indices `(train, test)` for fold `fold`: the test block has
/// `round(fraction * D)` documents (at least 1); fold 0 is the last block,
/// fold 1 the block before it, and so on.
pub fn holdout_split(num_docs: usize, fraction: f64, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let h = ((num_docs as f64 * fraction).round() as usize).max(1);
    if h >= num_docs || (fold + 1) * h > num_docs {
        return Err(Error::param(format!(
            "cannot hold out fold {fold} of {h} documents from {num_docs}"
        )));
    }
    let start = num_docs - (fold + 1) * h;
    let test: Vec<usize> = (start..start + h).collect();
    let train = (0..start).chain(start + h..num_docs).collect();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub miner: MinerConfig,
    pub threshold: f64,
    pub model: TopicModelConfig,
    pub holdout: f64,
    pub folds: usize,
    pub fold_in_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldComparison {
    pub fold: usize,
    pub lda: PerplexityResult,
    pub phrase_lda: PerplexityResult,
}

/// Trains plain LDA (singleton partitions) and the phrase-constrained model
/// on the training documents of each fold and scores both on the held-out
/// block with the same protocol and seed. Phrases are mined and
/// significance-tested on the training documents only. Fold `i` uses seed
/// `model.seed + i`.
pub fn compare_models(corpus: &Corpus, cfg: &ComparisonConfig) -> Result<Vec<FoldComparison>> {
    if cfg.folds == 0 {
        return Err(Error::param("folds must be at least 1"));
    }
    let splits = (0..cfg.folds)
        .map(|f| holdout_split(corpus.num_docs(), cfg.holdout, f))
        .collect::<Result<Vec<_>>>()?;
    splits
        .into_par_iter()
        .enumerate()
        .map(|(fold, (train_idx, test_idx))| {
            let train = corpus.subset(&train_idx);
            let test = corpus.subset(&test_idx);
            let counter = mine(&train, &cfg.miner)?;
            let params = SignificanceParams::new(cfg.threshold, train.total_tokens.max(1) as u64)?;
            let phrase_train = segment_corpus(&train, &counter, &params);
            let phrase_test = segment_corpus(&test, &counter, &params);
            let single_train: Vec<Partition> = train.docs.iter().map(Partition::singletons).collect();
            let single_test: Vec<Partition> = test.docs.iter().map(Partition::singletons).collect();

            let mut model = cfg.model.clone();
            model.seed = cfg.model.seed.wrapping_add(fold as u64);
            let fold_in = FoldIn {
                sweeps: cfg.fold_in_sweeps,
                seed: model.seed,
            };
            let run = |name: &str, tp: &[Partition], hp: &[Partition]| -> Result<PerplexityResult> {
                let m = gibbs_run(&train, tp, &model)?;
                perplexity(name, &m.estimates, &m.config.alpha, &train.vocab, &test, hp, &fold_in)
            };
            Ok(FoldComparison {
                fold,
                lda: run("lda", &single_train, &single_test)?,
                phrase_lda: run("phrase_lda", &phrase_train, &phrase_test)?,
            })
        })
        .collect()
}

/// Columns: fold, model, held_out_tokens, log_likelihood, perplexity, bits.
pub fn write_comparison_csv<W: Write>(rows: &[FoldComparison], mut out: W) -> std::io::Result<()> {
    writeln!(out, "fold,model,held_out_tokens,log_likelihood,perplexity,bits")?;
    for r in rows {
        for p in [&r.lda, &r.phrase_lda] {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                r.fold, p.model_name, p.held_out_tokens, p.log_likelihood, p.perplexity, p.bits
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub synth: SyntheticConfig,
    pub miner: MinerConfig,
    pub threshold: f64,
    pub model: TopicModelConfig,
    /// Mining is timed this many times and the fastest run kept.
    pub mining_repeats: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRow {
    pub tokens: usize,
    pub docs: usize,
    /// Frequent phrase mining plus segmentation.
    pub mining_seconds: f64,
    pub modeling_seconds: f64,
}

/// Times phrase mining (mining + segmentation) and topic modeling
/// separately on synthetic corpora of the given token counts.
pub fn runtime_decomposition(sizes: &[usize], cfg: &BenchConfig) -> Result<Vec<RuntimeRow>> {
    sizes
        .iter()
        .map(|&n| {
            let corpus = generate_tokens(&cfg.synth, n)?.corpus;
            let (mining_seconds, partitions) = time_mining(&corpus, cfg)?;
            let start = Instant::now();
            gibbs_run(&corpus, &partitions, &cfg.model)?;
            Ok(RuntimeRow {
                tokens: corpus.total_tokens,
                docs: corpus.num_docs(),
                mining_seconds,
                modeling_seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

/// Fastest of `cfg.mining_repeats` mining runs, with the resulting partitions.
pub fn time_mining(corpus: &Corpus, cfg: &BenchConfig) -> Result<(f64, Vec<Partition>)> {
    let params = SignificanceParams::new(cfg.threshold, corpus.total_tokens.max(1) as u64)?;
    let mut best = f64::INFINITY;
    let mut partitions = Vec::new();
    for _ in 0..cfg.mining_repeats.max(1) {
        let start = Instant::now();
        let counter = mine(corpus, &cfg.miner)?;
        partitions = segment_corpus(corpus, &counter, &params);
        best = best.min(start.elapsed().as_secs_f64());
    }
    Ok((best, partitions))
}

/// Columns: tokens, docs, mining_seconds, modeling_seconds.
pub fn write_runtime_csv<W: Write>(rows: &[RuntimeRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tokens,docs,mining_seconds,modeling_seconds")?;
    for r in rows {
        writeln!(out, "{},{},{:.6},{:.6}", r.tokens, r.docs, r.mining_seconds, r.modeling_seconds)?;
    }
    Ok(())
}
