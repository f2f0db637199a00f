use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    hyper, RepeatedWordRule, TopicEstimates, TopicModelConfig, TopicModelState,
};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::segment::Partition;

/// Unnormalized conditional weights for giving the clique `words` of
/// document `d` each topic. The clique must already be removed from `state`.
/// Returns the weight total.
///
/// Single-token cliques use the usual LDA conditional directly; longer
/// cliques are accumulated in log space and shifted by their maximum before
/// exponentiating.
fn clique_weights(
    state: &TopicModelState,
    config: &TopicModelConfig,
    beta_sum: f64,
    words: &[u32],
    d: usize,
    out: &mut Vec<f64>,
) -> f64 {
    let kk = state.topics;
    out.clear();
    if let [w] = *words {
        let w = w as usize;
        let bw = config.beta.get(w);
        let mut total = 0.0;
        for k in 0..kk {
            let p = (config.alpha[k] + state.doc_topic(d, k) as f64) * (bw + state.word_topic(w, k) as f64)
                / (beta_sum + state.n_k[k] as f64);
            total += p;
            out.push(p);
        }
        return total;
    }

    // earlier occurrences of the same word inside this clique
    let repeats: Vec<f64> = match config.repeated_words {
        RepeatedWordRule::Exact => words
            .iter()
            .enumerate()
            .map(|(j, w)| words[..j].iter().filter(|&u| u == w).count() as f64)
            .collect(),
        RepeatedWordRule::HeldOutCount => vec![0.0; words.len()],
    };
    let mut max = f64::NEG_INFINITY;
    for k in 0..kk {
        let ndk = state.doc_topic(d, k) as f64 + config.alpha[k];
        let nk = state.n_k[k] as f64 + beta_sum;
        let mut lp = 0.0;
        for (j, (&w, rep)) in words.iter().zip(&repeats).enumerate() {
            let w = w as usize;
            let j = j as f64;
            lp += (ndk + j).ln() + (config.beta.get(w) + state.word_topic(w, k) as f64 + rep).ln()
                - (nk + j).ln();
        }
        max = max.max(lp);
        out.push(lp);
    }
    let mut total = 0.0;
    for p in out.iter_mut() {
        *p = (*p - max).exp();
        total += *p;
    }
    total
}

#[inline]
fn draw<R: Rng>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.len() - 1
}

/// Posterior over the topic of clique `(d, g)` given every other assignment.
///
/// `state` must not contain the clique's own tokens (see
/// [`TopicModelState::remove_clique`]).
pub fn clique_conditional(
    state: &TopicModelState,
    config: &TopicModelConfig,
    corpus: &Corpus,
    partitions: &[Partition],
    d: usize,
    g: usize,
) -> Vec<f64> {
    let span = partitions[d].spans[g];
    let words = &corpus.docs[d].tokens[span.range()];
    let mut out = Vec::with_capacity(state.topics);
    let total = clique_weights(state, config, config.beta.sum(state.vocab_size), words, d, &mut out);
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// A single Gibbs chain.
///
/// Cliques are initialized to uniformly random topics, then visited
/// document by document, left to right, once per sweep.
pub struct Sampler<'a> {
    corpus: &'a Corpus,
    partitions: &'a [Partition],
    config: TopicModelConfig,
    state: TopicModelState,
    rng: ChaCha8Rng,
    beta_sum: f64,
    doc_lens: Vec<usize>,
    iteration: usize,
    weights: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(corpus: &'a Corpus, partitions: &'a [Partition], config: TopicModelConfig) -> Result<Self> {
        config.validate(Some(corpus.vocab.len()))?;
        if partitions.len() != corpus.num_docs() {
            return Err(Error::param(format!(
                "{} partitions for {} documents",
                partitions.len(),
                corpus.num_docs()
            )));
        }
        for (doc, part) in corpus.docs.iter().zip(partitions) {
            part.validate(doc, None)?;
        }
        let kk = config.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let z: Vec<Vec<u32>> = partitions
            .iter()
            .map(|p| (0..p.len()).map(|_| rng.random_range(0..kk as u32)).collect())
            .collect();
        let state = TopicModelState::from_assignments(z, kk, corpus, partitions)?;
        Ok(Self {
            corpus,
            partitions,
            beta_sum: config.beta.sum(corpus.vocab.len()),
            config,
            state,
            rng,
            doc_lens: corpus.docs.iter().map(|d| d.len()).collect(),
            iteration: 0,
            weights: Vec::with_capacity(kk),
        })
    }

    /// One pass over every clique, followed by a hyperparameter update when due.
    pub fn sweep(&mut self) {
        for (d, (doc, part)) in self.corpus.docs.iter().zip(self.partitions).enumerate() {
            for (g, span) in part.spans.iter().enumerate() {
                let words = &doc.tokens[span.range()];
                let old = self.state.z[d][g] as usize;
                self.state.remove(d, old, words);
                let total = clique_weights(&self.state, &self.config, self.beta_sum, words, d, &mut self.weights);
                let k = draw(&mut self.rng, &self.weights, total);
                self.state.z[d][g] = k as u32;
                self.state.add(d, k, words);
            }
        }
        self.iteration += 1;
        let c = &self.config;
        if c.optimize_hyperparams
            && self.iteration > c.burn_in
            && (self.iteration - c.burn_in) % c.optimize_interval == 0
        {
            hyper::optimize_hyperparameters(&self.state, &mut self.config, &self.doc_lens);
            self.beta_sum = self.config.beta.sum(self.corpus.vocab.len());
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn state(&self) -> &TopicModelState {
        &self.state
    }

    pub fn config(&self) -> &TopicModelConfig {
        &self.config
    }

    pub fn estimates(&self) -> TopicEstimates {
        TopicEstimates::from_state(&self.state, &self.config, &self.doc_lens)
    }

    pub fn finish(self) -> TrainedModel {
        let estimates = self.estimates();
        TrainedModel {
            sample_log: self.state.z.clone(),
            state: self.state,
            estimates,
            config: self.config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    /// Final configuration, including optimized hyperparameters.
    pub config: TopicModelConfig,
    pub state: TopicModelState,
    pub estimates: TopicEstimates,
    /// Clique topics of the last sweep.
    pub sample_log: Vec<Vec<u32>>,
}

/// Runs `config.iterations` sweeps and returns the final sample.
pub fn gibbs_run(corpus: &Corpus, partitions: &[Partition], config: &TopicModelConfig) -> Result<TrainedModel> {
    let mut sampler = Sampler::new(corpus, partitions, config.clone())?;
    if corpus.num_docs() > 0 {
        for _ in 0..config.iterations {
            sampler.sweep();
        }
    }
    Ok(sampler.finish())
}

/// Independent chains, one per seed, run in parallel.
pub fn gibbs_run_chains(
    corpus: &Corpus,
    partitions: &[Partition],
    config: &TopicModelConfig,
    seeds: &[u64],
) -> Result<Vec<TrainedModel>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            gibbs_run(corpus, partitions, &c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::lda::BetaPrior;
    use crate::segment::Span;

    fn tiny(tokens: &[u32], spans: &[(usize, usize)], v: usize) -> (Corpus, Vec<Partition>) {
        let vocab = Vocabulary::from((0..v).map(|i| format!("w{i}")).collect::<Vec<_>>());
        let doc = Document::from_tokens("d", tokens.to_vec(), vec![0], &vocab);
        let corpus = Corpus::new(vec![doc], vocab).unwrap();
        let part = Partition {
            spans: spans.iter().map(|&(s, e)| Span::new(s, e)).collect(),
        };
        (corpus, vec![part])
    }

    #[test]
    fn single_topic_conditional_is_one() {
        let (corpus, parts) = tiny(&[0, 1, 1], &[(0, 2), (2, 3)], 2);
        let cfg = TopicModelConfig::new(1, 3).with_alpha(1.0).with_beta(1.0);
        let mut s = TopicModelState::from_assignments(vec![vec![0, 0]], 1, &corpus, &parts).unwrap();
        s.remove_clique(&corpus, &parts, 0, 0);
        assert_eq!(clique_conditional(&s, &cfg, &corpus, &parts, 0, 0), vec![1.0]);
    }

    #[test]
    fn singleton_clique_is_lda_conditional() {
        let (corpus, parts) = tiny(&[0, 1, 0, 1], &[(0, 1), (1, 2), (2, 3), (3, 4)], 2);
        let mut cfg = TopicModelConfig::new(2, 3).with_beta(0.3);
        cfg.alpha = vec![0.5, 0.25];
        let mut s = TopicModelState::from_assignments(vec![vec![0, 1, 1, 0]], 2, &corpus, &parts).unwrap();
        s.remove_clique(&corpus, &parts, 0, 2);
        let p = clique_conditional(&s, &cfg, &corpus, &parts, 0, 2);
        // remaining: w0->k0, w1->k1, w1->k0; n_d = [2,1]; n_w0 = [1,0]; n_k = [2,1]
        let raw = [
            (0.5 + 2.0) * (0.3 + 1.0) / (0.6 + 2.0),
            (0.25 + 1.0) * (0.3 + 0.0) / (0.6 + 1.0),
        ];
        let t = raw[0] + raw[1];
        assert!((p[0] - raw[0] / t).abs() < 1e-15);
        assert!((p[1] - raw[1] / t).abs() < 1e-15);
    }

    #[test]
    fn repeated_word_rules_differ_only_on_repeats() {
        let (corpus, parts) = tiny(&[0, 0, 1], &[(0, 2), (2, 3)], 2);
        let mut exact = TopicModelConfig::new(2, 1).with_alpha(1.0).with_beta(1.0);
        let mut printed = exact.clone();
        printed.repeated_words = RepeatedWordRule::HeldOutCount;
        exact.repeated_words = RepeatedWordRule::Exact;
        let mut s = TopicModelState::from_assignments(vec![vec![0, 1]], 2, &corpus, &parts).unwrap();
        s.remove_clique(&corpus, &parts, 0, 0);
        let a = clique_conditional(&s, &exact, &corpus, &parts, 0, 0);
        let b = clique_conditional(&s, &printed, &corpus, &parts, 0, 0);
        // exact: k0 -> (1)(2) * (1)(2) / ((2)(3)); k1 -> (2)(3) * (1)(2) / ((3)(4))
        let e = [4.0 / 6.0, 12.0 / 12.0];
        assert!((a[0] - e[0] / (e[0] + e[1])).abs() < 1e-12);
        // held-out: k0 -> (1)(2) * 1*1/(2*3); k1 -> (2)(3) * 1*1 / (3*4)
        let h = [2.0 / 6.0, 6.0 / 12.0];
        assert!((b[0] - h[0] / (h[0] + h[1])).abs() < 1e-12);
    }

    #[test]
    fn long_cliques_do_not_underflow() {
        let tokens: Vec<u32> = (0..400).map(|i| i % 50).collect();
        let (corpus, parts) = tiny(&tokens, &[(0, 400)], 50);
        let cfg = TopicModelConfig::new(3, 1).with_alpha(0.01).with_beta(1e-4);
        let mut s = TopicModelState::from_assignments(vec![vec![2]], 3, &corpus, &parts).unwrap();
        s.remove_clique(&corpus, &parts, 0, 0);
        let p = clique_conditional(&s, &cfg, &corpus, &parts, 0, 0);
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let (corpus, parts) = tiny(&[0, 1, 0], &[(0, 2), (2, 3)], 2);
        let mut cfg = TopicModelConfig::new(4, 9);
        cfg.iterations = 0;
        cfg.burn_in = 0;
        let m = gibbs_run(&corpus, &parts, &cfg).unwrap();
        let init = Sampler::new(&corpus, &parts, cfg).unwrap();
        assert_eq!(&m.state, init.state());
        m.state.check_consistency(&corpus, &parts).unwrap();
    }

    #[test]
    fn empty_corpus_runs() {
        let corpus = Corpus::default();
        let m = gibbs_run(&corpus, &[], &TopicModelConfig::new(3, 1)).unwrap();
        assert!(m.state.z.is_empty());
        assert_eq!(m.state.n_k, vec![0, 0, 0]);
    }

    #[test]
    fn more_topics_than_tokens() {
        let (corpus, parts) = tiny(&[0, 1], &[(0, 1), (1, 2)], 2);
        let cfg = TopicModelConfig::new(10, 2).with_iterations(20);
        let m = gibbs_run(&corpus, &parts, &cfg).unwrap();
        assert!(m.state.n_k.iter().filter(|&&n| n == 0).count() >= 8);
        for d in 0..m.estimates.num_docs() {
            assert!((m.estimates.theta(d).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for k in 0..10 {
            assert!((m.estimates.phi(k).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn clique_tokens_share_topics() {
        let (corpus, parts) = tiny(&[0, 1, 2, 0, 1, 2], &[(0, 3), (3, 4), (4, 6)], 3);
        let m = gibbs_run(&corpus, &parts, &TopicModelConfig::new(3, 5).with_iterations(30)).unwrap();
        let tt = m.state.token_topics(&parts);
        assert!(tt[0][0] == tt[0][1] && tt[0][1] == tt[0][2]);
        assert_eq!(tt[0][4], tt[0][5]);
    }

    #[test]
    fn mismatched_partitions_are_rejected() {
        let (corpus, _) = tiny(&[0, 1], &[(0, 2)], 2);
        let bad = vec![Partition { spans: vec![Span::new(0, 1)] }];
        assert!(Sampler::new(&corpus, &bad, TopicModelConfig::new(2, 1)).is_err());
        assert!(Sampler::new(&corpus, &[], TopicModelConfig::new(2, 1)).is_err());
        let mut cfg = TopicModelConfig::new(2, 1);
        cfg.beta = BetaPrior::Symmetric(-1.0);
        let good = vec![Partition { spans: vec![Span::new(0, 2)] }];
        assert!(Sampler::new(&corpus, &good, cfg).is_err());
    }

    #[test]
    fn chains_differ_only_by_seed() {
        let (corpus, parts) = tiny(&[0, 1, 2, 0, 1, 2, 1, 1], &[(0, 1), (1, 3), (3, 5), (5, 8)], 3);
        let cfg = TopicModelConfig::new(2, 0).with_iterations(10);
        let chains = gibbs_run_chains(&corpus, &parts, &cfg, &[1, 2, 1]).unwrap();
        assert_eq!(chains[0], chains[2]);
        let mut c1 = cfg.clone();
        c1.seed = 2;
        assert_eq!(chains[1], gibbs_run(&corpus, &parts, &c1).unwrap());
    }
}
