use statrs::function::gamma::ln_gamma;

use super::{TopicModelConfig, TopicModelState};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::segment::Partition;

/// Log of the collapsed joint `P(Z, W)` up to a constant that does not
/// depend on `Z`:
///
/// `Σ_k [ Σ_d lnΓ(α_k + n_dk) + Σ_x lnΓ(β_x + n_xk) − lnΓ(Σβ + n_k) ]`
pub fn log_joint(
    state: &TopicModelState,
    config: &TopicModelConfig,
    corpus: &Corpus,
    partitions: &[Partition],
) -> Result<f64> {
    log_joint_tokens(&state.token_topics(partitions), config, corpus, partitions)
}

/// [`log_joint`] over per-token topics. Fails if some phrase mixes topics,
/// since such states have zero probability under the clique constraint.
pub fn log_joint_tokens(
    token_topics: &[Vec<u32>],
    config: &TopicModelConfig,
    corpus: &Corpus,
    partitions: &[Partition],
) -> Result<f64> {
    let kk = config.topics;
    let v = corpus.vocab.len();
    if token_topics.len() != corpus.num_docs() || partitions.len() != corpus.num_docs() {
        return Err(Error::Contract("assignment rows do not match the corpus".into()));
    }
    let mut n_dk = vec![0u64; kk];
    let mut n_xk = vec![0u64; v * kk];
    let mut n_k = vec![0u64; kk];
    let mut total = 0.0;
    for (d, ((doc, part), topics)) in corpus.docs.iter().zip(partitions).zip(token_topics).enumerate() {
        if topics.len() != doc.len() {
            return Err(Error::Contract(format!("document {d}: wrong number of token topics")));
        }
        for span in &part.spans {
            let first = topics[span.start];
            if topics[span.range()].iter().any(|&t| t != first) {
                return Err(Error::Contract(format!(
                    "document {d}: phrase {}..{} mixes topics",
                    span.start, span.end
                )));
            }
        }
        n_dk.iter_mut().for_each(|c| *c = 0);
        for (&w, &k) in doc.tokens.iter().zip(topics) {
            let k = k as usize;
            if k >= kk {
                return Err(Error::Contract(format!("document {d}: topic {k} out of range")));
            }
            n_dk[k] += 1;
            n_xk[w as usize * kk + k] += 1;
            n_k[k] += 1;
        }
        for k in 0..kk {
            total += ln_gamma(config.alpha[k] + n_dk[k] as f64);
        }
    }
    let beta_sum = config.beta.sum(v);
    for k in 0..kk {
        for x in 0..v {
            total += ln_gamma(config.beta.get(x) + n_xk[x * kk + k] as f64);
        }
        total -= ln_gamma(beta_sum + n_k[k] as f64);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::lda::clique_conditional;
    use crate::segment::Span;

    fn setup() -> (Corpus, Vec<Partition>) {
        let vocab = Vocabulary::from(vec!["a".to_string(), "b".to_string()]);
        let doc = Document::from_tokens("d", vec![0, 1, 1], vec![0], &vocab);
        let corpus = Corpus::new(vec![doc], vocab).unwrap();
        let parts = vec![Partition {
            spans: vec![Span::new(0, 2), Span::new(2, 3)],
        }];
        (corpus, parts)
    }

    #[test]
    fn single_token_value() {
        let vocab = Vocabulary::from(vec!["a".to_string(), "b".to_string()]);
        let doc = Document::from_tokens("d", vec![0], vec![0], &vocab);
        let corpus = Corpus::new(vec![doc], vocab).unwrap();
        let parts = vec![Partition { spans: vec![Span::new(0, 1)] }];
        let cfg = TopicModelConfig::new(1, 0).with_alpha(1.0).with_beta(1.0);
        let lj = log_joint_tokens(&[vec![0]], &cfg, &corpus, &parts).unwrap();
        // ln(Γ(2)·Γ(2)Γ(1)/Γ(3))
        assert!((lj - (0.5f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_is_constant() {
        let corpus = Corpus {
            vocab: Vocabulary::from(vec!["a".to_string(), "b".to_string()]),
            ..Corpus::default()
        };
        let cfg = TopicModelConfig::new(2, 0).with_alpha(1.0).with_beta(0.5);
        let lj = log_joint_tokens(&[], &cfg, &corpus, &[]).unwrap();
        let c = 2.0 * (2.0 * ln_gamma(0.5) - ln_gamma(1.0));
        assert!((lj - c).abs() < 1e-12);
    }

    #[test]
    fn mixed_clique_is_rejected() {
        let (corpus, parts) = setup();
        let cfg = TopicModelConfig::new(2, 0);
        let err = log_joint_tokens(&[vec![0, 1, 1]], &cfg, &corpus, &parts).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert!(log_joint_tokens(&[vec![1, 1, 0]], &cfg, &corpus, &parts).is_ok());
    }

    #[test]
    fn difference_matches_conditional_ratio() {
        let (corpus, parts) = setup();
        let cfg = TopicModelConfig::new(2, 0).with_alpha(0.7).with_beta(0.4);
        let s0 = TopicModelState::from_assignments(vec![vec![0, 1]], 2, &corpus, &parts).unwrap();
        let s1 = TopicModelState::from_assignments(vec![vec![1, 1]], 2, &corpus, &parts).unwrap();
        let diff = log_joint(&s1, &cfg, &corpus, &parts).unwrap() - log_joint(&s0, &cfg, &corpus, &parts).unwrap();
        let mut held = s0.clone();
        held.remove_clique(&corpus, &parts, 0, 0);
        let p = clique_conditional(&held, &cfg, &corpus, &parts, 0, 0);
        assert!((diff - (p[1] / p[0]).ln()).abs() < 1e-10);
    }
}
