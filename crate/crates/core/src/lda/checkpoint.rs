use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{TopicModelConfig, TopicModelState, TrainedModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::segment::Partition;

pub const CHECKPOINT_FORMAT: &str = "topmine/phrase-lda-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing model snapshot: configuration, vocabulary fingerprint,
/// clique assignments and count tables. Reloading recounts from the
/// assignments and refuses any mismatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TopicModelConfig,
    pub vocab_fingerprint: String,
    pub vocab_size: usize,
    pub doc_ids: Vec<String>,
    pub state: TopicModelState,
}

impl Checkpoint {
    pub fn new(model: &TrainedModel, corpus: &Corpus) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: model.config.clone(),
            vocab_fingerprint: corpus.vocab.fingerprint(),
            vocab_size: corpus.vocab.len(),
            doc_ids: corpus.docs.iter().map(|d| d.id.clone()).collect(),
            state: model.state.clone(),
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let cp: Checkpoint = serde_json::from_reader(input)?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(Error::format(
                "checkpoint",
                format!("unsupported format {:?} version {}", cp.format, cp.version),
            ));
        }
        Ok(cp)
    }

    /// Checks the snapshot against `corpus`/`partitions` and returns its state.
    pub fn restore(&self, corpus: &Corpus, partitions: &[Partition]) -> Result<TopicModelState> {
        let bad = |d: String| Err(Error::format("checkpoint", d));
        if self.vocab_fingerprint != corpus.vocab.fingerprint() || self.vocab_size != corpus.vocab.len() {
            return bad("vocabulary does not match the corpus".into());
        }
        if self.doc_ids.len() != corpus.num_docs()
            || self.doc_ids.iter().zip(&corpus.docs).any(|(a, d)| *a != d.id)
        {
            return bad("document ids do not match the corpus".into());
        }
        if self.state.topics != self.config.topics || self.state.vocab_size != self.vocab_size {
            return bad("state dimensions disagree with the configuration".into());
        }
        self.config.validate(Some(self.vocab_size))?;
        self.state.check_consistency(corpus, partitions)?;
        Ok(self.state.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Vocabulary};
    use crate::lda::gibbs_run;
    use crate::segment::Span;

    fn setup() -> (Corpus, Vec<Partition>) {
        let vocab = Vocabulary::from(vec!["a".to_string(), "b".to_string(), "c".to_string()]);
        let d0 = Document::from_tokens("x", vec![0, 1, 2, 0], vec![0], &vocab);
        let d1 = Document::from_tokens("y", vec![2, 2], vec![0, 1], &vocab);
        let corpus = Corpus::new(vec![d0, d1], vocab).unwrap();
        let parts = vec![
            Partition { spans: vec![Span::new(0, 2), Span::new(2, 3), Span::new(3, 4)] },
            Partition::singletons(&corpus.docs[1]),
        ];
        (corpus, parts)
    }

    #[test]
    fn round_trip_and_tamper_detection() {
        let (corpus, parts) = setup();
        let model = gibbs_run(&corpus, &parts, &TopicModelConfig::new(2, 4).with_iterations(5)).unwrap();
        let cp = Checkpoint::new(&model, &corpus);
        let mut buf = Vec::new();
        cp.write(&mut buf).unwrap();
        let back = Checkpoint::read(&buf[..]).unwrap();
        assert_eq!(back, cp);
        assert_eq!(back.restore(&corpus, &parts).unwrap(), model.state);

        let mut tampered = cp.clone();
        tampered.state.n_k[0] += 1;
        assert!(tampered.restore(&corpus, &parts).is_err());

        let mut other_vocab = corpus.clone();
        other_vocab.vocab = Vocabulary::from(vec!["a".to_string(), "b".to_string(), "z".to_string()]);
        assert!(cp.restore(&other_vocab, &parts).is_err());

        let mut wrong = cp;
        wrong.version = 99;
        let mut buf = Vec::new();
        wrong.write(&mut buf).unwrap();
        assert!(Checkpoint::read(&buf[..]).is_err());
    }
}
