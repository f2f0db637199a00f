//! Per-topic summaries: unigrams ranked by topic-word probability and
//! phrases ranked by how many of their instances the final sample gave to
//! the topic.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use crate::corpus::{Corpus, Vocabulary, WordId};
use crate::error::{Error, Result};
use crate::lda::TopicEstimates;
use crate::segment::Partition;

/// `(phrase, topic) -> number of instances of phrase assigned to topic`.
pub type TopicalFrequency = BTreeMap<(Vec<WordId>, u32), u64>;

/// Counts phrase instances per topic in one sample of clique topics.
pub fn topical_frequency(sample_log: &[Vec<u32>], partitions: &[Partition], corpus: &Corpus) -> Result<TopicalFrequency> {
    if sample_log.len() != partitions.len() || partitions.len() != corpus.num_docs() {
        return Err(Error::Contract(format!(
            "{} sample rows, {} partitions, {} documents",
            sample_log.len(),
            partitions.len(),
            corpus.num_docs()
        )));
    }
    let mut tf = TopicalFrequency::new();
    for (d, ((zd, part), doc)) in sample_log.iter().zip(partitions).zip(&corpus.docs).enumerate() {
        if zd.len() != part.len() {
            return Err(Error::Contract(format!("document {d}: sample and partition lengths differ")));
        }
        for (&k, span) in zd.iter().zip(&part.spans) {
            *tf.entry((doc.tokens[span.range()].to_vec(), k)).or_default() += 1;
        }
    }
    Ok(tf)
}

/// Display text for each multi-word phrase: its most common surface
/// rendering in the corpus (stop words and original casing restored).
/// Ties go to the lexicographically smallest rendering.
pub fn phrase_renderings(corpus: &Corpus, partitions: &[Partition]) -> HashMap<Vec<WordId>, String> {
    let mut seen: HashMap<Vec<WordId>, BTreeMap<String, u64>> = HashMap::new();
    for (doc, part) in corpus.docs.iter().zip(partitions) {
        for span in part.spans.iter().filter(|s| s.len() > 1) {
            if let Ok(text) = doc.render(span.range()) {
                *seen
                    .entry(doc.tokens[span.range()].to_vec())
                    .or_default()
                    .entry(text)
                    .or_default() += 1;
            }
        }
    }
    seen.into_iter()
        .map(|(ids, texts)| {
            let mut best: Option<(&String, u64)> = None;
            for (t, &c) in &texts {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((t, c));
                }
            }
            let text = best.map(|(t, _)| t.clone()).unwrap_or_default();
            (ids, text)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicSummary {
    pub topic: usize,
    /// Top words with their topic-word probability, descending.
    pub words: Vec<(String, f64)>,
    /// Top multi-word phrases with their topical frequency, descending.
    pub phrases: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicReport {
    pub topics: Vec<TopicSummary>,
}

/// Builds the top-`top_n` word and phrase lists of every topic.
///
/// Only multi-word phrases with a positive count are listed. Ties in either
/// column are broken by the canonical (vocabulary) text. `renderings`
/// supplies display text; phrases missing from it are shown canonically.
pub fn report(
    estimates: &TopicEstimates,
    tf: &TopicalFrequency,
    vocab: &Vocabulary,
    renderings: &HashMap<Vec<WordId>, String>,
    top_n: usize,
) -> Result<TopicReport> {
    if top_n == 0 {
        return Err(Error::param("top_n must be at least 1"));
    }
    if estimates.vocab_size != vocab.len() {
        return Err(Error::param(format!(
            "estimates cover {} words, vocabulary has {}",
            estimates.vocab_size,
            vocab.len()
        )));
    }
    let mut per_topic: Vec<Vec<(String, &[WordId], u64)>> = vec![Vec::new(); estimates.topics];
    for ((ids, k), &c) in tf {
        let k = *k as usize;
        if ids.len() > 1 && c > 0 && k < estimates.topics {
            per_topic[k].push((vocab.join(ids), ids, c));
        }
    }
    let topics = per_topic
        .into_iter()
        .enumerate()
        .map(|(k, mut phrases)| {
            phrases.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
            phrases.truncate(top_n);
            let phrases = phrases
                .into_iter()
                .map(|(canon, ids, c)| (renderings.get(ids).cloned().unwrap_or(canon), c))
                .collect();

            let phi = estimates.phi(k);
            let mut order: Vec<usize> = (0..phi.len()).collect();
            order.sort_by(|&a, &b| {
                phi[b]
                    .total_cmp(&phi[a])
                    .then_with(|| vocab.words()[a].cmp(&vocab.words()[b]))
            });
            let words = order
                .into_iter()
                .take(top_n)
                .map(|x| (vocab.words()[x].clone(), phi[x]))
                .collect();
            TopicSummary { topic: k, words, phrases }
        })
        .collect();
    Ok(TopicReport { topics })
}

impl TopicReport {
    /// Columns: topic, rank, kind (`word` or `phrase`), text, score.
    /// Ranks start at 1; word scores are probabilities, phrase scores counts.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "topic\trank\tkind\ttext\tscore")?;
        for t in &self.topics {
            for (r, (w, p)) in t.words.iter().enumerate() {
                writeln!(out, "{}\t{}\tword\t{}\t{:.6}", t.topic, r + 1, w, p)?;
            }
            for (r, (p, c)) in t.phrases.iter().enumerate() {
                writeln!(out, "{}\t{}\tphrase\t{}\t{}", t.topic, r + 1, p, c)?;
            }
        }
        Ok(())
    }

    /// Plain-text table per topic: terms on the left, phrases on the right.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for t in &self.topics {
            let width = t
                .words
                .iter()
                .map(|(w, _)| w.chars().count())
                .max()
                .unwrap_or(0)
                .max("Terms".len());
            let _ = writeln!(s, "Topic {}", t.topic);
            let _ = writeln!(s, "{:width$}  Phrases", "Terms");
            let rows = t.words.len().max(t.phrases.len());
            for i in 0..rows {
                let w = t.words.get(i).map_or("", |(w, _)| w.as_str());
                let p = t.phrases.get(i).map_or("", |(p, _)| p.as_str());
                let line = format!("{w:width$}  {p}");
                s.push_str(line.trim_end());
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest, Document, IngestOptions};
    use crate::segment::Span;

    fn corpus_with(tokens: Vec<Vec<u32>>, v: usize) -> Corpus {
        let vocab = Vocabulary::from((0..v).map(|i| format!("w{i}")).collect::<Vec<_>>());
        let docs = tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let cs = if t.is_empty() { vec![] } else { vec![0] };
                Document::from_tokens(i.to_string(), t, cs, &vocab)
            })
            .collect();
        Corpus::new(docs, vocab).unwrap()
    }

    #[test]
    fn empty_sample_gives_empty_map() {
        let corpus = corpus_with(vec![vec![]], 2);
        let tf = topical_frequency(&[vec![]], &[Partition { spans: vec![] }], &corpus).unwrap();
        assert!(tf.is_empty());
    }

    #[test]
    fn counts_match_a_scan_of_the_sample() {
        // three instances of [0 1] with topics 1, 1, 2
        let corpus = corpus_with(vec![vec![0, 1, 2], vec![0, 1], vec![2, 0, 1]], 3);
        let parts = vec![
            Partition { spans: vec![Span::new(0, 2), Span::new(2, 3)] },
            Partition { spans: vec![Span::new(0, 2)] },
            Partition { spans: vec![Span::new(0, 1), Span::new(1, 3)] },
        ];
        let z = vec![vec![1, 0], vec![1], vec![0, 2]];
        let tf = topical_frequency(&z, &parts, &corpus).unwrap();
        assert_eq!(tf[&(vec![0, 1], 1)], 2);
        assert_eq!(tf[&(vec![0, 1], 2)], 1);
        assert_eq!(tf.get(&(vec![0, 1], 0)), None);
        assert_eq!(tf[&(vec![2], 0)], 2);

        let mut brute = 0;
        for (zd, p) in z.iter().zip(&parts) {
            for (&k, s) in zd.iter().zip(&p.spans) {
                if k == 1 && s.len() == 2 {
                    brute += 1;
                }
            }
        }
        assert_eq!(tf[&(vec![0, 1], 1)], brute);
    }

    #[test]
    fn report_ranks_and_breaks_ties_lexicographically() {
        let vocab = Vocabulary::from(vec!["b".to_string(), "a".to_string(), "c".to_string()]);
        let est = TopicEstimates {
            topics: 1,
            vocab_size: 3,
            theta: vec![],
            phi: vec![0.25, 0.25, 0.5],
        };
        let mut tf = TopicalFrequency::new();
        tf.insert((vec![0, 2], 0), 3);
        tf.insert((vec![1, 2], 0), 3);
        tf.insert((vec![2, 0], 0), 5);
        tf.insert((vec![2], 0), 40);
        let r = report(&est, &tf, &vocab, &HashMap::new(), 5).unwrap();
        let t = &r.topics[0];
        assert_eq!(t.words, vec![("c".into(), 0.5), ("a".into(), 0.25), ("b".into(), 0.25)]);
        assert_eq!(t.phrases, vec![("c b".into(), 5), ("a c".into(), 3), ("b c".into(), 3)]);

        let r2 = report(&est, &tf, &vocab, &HashMap::new(), 1).unwrap();
        assert_eq!(r2.topics[0].words.len(), 1);
        assert_eq!(r2.topics[0].phrases.len(), 1);
        assert!(report(&est, &tf, &vocab, &HashMap::new(), 0).is_err());
    }

    #[test]
    fn renderings_restore_surface_text() {
        let docs = vec![
            ("1".to_string(), "Mining of Data streams"),
            ("2".to_string(), "mining of data"),
            ("3".to_string(), "Mining of Data"),
        ];
        let corpus = ingest(&docs, &IngestOptions::default()).unwrap();
        let parts: Vec<Partition> = corpus
            .docs
            .iter()
            .map(|d| Partition { spans: vec![Span::new(0, 2)].into_iter().chain((2..d.len()).map(|i| Span::new(i, i + 1))).collect() })
            .collect();
        let r = phrase_renderings(&corpus, &parts);
        let ids = corpus.vocab.lookup_phrase("mining data").unwrap();
        assert_eq!(r[&ids], "Mining of Data");
    }

    #[test]
    fn table_and_tsv_layout() {
        let r = TopicReport {
            topics: vec![TopicSummary {
                topic: 0,
                words: vec![("retrieval".into(), 0.5), ("web".into(), 0.25)],
                phrases: vec![("information retrieval".into(), 7)],
            }],
        };
        let mut tsv = Vec::new();
        r.write_tsv(&mut tsv).unwrap();
        assert_eq!(
            String::from_utf8(tsv).unwrap(),
            "topic\trank\tkind\ttext\tscore\n0\t1\tword\tretrieval\t0.500000\n0\t2\tword\tweb\t0.250000\n0\t1\tphrase\tinformation retrieval\t7\n"
        );
        assert_eq!(r.to_table(), "Topic 0\nTerms      Phrases\nretrieval  information retrieval\nweb\n");
    }
}
