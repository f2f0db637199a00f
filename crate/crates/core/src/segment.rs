//! Bottom-up phrase construction.
//!
//! Each chunk starts as a run of single-token phrases. The adjacent pair with
//! the highest significance is merged while that significance reaches the
//! threshold; after each merge only the two pairs touching the new phrase are
//! rescored. Stale heap entries are skipped on pop via per-position
//! generation counters.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Vocabulary};
use crate::error::{Error, Result};
use crate::miner::PhraseCounter;

/// Standard deviations between the observed count of `P1 ⊕ P2` and the
/// count expected if `P1` and `P2` were independent, `L·p(P1)·p(P2)`, with
/// the variance estimated by the observed count.
///
/// Returns `-inf` when the merged phrase was never observed.
pub fn significance(f1: u64, f2: u64, f12: u64, total_tokens: u64) -> f64 {
    if f12 == 0 {
        return f64::NEG_INFINITY;
    }
    let l = total_tokens as f64;
    let expected = l * (f1 as f64 / l) * (f2 as f64 / l);
    let observed = f12 as f64;
    (observed - expected) / observed.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceParams {
    pub threshold: f64,
    pub total_tokens: u64,
}

impl SignificanceParams {
    pub fn new(threshold: f64, total_tokens: u64) -> Result<Self> {
        if threshold.is_nan() {
            return Err(Error::param("significance threshold must not be NaN"));
        }
        if total_tokens == 0 {
            return Err(Error::param("total token count must be at least 1"));
        }
        Ok(Self {
            threshold,
            total_tokens,
        })
    }
}

pub const DEFAULT_THRESHOLD: f64 = 4.0;

/// Half-open token range of one phrase instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Ordered phrase instances of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub spans: Vec<Span>,
}

impl Partition {
    /// Every token its own phrase.
    pub fn singletons(doc: &Document) -> Self {
        Self {
            spans: (0..doc.len()).map(|i| Span::new(i, i + 1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Checks cover, ordering and chunk containment; with a counter, also
    /// that every multi-token span is a stored phrase.
    pub fn validate(&self, doc: &Document, counter: Option<&PhraseCounter>) -> Result<()> {
        let mut pos = 0;
        for s in &self.spans {
            if s.start != pos || s.is_empty() {
                return Err(Error::Contract(format!(
                    "{}: span {}..{} does not continue at {pos}",
                    doc.id, s.start, s.end
                )));
            }
            if !doc.within_chunk(s.range()) {
                return Err(Error::Contract(format!(
                    "{}: span {}..{} crosses a chunk boundary",
                    doc.id, s.start, s.end
                )));
            }
            if let Some(c) = counter {
                if s.len() > 1 && c.count(&doc.tokens[s.range()]) == 0 {
                    return Err(Error::Contract(format!(
                        "{}: span {}..{} is not a frequent phrase",
                        doc.id, s.start, s.end
                    )));
                }
            }
            pos = s.end;
        }
        if pos != doc.len() {
            return Err(Error::Contract(format!(
                "{}: partition covers {pos} of {} tokens",
                doc.id,
                doc.len()
            )));
        }
        Ok(())
    }
}

/// One executed merge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: Span,
    pub right: Span,
    pub significance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    sig: f64,
    start: usize,
    len: usize,
    generation: u32,
}

impl Candidate {
    // Higher significance first, then leftmost, then longer.
    fn rank(&self, other: &Self) -> Ordering {
        self.sig
            .total_cmp(&other.sig)
            .then_with(|| other.start.cmp(&self.start))
            .then_with(|| self.len.cmp(&other.len))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal && self.generation == other.generation
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other).then_with(|| self.generation.cmp(&other.generation))
    }
}

/// Significance of merging two adjacent spans of `tokens`.
pub fn pair_significance(
    tokens: &[u32],
    left: Span,
    right: Span,
    counter: &PhraseCounter,
    total_tokens: u64,
) -> f64 {
    debug_assert_eq!(left.end, right.start);
    let f12 = counter.count(&tokens[left.start..right.end]);
    if f12 == 0 {
        return f64::NEG_INFINITY;
    }
    significance(
        counter.count(&tokens[left.range()]),
        counter.count(&tokens[right.range()]),
        f12,
        total_tokens,
    )
}

fn segment_chunk(
    tokens: &[u32],
    chunk: Range<usize>,
    counter: &PhraseCounter,
    params: &SignificanceParams,
    spans: &mut Vec<Span>,
    mut log: Option<&mut Vec<Merge>>,
) {
    let base = chunk.start;
    let n = chunk.len();
    if n == 0 {
        return;
    }
    // Linked list over span start offsets (relative to the chunk). `end[i]`
    // is the exclusive end of the span starting at i; `prev[i]` the start of
    // its left neighbour. Only live starts are meaningful.
    let mut end: Vec<usize> = (1..=n).collect();
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut generation = vec![0u32; n];
    let mut heap = BinaryHeap::new();

    let span = |s: usize, e: usize| Span::new(base + s, base + e);
    let score = |s: usize, mid: usize, e: usize| {
        pair_significance(tokens, span(s, mid), span(mid, e), counter, params.total_tokens)
    };
    let push = |heap: &mut BinaryHeap<Candidate>, s: usize, mid: usize, e: usize, g: u32| {
        let sig = score(s, mid, e);
        if sig > f64::NEG_INFINITY {
            heap.push(Candidate {
                sig,
                start: s,
                len: e - s,
                generation: g,
            });
        }
    };

    for i in 0..n.saturating_sub(1) {
        push(&mut heap, i, i + 1, i + 2, 0);
    }

    while let Some(best) = heap.pop() {
        let s = best.start;
        if best.generation != generation[s] {
            continue;
        }
        if best.sig < params.threshold {
            break;
        }
        let mid = end[s];
        let e = end[mid];
        if let Some(log) = log.as_deref_mut() {
            log.push(Merge {
                left: span(s, mid),
                right: span(mid, e),
                significance: best.sig,
            });
        }
        end[s] = e;
        generation[s] += 1;
        generation[mid] += 1;
        if e < n {
            prev[e] = Some(s);
            push(&mut heap, s, e, end[e], generation[s]);
        }
        if let Some(p) = prev[s] {
            generation[p] += 1;
            push(&mut heap, p, s, e, generation[p]);
        }
    }

    let mut i = 0;
    while i < n {
        spans.push(span(i, end[i]));
        i = end[i];
    }
}

pub fn segment_document(doc: &Document, counter: &PhraseCounter, params: &SignificanceParams) -> Partition {
    let mut spans = Vec::with_capacity(doc.len());
    for chunk in doc.chunks() {
        segment_chunk(&doc.tokens, chunk, counter, params, &mut spans, None);
    }
    Partition { spans }
}

/// Like [`segment_document`], also returning every merge in execution order.
pub fn segment_document_logged(
    doc: &Document,
    counter: &PhraseCounter,
    params: &SignificanceParams,
) -> (Partition, Vec<Merge>) {
    let mut spans = Vec::with_capacity(doc.len());
    let mut log = Vec::new();
    for chunk in doc.chunks() {
        segment_chunk(&doc.tokens, chunk, counter, params, &mut spans, Some(&mut log));
    }
    (Partition { spans }, log)
}

/// Segments every document on the current rayon pool; output order follows the corpus.
pub fn segment_corpus(corpus: &Corpus, counter: &PhraseCounter, params: &SignificanceParams) -> Vec<Partition> {
    corpus
        .docs
        .par_iter()
        .map(|d| segment_document(d, counter, params))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct SegmentLine {
    id: String,
    phrases: Vec<Vec<String>>,
}

/// One JSON object per document: `{"id":..,"phrases":[["w1","w2"],["w3"]]}`.
pub fn write_segments<W: Write>(corpus: &Corpus, partitions: &[Partition], mut out: W) -> Result<()> {
    for (doc, part) in corpus.docs.iter().zip(partitions) {
        let line = SegmentLine {
            id: doc.id.clone(),
            phrases: part
                .spans
                .iter()
                .map(|s| {
                    doc.tokens[s.range()]
                        .iter()
                        .map(|&t| corpus.vocab.word(t).unwrap_or("<unk>").to_owned())
                        .collect()
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::format("segments", e.to_string()))?;
    }
    Ok(())
}

/// Reads partitions back, checking that they line up with the corpus.
pub fn read_segments<R: BufRead>(input: R, corpus: &Corpus) -> Result<Vec<Partition>> {
    let vocab: &Vocabulary = &corpus.vocab;
    let mut out = Vec::with_capacity(corpus.num_docs());
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::format("segments", e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |d: String| Error::format("segments", format!("line {}: {d}", i + 1));
        let rec: SegmentLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let doc = corpus
            .docs
            .get(out.len())
            .ok_or_else(|| bad("more documents than the corpus".into()))?;
        if doc.id != rec.id {
            return Err(bad(format!("expected document {:?}, found {:?}", doc.id, rec.id)));
        }
        let mut spans = Vec::with_capacity(rec.phrases.len());
        let mut pos = 0;
        for phrase in &rec.phrases {
            for w in phrase {
                let id = vocab.id(w).ok_or_else(|| bad(format!("unknown word {w:?}")))?;
                if doc.tokens.get(pos) != Some(&id) {
                    return Err(bad("phrases do not reproduce the document".into()));
                }
                pos += 1;
            }
            spans.push(Span::new(pos - phrase.len(), pos));
        }
        let part = Partition { spans };
        part.validate(doc, None).map_err(|e| bad(e.to_string()))?;
        out.push(part);
    }
    if out.len() != corpus.num_docs() {
        return Err(Error::format(
            "segments",
            format!("{} documents, corpus has {}", out.len(), corpus.num_docs()),
        ));
    }
    Ok(out)
}
