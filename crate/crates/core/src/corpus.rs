//! Tokenized, stop-word filtered and chunked corpus.
//!
//! Every downstream stage works on [`Corpus`]: documents are sequences of
//! dense vocabulary ids, split into chunks at phrase-invariant punctuation and
//! at every run of removed tokens. A phrase never crosses a chunk boundary.
//! Each kept token remembers its index in the raw word stream so that display
//! text (including interior stop words) can be rebuilt after mining.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense vocabulary id, `0..V`.
pub type WordId = u32;

/// Characters that always end a chunk.
pub const PHRASE_INVARIANT_PUNCTUATION: &[char] = &['.', ',', ';', ':', '?', '!', '(', ')'];

const DEFAULT_STOP_WORDS: &str = include_str!("stopwords.txt");

/// Built-in English stop list (one word per line).
pub fn default_stop_words() -> HashSet<String> {
    parse_stop_words(DEFAULT_STOP_WORDS)
}

/// Parses a stop-word list: one word per line, `#` comments and blanks ignored.
pub fn parse_stop_words(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, WordId>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `word`, assigning the next free id if unseen.
    pub fn intern(&mut self, word: &str) -> WordId {
        if let Some(&id) = self.index.get(word) {
            return id;
        }
        let id = self.words.len() as WordId;
        self.words.push(word.to_owned());
        self.index.insert(word.to_owned(), id);
        id
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Space-joined surface form of a token-id sequence.
    pub fn join(&self, ids: &[WordId]) -> String {
        ids.iter()
            .map(|&id| self.word(id).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Maps space-separated words to ids; `None` if any word is unknown.
    pub fn lookup_phrase(&self, text: &str) -> Option<Vec<WordId>> {
        text.split_whitespace().map(|w| self.id(w)).collect()
    }

    /// Hex SHA-256 over the id-ordered word list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for w in &self.words {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Vocabulary")
            .field("len", &self.words.len())
            .finish()
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as WordId))
            .collect();
        Self { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<WordId>,
    /// Start offset of every chunk; the first entry is 0 unless the document is empty.
    pub chunk_starts: Vec<usize>,
    /// For each kept token, its index into `raw`.
    pub origin: Vec<usize>,
    /// Unfiltered word stream (surface forms, punctuation removed).
    pub raw: Vec<String>,
}

impl Document {
    /// Builds a document directly from ids, using the vocabulary words as the raw stream.
    pub fn from_tokens(
        id: impl Into<String>,
        tokens: Vec<WordId>,
        chunk_starts: Vec<usize>,
        vocab: &Vocabulary,
    ) -> Self {
        let raw = tokens
            .iter()
            .map(|&t| vocab.word(t).unwrap_or("<unk>").to_owned())
            .collect();
        let origin = (0..tokens.len()).collect();
        Self {
            id: id.into(),
            tokens,
            chunk_starts,
            origin,
            raw,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn chunks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let n = self.tokens.len();
        self.chunk_starts.iter().enumerate().map(move |(i, &s)| {
            let e = self.chunk_starts.get(i + 1).copied().unwrap_or(n);
            s..e
        })
    }

    /// End offset of the chunk containing each token.
    pub fn chunk_ends(&self) -> Vec<usize> {
        let mut ends = vec![0; self.tokens.len()];
        for c in self.chunks() {
            ends[c.clone()].fill(c.end);
        }
        ends
    }

    /// True if `span` lies entirely inside one chunk.
    pub fn within_chunk(&self, span: Range<usize>) -> bool {
        if span.is_empty() || span.end > self.tokens.len() {
            return false;
        }
        // index of the chunk containing span.start
        let c = self.chunk_starts.partition_point(|&s| s <= span.start) - 1;
        let end = self.chunk_starts.get(c + 1).copied().unwrap_or(self.tokens.len());
        span.end <= end
    }

    /// Original surface text for a token span, stop words reinserted.
    pub fn render(&self, span: Range<usize>) -> Result<String> {
        render_phrase(self, span, &self.raw)
    }

    fn check(&self, vocab_len: usize) -> Result<()> {
        let n = self.tokens.len();
        let bad = |msg: &str| Err(Error::format("document", format!("{}: {msg}", self.id)));
        if n == 0 {
            if !self.chunk_starts.is_empty() {
                return bad("empty document with chunks");
            }
        } else if self.chunk_starts.first() != Some(&0)
            || self.chunk_starts.windows(2).any(|w| w[0] >= w[1])
            || self.chunk_starts.last().is_some_and(|&s| s >= n)
        {
            return bad("chunk starts must be strictly increasing from 0 and below the length");
        }
        if self.origin.len() != n || self.origin.windows(2).any(|w| w[0] >= w[1]) {
            return bad("origin map must be strictly increasing with one entry per token");
        }
        if self.origin.last().is_some_and(|&o| o >= self.raw.len()) {
            return bad("origin map points past the raw stream");
        }
        if self.tokens.iter().any(|&t| t as usize >= vocab_len) {
            return bad("token id outside vocabulary");
        }
        Ok(())
    }
}

/// Surface text covering `raw_tokens[origin[start] ..= origin[end-1]]`.
pub fn render_phrase<S: AsRef<str>>(
    doc: &Document,
    span: Range<usize>,
    raw_tokens: &[S],
) -> Result<String> {
    let range_err = Error::Range {
        start: span.start,
        end: span.end,
        len: doc.len(),
    };
    if span.start >= span.end || span.end > doc.len() {
        return Err(range_err);
    }
    let first = doc.origin[span.start];
    let last = doc.origin[span.end - 1];
    if last >= raw_tokens.len() {
        return Err(range_err);
    }
    Ok(raw_tokens[first..=last]
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" "))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub docs: Vec<Document>,
    pub vocab: Vocabulary,
    pub total_tokens: usize,
}

impl Corpus {
    pub fn new(docs: Vec<Document>, vocab: Vocabulary) -> Result<Self> {
        let total_tokens = docs.iter().map(Document::len).sum();
        let corpus = Self {
            docs,
            vocab,
            total_tokens,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.docs.iter().map(Document::len).sum();
        if total != self.total_tokens {
            return Err(Error::format(
                "corpus",
                format!("total_tokens {} != {}", self.total_tokens, total),
            ));
        }
        self.docs.iter().try_for_each(|d| d.check(self.vocab.len()))
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    /// Corpus restricted to the given documents; the vocabulary is shared unchanged.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let docs: Vec<Document> = indices.iter().map(|&i| self.docs[i].clone()).collect();
        let total_tokens = docs.iter().map(Document::len).sum();
        Corpus {
            docs,
            vocab: self.vocab.clone(),
            total_tokens,
        }
    }
}

pub type Normalizer = Arc<dyn Fn(&str) -> String + Send + Sync>;

#[derive(Clone)]
pub struct IngestOptions {
    pub stop_words: HashSet<String>,
    pub lowercase: bool,
    /// Applied to each kept word after lowercasing (e.g. a stemmer). An empty
    /// result removes the word.
    pub normalizer: Option<Normalizer>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            stop_words: default_stop_words(),
            lowercase: true,
            normalizer: None,
        }
    }
}

impl IngestOptions {
    pub fn without_stop_words() -> Self {
        Self {
            stop_words: HashSet::new(),
            ..Self::default()
        }
    }
}

impl fmt::Debug for IngestOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IngestOptions")
            .field("stop_words", &self.stop_words.len())
            .field("lowercase", &self.lowercase)
            .field("normalizer", &self.normalizer.is_some())
            .finish()
    }
}

#[derive(Debug, PartialEq, Eq)]
enum Piece<'a> {
    Word(&'a str),
    Break,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '-' || c == '\'' || c == '_'
}

fn tokenize(text: &str) -> Vec<Piece<'_>> {
    fn flush<'a>(text: &'a str, start: &mut Option<usize>, end: usize, out: &mut Vec<Piece<'a>>) {
        if let Some(s) = start.take() {
            let w = text[s..end].trim_matches(|c| c == '-' || c == '\'' || c == '_');
            if !w.is_empty() {
                out.push(Piece::Word(w));
            }
        }
    }
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word_char(c) {
            start.get_or_insert(i);
            continue;
        }
        flush(text, &mut start, i, &mut out);
        if PHRASE_INVARIANT_PUNCTUATION.contains(&c) {
            out.push(Piece::Break);
        }
    }
    flush(text, &mut start, text.len(), &mut out);
    out
}

struct Tokenized {
    id: String,
    words: Vec<String>,
    chunk_starts: Vec<usize>,
    origin: Vec<usize>,
    raw: Vec<String>,
}

fn tokenize_document(id: &str, text: &str, options: &IngestOptions) -> Tokenized {
    let mut doc = Tokenized {
        id: id.to_owned(),
        words: Vec::new(),
        chunk_starts: Vec::new(),
        origin: Vec::new(),
        raw: Vec::new(),
    };
    let mut pending_break = false;
    for piece in tokenize(text) {
        let surface = match piece {
            Piece::Break => {
                pending_break = true;
                continue;
            }
            Piece::Word(w) => w,
        };
        let raw_index = doc.raw.len();
        doc.raw.push(surface.to_owned());
        let lowered = surface.to_lowercase();
        if options.stop_words.contains(&lowered) {
            pending_break = true;
            continue;
        }
        let word = if options.lowercase {
            lowered
        } else {
            surface.to_owned()
        };
        let word = match &options.normalizer {
            Some(norm) => norm(&word),
            None => word,
        };
        if word.is_empty() {
            pending_break = true;
            continue;
        }
        if doc.words.is_empty() || pending_break {
            doc.chunk_starts.push(doc.words.len());
        }
        pending_break = false;
        doc.words.push(word);
        doc.origin.push(raw_index);
    }
    doc
}

/// Tokenizes, filters and chunks raw documents.
///
/// Tokenization runs in parallel on the current rayon pool; ids are then
/// assigned in a second sequential pass so they depend only on input order.
pub fn ingest<T>(raw_docs: &[(String, T)], options: &IngestOptions) -> Result<Corpus>
where
    T: AsRef<[u8]> + Sync,
{
    if raw_docs.is_empty() {
        return Err(Error::param("no input documents"));
    }
    let tokenized: Vec<Tokenized> = raw_docs
        .par_iter()
        .map(|(id, bytes)| {
            let text = std::str::from_utf8(bytes.as_ref()).map_err(|source| Error::Decode {
                doc_id: id.clone(),
                source,
            })?;
            Ok(tokenize_document(id, text, options))
        })
        .collect::<Result<_>>()?;

    let mut vocab = Vocabulary::new();
    let docs = tokenized
        .into_iter()
        .map(|t| Document {
            tokens: t.words.iter().map(|w| vocab.intern(w)).collect(),
            id: t.id,
            chunk_starts: t.chunk_starts,
            origin: t.origin,
            raw: t.raw,
        })
        .collect();
    Corpus::new(docs, vocab)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Auto,
    Jsonl,
    Lines,
}

#[derive(Deserialize)]
struct JsonDoc {
    id: String,
    text: String,
}

/// Reads raw documents from a JSON-lines file (`{"id":..,"text":..}` per
/// line) or a plain-text file with one document per line (id = line number).
pub fn read_documents(path: &Path, format: InputFormat) -> Result<Vec<(String, Vec<u8>)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let format = match format {
        InputFormat::Auto => match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => InputFormat::Jsonl,
            _ => InputFormat::Lines,
        },
        f => f,
    };
    let mut lines: Vec<&[u8]> = bytes.split(|&b| b == b'\n').collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let strip_cr = |l: &[u8]| -> Vec<u8> { l.strip_suffix(b"\r").unwrap_or(l).to_vec() };
    match format {
        InputFormat::Lines => Ok(lines
            .iter()
            .enumerate()
            .map(|(i, l)| ((i + 1).to_string(), strip_cr(l)))
            .collect()),
        _ => {
            let mut out = Vec::new();
            for (i, line) in lines.iter().enumerate() {
                let line = std::str::from_utf8(line).map_err(|source| Error::Decode {
                    doc_id: format!("line {}", i + 1),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let doc: JsonDoc = serde_json::from_str(line).map_err(|e| {
                    Error::format("jsonl input", format!("line {}: {e}", i + 1))
                })?;
                out.push((doc.id, doc.text.into_bytes()));
            }
            Ok(out)
        }
    }
}
