//! C interface to topmine.
//!
//! Objects are opaque handles created by `topmine_*` constructors and
//! released with the matching `*_free` function. Every fallible call
//! returns a [`TopmineStatus`]; on failure `topmine_last_error` gives a
//! message for the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use topmine::corpus::{ingest, read_documents, Corpus, IngestOptions, InputFormat};
use topmine::lda::{gibbs_run, TopicModelConfig, TrainedModel};
use topmine::miner::{mine, MinSupport, MinerConfig, PhraseCounter};
use topmine::ranking::{phrase_renderings, report, topical_frequency};
use topmine::segment::{segment_corpus, significance, Partition, SignificanceParams};
use topmine::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopmineStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Contract = 5,
    Panic = 6,
}

pub struct TopmineCorpus {
    inner: Corpus,
}

pub struct TopminePhrases {
    inner: PhraseCounter,
}

pub struct TopmineSegmentation {
    inner: Vec<Partition>,
}

pub struct TopmineModel {
    inner: TrainedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TopmineStatus {
    match err {
        Error::Parameter(_) | Error::Config(_) | Error::Range { .. } => TopmineStatus::InvalidArgument,
        Error::Io { .. } => TopmineStatus::Io,
        Error::Decode { .. } | Error::Format { .. } | Error::Json(_) => TopmineStatus::Format,
        Error::Contract(_) => TopmineStatus::Contract,
        Error::Stage { source, .. } => status_of(source),
    }
}

struct Fail(TopmineStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TopmineStatus::NullArgument, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(TopmineStatus::InvalidArgument, msg.into())
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard<F>(f: F) -> TopmineStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TopmineStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal error: {msg}"));
            TopmineStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TopmineStatus::Format, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn options(remove_stop_words: c_int) -> IngestOptions {
    if remove_stop_words != 0 {
        IngestOptions::default()
    } else {
        IngestOptions::without_stop_words()
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `topmine_*` call on the same thread.
#[no_mangle]
pub extern "C" fn topmine_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn topmine_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a corpus from `n` UTF-8 strings; document ids are `1..=n`.
///
/// # Safety
/// `texts` must point to `n` valid NUL-terminated strings and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn topmine_corpus_from_texts(
    texts: *const *const c_char,
    n: usize,
    remove_stop_words: c_int,
    out: *mut *mut TopmineCorpus,
) -> TopmineStatus {
    guard(|| {
        if texts.is_null() && n > 0 {
            return Err(null("texts"));
        }
        let mut docs = Vec::with_capacity(n);
        for i in 0..n {
            let p = *texts.add(i);
            if p.is_null() {
                return Err(null("text"));
            }
            docs.push(((i + 1).to_string(), CStr::from_ptr(p).to_bytes()));
        }
        let inner = ingest(&docs, &options(remove_stop_words))?;
        out_arg(out, TopmineCorpus { inner })
    })
}

/// Reads a corpus from a file: JSON lines for `.jsonl`/`.json`, otherwise
/// one document per line.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn topmine_corpus_from_file(
    path: *const c_char,
    remove_stop_words: c_int,
    out: *mut *mut TopmineCorpus,
) -> TopmineStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let raw = read_documents(Path::new(path), InputFormat::Auto)?;
        let inner = ingest(&raw, &options(remove_stop_words))?;
        out_arg(out, TopmineCorpus { inner })
    })
}

/// Number of documents, or 0 for a NULL handle.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn topmine_corpus_num_docs(corpus: *const TopmineCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.num_docs())
}

/// Number of kept tokens, or 0 for a NULL handle.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn topmine_corpus_num_tokens(corpus: *const TopmineCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.total_tokens)
}

/// Vocabulary size, or 0 for a NULL handle.
///
/// # Safety
/// `corpus` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn topmine_corpus_vocab_size(corpus: *const TopmineCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.inner.vocab.len())
}

/// # Safety
/// `corpus` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn topmine_corpus_free(corpus: *mut TopmineCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Mines every phrase occurring at least `min_support` times. `max_len` of
/// 0 means no length limit.
///
/// # Safety
/// `corpus` must be a live handle and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn topmine_mine(
    corpus: *const TopmineCorpus,
    min_support: u64,
    max_len: usize,
    out: *mut *mut TopminePhrases,
) -> TopmineStatus {
    guard(|| {
        let corpus = ref_arg(corpus, "corpus")?;
        let config = MinerConfig {
            min_support: MinSupport::Absolute(min_support),
            max_len: (max_len > 0).then_some(max_len),
        };
        let inner = mine(&corpus.inner, &config)?;
        out_arg(out, TopminePhrases { inner })
    })
}

/// Number of distinct frequent phrases, or 0 for a NULL handle.
///
/// # Safety
/// `phrases` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn topmine_phrases_len(phrases: *const TopminePhrases) -> usize {
    phrases.as_ref().map_or(0, |p| p.inner.len())
}

/// Frequency of a space-separated phrase (normalized words, as stored in
/// the vocabulary). Unknown or infrequent phrases give 0.
///
/// # Safety
/// Handles must be live, `phrase` NUL-terminated and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn topmine_phrases_count(
    phrases: *const TopminePhrases,
    corpus: *const TopmineCorpus,
    phrase: *const c_char,
    count: *mut u64,
) -> TopmineStatus {
    guard(|| {
        let phrases = ref_arg(phrases, "phrases")?;
        let corpus = ref_arg(corpus, "corpus")?;
        let text = str_arg(phrase, "phrase")?;
        if count.is_null() {
            return Err(null("count"));
        }
        let c = corpus
            .inner
            .vocab
            .lookup_phrase(text)
            .map_or(0, |ids| phrases.inner.count(&ids));
        *count = c;
        Ok(())
    })
}

/// # Safety
/// `phrases` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn topmine_phrases_free(phrases: *mut TopminePhrases) {
    if !phrases.is_null() {
        drop(Box::from_raw(phrases));
    }
}

/// Significance of merging two phrases with counts `f1`, `f2` whose
/// concatenation occurs `f12` times in a corpus of `total_tokens` tokens.
/// Negative infinity when `f12` is 0.
#[no_mangle]
pub extern "C" fn topmine_significance(f1: u64, f2: u64, f12: u64, total_tokens: u64) -> f64 {
    significance(f1, f2, f12, total_tokens)
}

/// Partitions every document into phrases, merging while the best
/// adjacent pair scores at least `threshold`.
///
/// # Safety
/// Handles must be live and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn topmine_segment(
    corpus: *const TopmineCorpus,
    phrases: *const TopminePhrases,
    threshold: f64,
    out: *mut *mut TopmineSegmentation,
) -> TopmineStatus {
    guard(|| {
        let corpus = ref_arg(corpus, "corpus")?;
        let phrases = ref_arg(phrases, "phrases")?;
        let params = SignificanceParams::new(threshold, corpus.inner.total_tokens.max(1) as u64)?;
        let inner = segment_corpus(&corpus.inner, &phrases.inner, &params);
        out_arg(out, TopmineSegmentation { inner })
    })
}

/// Number of phrases document `doc` was split into.
///
/// # Safety
/// `seg` must be a live handle and `count` writable.
#[no_mangle]
pub unsafe extern "C" fn topmine_segmentation_num_phrases(
    seg: *const TopmineSegmentation,
    doc: usize,
    count: *mut usize,
) -> TopmineStatus {
    guard(|| {
        let seg = ref_arg(seg, "segmentation")?;
        if count.is_null() {
            return Err(null("count"));
        }
        let part = seg
            .inner
            .get(doc)
            .ok_or_else(|| invalid(format!("document {doc} out of range")))?;
        *count = part.len();
        Ok(())
    })
}

/// # Safety
/// `seg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn topmine_segmentation_free(seg: *mut TopmineSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Trains the phrase-constrained topic model with symmetric priors. An
/// `alpha` of 0 or less selects `50 / topics`. Half the iterations are
/// burn-in.
///
/// # Safety
/// Handles must be live and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn topmine_train(
    corpus: *const TopmineCorpus,
    seg: *const TopmineSegmentation,
    topics: usize,
    iterations: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    out: *mut *mut TopmineModel,
) -> TopmineStatus {
    guard(|| {
        let corpus = ref_arg(corpus, "corpus")?;
        let seg = ref_arg(seg, "segmentation")?;
        if topics == 0 {
            return Err(invalid("topics must be at least 1"));
        }
        let mut config = TopicModelConfig::new(topics, seed)
            .with_iterations(iterations)
            .with_beta(beta);
        if alpha > 0.0 {
            config = config.with_alpha(alpha);
        }
        let inner = gibbs_run(&corpus.inner, &seg.inner, &config)?;
        out_arg(out, TopmineModel { inner })
    })
}

/// Topic of phrase `g` of document `doc` in the final sample.
///
/// # Safety
/// `model` must be a live handle and `topic` writable.
#[no_mangle]
pub unsafe extern "C" fn topmine_model_phrase_topic(
    model: *const TopmineModel,
    doc: usize,
    g: usize,
    topic: *mut u32,
) -> TopmineStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        if topic.is_null() {
            return Err(null("topic"));
        }
        *topic = *model
            .inner
            .sample_log
            .get(doc)
            .and_then(|z| z.get(g))
            .ok_or_else(|| invalid(format!("phrase {g} of document {doc} out of range")))?;
        Ok(())
    })
}

/// Writes the top-`top_n` words and phrases of every topic as TSV
/// (`topic, rank, kind, text, score`) into a new string that the caller
/// releases with `topmine_string_free`.
///
/// # Safety
/// Handles must be the ones the model was trained from; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn topmine_model_report_tsv(
    model: *const TopmineModel,
    corpus: *const TopmineCorpus,
    seg: *const TopmineSegmentation,
    top_n: usize,
    out: *mut *mut c_char,
) -> TopmineStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let corpus = ref_arg(corpus, "corpus")?;
        let seg = ref_arg(seg, "segmentation")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let tf = topical_frequency(&model.inner.sample_log, &seg.inner, &corpus.inner)?;
        let renderings = phrase_renderings(&corpus.inner, &seg.inner);
        let rep = report(&model.inner.estimates, &tf, &corpus.inner.vocab, &renderings, top_n)?;
        let mut buf = Vec::new();
        rep.write_tsv(&mut buf)
            .map_err(|e| invalid(format!("cannot format report: {e}")))?;
        let s = CString::new(buf).map_err(|_| Fail(TopmineStatus::Format, "report contains NUL".into()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn topmine_model_free(model: *mut TopmineModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string from `topmine_model_report_tsv` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn topmine_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
