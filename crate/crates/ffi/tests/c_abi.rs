use std::ffi::{c_char, CStr, CString};
use std::ptr;

use topmine_ffi::*;

const TITLES: &[&str] = &[
    "Support vector machines for text classification",
    "Text classification with support vector machines",
    "Fast support vector machines training",
    "Support vector machines: a tutorial",
    "Mining frequent patterns without candidate generation",
    "Frequent patterns in data streams",
    "Efficient mining of frequent patterns",
    "Frequent patterns and association rules",
    "Information retrieval on the web",
    "Web information retrieval systems",
    "Evaluation of information retrieval systems",
    "Information retrieval with support vector machines",
];

fn last_error() -> String {
    let p = topmine_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct Pipeline {
    corpus: *mut TopmineCorpus,
    phrases: *mut TopminePhrases,
    seg: *mut TopmineSegmentation,
}

impl Drop for Pipeline {
    fn drop(&mut self) {
        unsafe {
            topmine_segmentation_free(self.seg);
            topmine_phrases_free(self.phrases);
            topmine_corpus_free(self.corpus);
        }
    }
}

fn build() -> Pipeline {
    let owned: Vec<CString> = TITLES.iter().map(|t| CString::new(*t).unwrap()).collect();
    let ptrs: Vec<*const c_char> = owned.iter().map(|c| c.as_ptr()).collect();
    let mut p = Pipeline {
        corpus: ptr::null_mut(),
        phrases: ptr::null_mut(),
        seg: ptr::null_mut(),
    };
    unsafe {
        assert_eq!(
            topmine_corpus_from_texts(ptrs.as_ptr(), ptrs.len(), 1, &mut p.corpus),
            TopmineStatus::Ok
        );
        assert_eq!(topmine_mine(p.corpus, 3, 0, &mut p.phrases), TopmineStatus::Ok);
        assert_eq!(topmine_segment(p.corpus, p.phrases, 1.0, &mut p.seg), TopmineStatus::Ok);
    }
    p
}

#[test]
fn end_to_end_through_the_c_interface() {
    let p = build();
    unsafe {
        assert_eq!(topmine_corpus_num_docs(p.corpus), TITLES.len());
        assert!(topmine_corpus_num_tokens(p.corpus) > 0);
        assert!(topmine_corpus_vocab_size(p.corpus) > 0);
        assert!(topmine_phrases_len(p.phrases) > 0);

        let mut count = 0u64;
        let phrase = CString::new("support vector machines").unwrap();
        assert_eq!(
            topmine_phrases_count(p.phrases, p.corpus, phrase.as_ptr(), &mut count),
            TopmineStatus::Ok
        );
        assert_eq!(count, 5);
        let unknown = CString::new("no such words").unwrap();
        assert_eq!(
            topmine_phrases_count(p.phrases, p.corpus, unknown.as_ptr(), &mut count),
            TopmineStatus::Ok
        );
        assert_eq!(count, 0);

        let mut n = 0usize;
        assert_eq!(topmine_segmentation_num_phrases(p.seg, 0, &mut n), TopmineStatus::Ok);
        assert!(n >= 1);

        let mut model: *mut TopmineModel = ptr::null_mut();
        assert_eq!(
            topmine_train(p.corpus, p.seg, 3, 50, 0.0, 0.01, 9, &mut model),
            TopmineStatus::Ok
        );
        let mut topic = u32::MAX;
        assert_eq!(topmine_model_phrase_topic(model, 0, 0, &mut topic), TopmineStatus::Ok);
        assert!(topic < 3);

        let mut tsv: *mut c_char = ptr::null_mut();
        assert_eq!(topmine_model_report_tsv(model, p.corpus, p.seg, 5, &mut tsv), TopmineStatus::Ok);
        let text = CStr::from_ptr(tsv).to_str().unwrap().to_owned();
        topmine_string_free(tsv);
        assert!(text.starts_with("topic\trank\tkind\ttext\tscore\n"));
        assert!(text.lines().any(|l| l.contains("\tword\t")));
        topmine_model_free(model);
    }
}

#[test]
fn training_is_reproducible() {
    let p = build();
    let report = |seed| unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(topmine_train(p.corpus, p.seg, 2, 30, 0.5, 0.1, seed, &mut model), TopmineStatus::Ok);
        let mut tsv = ptr::null_mut();
        assert_eq!(topmine_model_report_tsv(model, p.corpus, p.seg, 3, &mut tsv), TopmineStatus::Ok);
        let s = CStr::from_ptr(tsv).to_owned();
        topmine_string_free(tsv);
        topmine_model_free(model);
        s
    };
    assert_eq!(report(4), report(4));
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut corpus: *mut TopmineCorpus = ptr::null_mut();
        assert_eq!(
            topmine_corpus_from_texts(ptr::null(), 3, 1, &mut corpus),
            TopmineStatus::NullArgument
        );
        assert!(last_error().contains("texts"));
        assert!(corpus.is_null());

        // zero documents is a parameter error
        assert_eq!(
            topmine_corpus_from_texts(ptr::null(), 0, 1, &mut corpus),
            TopmineStatus::InvalidArgument
        );

        let missing = CString::new("/nonexistent/corpus.txt").unwrap();
        assert_eq!(topmine_corpus_from_file(missing.as_ptr(), 1, &mut corpus), TopmineStatus::Io);
        assert!(last_error().contains("nonexistent"));

        let p = build();
        let mut phrases = ptr::null_mut();
        assert_eq!(topmine_mine(p.corpus, 0, 0, &mut phrases), TopmineStatus::InvalidArgument);
        assert!(phrases.is_null());
        assert_eq!(topmine_mine(ptr::null(), 3, 0, &mut phrases), TopmineStatus::NullArgument);
        assert_eq!(topmine_mine(p.corpus, 3, 0, ptr::null_mut()), TopmineStatus::NullArgument);

        let mut seg = ptr::null_mut();
        assert_eq!(
            topmine_segment(p.corpus, p.phrases, f64::NAN, &mut seg),
            TopmineStatus::InvalidArgument
        );

        let mut n = 0;
        assert_eq!(
            topmine_segmentation_num_phrases(p.seg, 10_000, &mut n),
            TopmineStatus::InvalidArgument
        );

        let mut model = ptr::null_mut();
        assert_eq!(
            topmine_train(p.corpus, p.seg, 0, 10, 0.0, 0.01, 1, &mut model),
            TopmineStatus::InvalidArgument
        );
        assert_eq!(
            topmine_train(p.corpus, p.seg, 2, 10, 0.0, -1.0, 1, &mut model),
            TopmineStatus::InvalidArgument
        );

        // a successful call clears the message
        assert_eq!(topmine_corpus_num_docs(ptr::null()), 0);
        let mut again = ptr::null_mut();
        assert_eq!(topmine_mine(p.corpus, 3, 0, &mut again), TopmineStatus::Ok);
        assert!(topmine_last_error().is_null());
        topmine_phrases_free(again);

        // freeing NULL is a no-op
        topmine_corpus_free(ptr::null_mut());
        topmine_phrases_free(ptr::null_mut());
        topmine_segmentation_free(ptr::null_mut());
        topmine_model_free(ptr::null_mut());
        topmine_string_free(ptr::null_mut());
    }
}

#[test]
fn significance_matches_reference_values() {
    assert!((topmine_significance(10, 10, 8, 100) - 7.0 / 8f64.sqrt()).abs() < 1e-12);
    assert_eq!(topmine_significance(10, 10, 1, 100), 0.0);
    assert_eq!(topmine_significance(10, 10, 0, 100), f64::NEG_INFINITY);
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/topmine.h")).unwrap();
    for name in [
        "typedef struct TopmineCorpus TopmineCorpus",
        "TOPMINE_STATUS_OK = 0",
        "TOPMINE_STATUS_PANIC",
        "topmine_corpus_from_texts",
        "topmine_mine",
        "topmine_segment",
        "topmine_train",
        "topmine_model_report_tsv",
        "topmine_last_error",
        "topmine_string_free",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let version = unsafe { CStr::from_ptr(topmine_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
