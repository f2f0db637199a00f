#ifndef TOPMINE_H
#define TOPMINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TopmineStatus {
  TOPMINE_STATUS_OK = 0,
  TOPMINE_STATUS_NULL_ARGUMENT = 1,
  TOPMINE_STATUS_INVALID_ARGUMENT = 2,
  TOPMINE_STATUS_IO = 3,
  TOPMINE_STATUS_FORMAT = 4,
  TOPMINE_STATUS_CONTRACT = 5,
  TOPMINE_STATUS_PANIC = 6,
} TopmineStatus;

typedef struct TopmineCorpus TopmineCorpus;

typedef struct TopmineModel TopmineModel;

typedef struct TopminePhrases TopminePhrases;

typedef struct TopmineSegmentation TopmineSegmentation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next `topmine_*` call on the same thread.
 */
const char *topmine_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *topmine_version(void);

/**
 * Builds a corpus from `n` UTF-8 strings; document ids are `1..=n`.
 *
 * # Safety
 * `texts` must point to `n` valid NUL-terminated strings and `out` to a
 * writable handle slot.
 */
enum TopmineStatus topmine_corpus_from_texts(const char *const *texts,
                                             size_t n,
                                             int remove_stop_words,
                                             struct TopmineCorpus **out);

/**
 * Reads a corpus from a file: JSON lines for `.jsonl`/`.json`, otherwise
 * one document per line.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum TopmineStatus topmine_corpus_from_file(const char *path,
                                            int remove_stop_words,
                                            struct TopmineCorpus **out);

/**
 * Number of documents, or 0 for a NULL handle.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t topmine_corpus_num_docs(const struct TopmineCorpus *corpus);

/**
 * Number of kept tokens, or 0 for a NULL handle.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t topmine_corpus_num_tokens(const struct TopmineCorpus *corpus);

/**
 * Vocabulary size, or 0 for a NULL handle.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t topmine_corpus_vocab_size(const struct TopmineCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle not yet freed.
 */
void topmine_corpus_free(struct TopmineCorpus *corpus);

/**
 * Mines every phrase occurring at least `min_support` times. `max_len` of
 * 0 means no length limit.
 *
 * # Safety
 * `corpus` must be a live handle and `out` a writable handle slot.
 */
enum TopmineStatus topmine_mine(const struct TopmineCorpus *corpus,
                                uint64_t min_support,
                                size_t max_len,
                                struct TopminePhrases **out);

/**
 * Number of distinct frequent phrases, or 0 for a NULL handle.
 *
 * # Safety
 * `phrases` must be NULL or a live handle.
 */
size_t topmine_phrases_len(const struct TopminePhrases *phrases);

/**
 * Frequency of a space-separated phrase (normalized words, as stored in
 * the vocabulary). Unknown or infrequent phrases give 0.
 *
 * # Safety
 * Handles must be live, `phrase` NUL-terminated and `count` writable.
 */
enum TopmineStatus topmine_phrases_count(const struct TopminePhrases *phrases,
                                         const struct TopmineCorpus *corpus,
                                         const char *phrase,
                                         uint64_t *count);

/**
 * # Safety
 * `phrases` must be NULL or a handle not yet freed.
 */
void topmine_phrases_free(struct TopminePhrases *phrases);

/**
 * Significance of merging two phrases with counts `f1`, `f2` whose
 * concatenation occurs `f12` times in a corpus of `total_tokens` tokens.
 * Negative infinity when `f12` is 0.
 */
double topmine_significance(uint64_t f1, uint64_t f2, uint64_t f12, uint64_t total_tokens);

/**
 * Partitions every document into phrases, merging while the best
 * adjacent pair scores at least `threshold`.
 *
 * # Safety
 * Handles must be live and `out` a writable handle slot.
 */
enum TopmineStatus topmine_segment(const struct TopmineCorpus *corpus,
                                   const struct TopminePhrases *phrases,
                                   double threshold,
                                   struct TopmineSegmentation **out);

/**
 * Number of phrases document `doc` was split into.
 *
 * # Safety
 * `seg` must be a live handle and `count` writable.
 */
enum TopmineStatus topmine_segmentation_num_phrases(const struct TopmineSegmentation *seg,
                                                    size_t doc,
                                                    size_t *count);

/**
 * # Safety
 * `seg` must be NULL or a handle not yet freed.
 */
void topmine_segmentation_free(struct TopmineSegmentation *seg);

/**
 * Trains the phrase-constrained topic model with symmetric priors. An
 * `alpha` of 0 or less selects `50 / topics`. Half the iterations are
 * burn-in.
 *
 * # Safety
 * Handles must be live and `out` a writable handle slot.
 */
enum TopmineStatus topmine_train(const struct TopmineCorpus *corpus,
                                 const struct TopmineSegmentation *seg,
                                 size_t topics,
                                 size_t iterations,
                                 double alpha,
                                 double beta,
                                 uint64_t seed,
                                 struct TopmineModel **out);

/**
 * Topic of phrase `g` of document `doc` in the final sample.
 *
 * # Safety
 * `model` must be a live handle and `topic` writable.
 */
enum TopmineStatus topmine_model_phrase_topic(const struct TopmineModel *model,
                                              size_t doc,
                                              size_t g,
                                              uint32_t *topic);

/**
 * Writes the top-`top_n` words and phrases of every topic as TSV
 * (`topic, rank, kind, text, score`) into a new string that the caller
 * releases with `topmine_string_free`.
 *
 * # Safety
 * Handles must be the ones the model was trained from; `out` writable.
 */
enum TopmineStatus topmine_model_report_tsv(const struct TopmineModel *model,
                                            const struct TopmineCorpus *corpus,
                                            const struct TopmineSegmentation *seg,
                                            size_t top_n,
                                            char **out);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void topmine_model_free(struct TopmineModel *model);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a string from `topmine_model_report_tsv` not yet freed.
 */
void topmine_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPMINE_H */
