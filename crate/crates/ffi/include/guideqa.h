#ifndef GUIDEQA_H
#define GUIDEQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  GQ_RESPONSE_KIND_ANSWERED = 0,
  GQ_RESPONSE_KIND_IDK = 1,
} GqResponseKind;

/**
 * Result of every fallible call.
 */
typedef enum {
  GQ_STATUS_OK = 0,
  GQ_STATUS_NULL_POINTER = 1,
  GQ_STATUS_INVALID_UTF8 = 2,
  GQ_STATUS_INVALID_ARGUMENT = 3,
  GQ_STATUS_IO = 4,
  GQ_STATUS_PARSE = 5,
  GQ_STATUS_VALIDATION = 6,
  GQ_STATUS_TRAIN = 7,
  GQ_STATUS_EMPTY_QUESTION = 8,
  GQ_STATUS_UNKNOWN_FEEDBACK_ID = 9,
  GQ_STATUS_ALREADY_VOTED = 10,
  GQ_STATUS_PANIC = 11,
} GqStatus;

/**
 * Opaque engine handle.
 */
typedef struct GqEngine GqEngine;

/**
 * Opaque response handle.
 */
typedef struct GqResponse GqResponse;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds an engine by generating the training corpus from a knowledge
 * file and a template file and training a model on it.
 *
 * # Safety
 * `kb_path` and `templates_path` must be NUL-terminated strings; `out`
 * must point to writable storage for one pointer.
 */
GqStatus gq_engine_new(const char *kb_path, const char *templates_path, GqEngine **out);

/**
 * Builds an engine from a knowledge file and a saved model file.
 *
 * # Safety
 * Same contract as [`gq_engine_new`].
 */
GqStatus gq_engine_load(const char *kb_path, const char *model_path, GqEngine **out);

/**
 * Writes the engine's model to `path`.
 *
 * # Safety
 * `engine` must come from this library; `path` must be NUL-terminated.
 */
GqStatus gq_engine_save_model(const GqEngine *engine, const char *path);

/**
 * Sets the confidence gate; must be finite and non-negative.
 *
 * # Safety
 * `engine` must come from this library and not be in use elsewhere.
 */
GqStatus gq_engine_set_threshold(GqEngine *engine, double threshold);

/**
 * # Safety
 * `engine` must come from this library or be null; it is invalid afterwards.
 */
void gq_engine_free(GqEngine *engine);

/**
 * Answers one question. The response must be released with
 * [`gq_response_free`].
 *
 * # Safety
 * `engine` must come from this library; `question` must be
 * NUL-terminated; `out` must point to writable storage for one pointer.
 */
GqStatus gq_ask(const GqEngine *engine, const char *question, GqResponse **out);

/**
 * Records a yes/no vote for a feedback id issued by this engine.
 *
 * # Safety
 * `engine` must come from this library; `feedback_id` must be NUL-terminated.
 */
GqStatus gq_feedback(const GqEngine *engine, const char *feedback_id, bool helpful);

/**
 * # Safety
 * `response` must come from [`gq_ask`].
 */
GqResponseKind gq_response_kind(const GqResponse *response);

/**
 * Top-intent confidence, or NaN for a null handle.
 *
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
double gq_response_confidence(const GqResponse *response);

/**
 * Answer text, borrowed from the response.
 *
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
const char *gq_response_answer(const GqResponse *response);

/**
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
const char *gq_response_feedback_id(const GqResponse *response);

/**
 * Intent name of an answered response; null for IDK.
 *
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
const char *gq_response_intent(const GqResponse *response);

/**
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
size_t gq_response_suggestion_count(const GqResponse *response);

/**
 * Suggestion `index`, or null when out of range.
 *
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
const char *gq_response_suggestion(const GqResponse *response, size_t index);

/**
 * The whole response as JSON; release with [`gq_string_free`].
 *
 * # Safety
 * `response` must come from [`gq_ask`] or be null.
 */
char *gq_response_to_json(const GqResponse *response);

/**
 * # Safety
 * `response` must come from [`gq_ask`] or be null; it is invalid afterwards.
 */
void gq_response_free(GqResponse *response);

/**
 * # Safety
 * `s` must come from this library's owned-string returns or be null.
 */
void gq_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null after a
 * success. Valid until the next call on the same thread.
 */
const char *gq_last_error_message(void);

/**
 * Library version, statically allocated.
 */
const char *gq_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GUIDEQA_H */
