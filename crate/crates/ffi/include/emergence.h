#ifndef EMERGENCE_H
#define EMERGENCE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmStatus {
  EM_STATUS_OK = 0,
  EM_STATUS_NULL_POINTER = 1,
  EM_STATUS_INVALID_ARGUMENT = 2,
  EM_STATUS_BUFFER_TOO_SMALL = 3,
  EM_STATUS_INPUT_SHAPE = 4,
  EM_STATUS_EMPTY_SET = 5,
  EM_STATUS_DEGENERATE_INPUT = 6,
  EM_STATUS_TRAINING_DIVERGENCE = 7,
  EM_STATUS_CONFIG = 8,
  EM_STATUS_CACHE_INVALID = 9,
  EM_STATUS_INFEASIBLE = 10,
  EM_STATUS_DEPENDENCY = 11,
  EM_STATUS_INVARIANT = 12,
  EM_STATUS_TRACE = 13,
  EM_STATUS_IO = 14,
  EM_STATUS_JSON = 15,
  EM_STATUS_PANIC = 16,
} EmStatus;

/**
 * A trained agent-level model.
 */
typedef struct EmAgentModel EmAgentModel;

/**
 * A recorded simulation run.
 */
typedef struct EmTrace EmTrace;

/**
 * Tolerance F1 of a detection set. `recall` is NaN when there is no truth.
 */
typedef struct EmF1Report {
  size_t tp;
  size_t fp;
  double precision;
  double recall;
  double f1;
} EmF1Report;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *em_version(void);

/**
 * Message of the last failed call on this thread, or null. The caller owns
 * the returned string.
 */
char *em_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void em_string_free(char *s);

/**
 * Falling edges of `scores` through `c`: index `i + 1` for every
 * `scores[i] > c >= scores[i + 1]`.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum EmStatus em_detect_change_points(const double *scores,
                                      size_t len,
                                      double c,
                                      size_t *out,
                                      size_t cap,
                                      size_t *out_len);

/**
 * # Safety
 * Pointers must be valid for the given lengths; `out` for one write.
 */
enum EmStatus em_f1_at_tolerance(const size_t *truth,
                                 size_t n_truth,
                                 const size_t *detected,
                                 size_t n_detected,
                                 size_t theta,
                                 struct EmF1Report *out);

/**
 * Covering of the detected segmentation by the true one, both over
 * `len` steps and given as sorted change points inside `(0, len)`.
 *
 * # Safety
 * Pointers must be valid for the given lengths; `out` for one write.
 */
enum EmStatus em_covering(size_t len,
                          const size_t *truth,
                          size_t n_truth,
                          const size_t *detected,
                          size_t n_detected,
                          double *out);

/**
 * Exact least-squares segmentation of `series` into `k + 1` pieces.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum EmStatus em_label_offline(const double *series,
                               size_t len,
                               size_t k,
                               size_t *out,
                               size_t cap,
                               size_t *out_len);

/**
 * `(1 - cos(u, v)) / 2`.
 *
 * # Safety
 * `u` and `v` must be valid for `dim` reads; `out` for one write.
 */
enum EmStatus em_cosine_dissim(const double *u, const double *v, size_t dim, double *out);

/**
 * Reads a JSONL trace file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for one write.
 */
enum EmStatus em_trace_load(const char *path, struct EmTrace **out);

/**
 * Runs the simulator from a JSON simulator config.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` valid for one write.
 */
enum EmStatus em_trace_simulate(const char *config_json, struct EmTrace **out);

/**
 * Writes the trace as JSONL.
 *
 * # Safety
 * `trace` must be a live handle; `path` a NUL-terminated string.
 */
enum EmStatus em_trace_save(const struct EmTrace *trace, const char *path);

/**
 * Recorded steps and agent count.
 *
 * # Safety
 * `trace` must be a live handle; outputs valid for one write each.
 */
enum EmStatus em_trace_shape(const struct EmTrace *trace, size_t *steps, size_t *agents);

/**
 * The objective measure, one value per evaluation step.
 *
 * # Safety
 * `trace` must be a live handle; `out` valid for `cap` writes.
 */
enum EmStatus em_trace_objective(const struct EmTrace *trace,
                                 double *out,
                                 size_t cap,
                                 size_t *out_len);

/**
 * # Safety
 * `trace` must be null or a handle from this library, not yet freed.
 */
void em_trace_free(struct EmTrace *trace);

/**
 * Loads an agent model checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for one write.
 */
enum EmStatus em_agent_model_load(const char *path, struct EmAgentModel **out);

/**
 * Per-agent scores over the trace, row-major `steps × agents`.
 *
 * # Safety
 * Handles must be live; `out` valid for `cap` writes.
 */
enum EmStatus em_agent_model_score(const struct EmAgentModel *model,
                                   const struct EmTrace *trace,
                                   double alpha,
                                   uint64_t seed,
                                   double *out,
                                   size_t cap,
                                   size_t *out_len);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void em_agent_model_free(struct EmAgentModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMERGENCE_H */
