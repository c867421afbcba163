#ifndef CAMUV_H
#define CAMUV_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call.
 */
typedef enum CamuvStatus {
  CAMUV_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CAMUV_STATUS_NULL_POINTER = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CAMUV_STATUS_INVALID_UTF8 = 2,
  /**
   * Arguments or data were rejected.
   */
  CAMUV_STATUS_INVALID_INPUT = 3,
  /**
   * File could not be read or written.
   */
  CAMUV_STATUS_IO = 4,
  /**
   * CSV or JSON could not be parsed.
   */
  CAMUV_STATUS_PARSE = 5,
  /**
   * Data too degenerate to analyze (for example a constant column).
   */
  CAMUV_STATUS_DEGENERATE = 6,
  /**
   * Internal failure inside the library.
   */
  CAMUV_STATUS_INTERNAL = 7,
  /**
   * A panic was caught at the boundary.
   */
  CAMUV_STATUS_PANIC = 8,
} CamuvStatus;

typedef struct CamuvDataset CamuvDataset;

typedef struct CamuvGraph CamuvGraph;

typedef struct CamuvLagGraph CamuvLagGraph;

typedef struct CamuvPrior CamuvPrior;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if none.
 * Valid until the next failing call on the same thread.
 */
const char *camuv_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *camuv_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void camuv_string_free(char *s);

/**
 * Reads a CSV file with a header row of variable names.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CamuvStatus camuv_dataset_from_csv(const char *path, struct CamuvDataset **out);

/**
 * Builds a dataset from a row-major `n_rows * n_cols` buffer. `names` may be
 * null, in which case columns are named `X1..Xp`.
 *
 * # Safety
 * `values` must point to `n_rows * n_cols` doubles; `names`, if non-null, to
 * `n_cols` NUL-terminated strings; `out` must be writable.
 */
enum CamuvStatus camuv_dataset_from_rows(const double *values,
                                         size_t n_rows,
                                         size_t n_cols,
                                         const char *const *names,
                                         struct CamuvDataset **out);

/**
 * # Safety
 * `d` must be a live dataset handle.
 */
size_t camuv_dataset_n_samples(const struct CamuvDataset *d);

/**
 * # Safety
 * `d` must be a live dataset handle.
 */
size_t camuv_dataset_n_vars(const struct CamuvDataset *d);

/**
 * # Safety
 * `d` must be null or a handle not yet freed.
 */
void camuv_dataset_free(struct CamuvDataset *d);

/**
 * Empty prior knowledge over the variables of `data`.
 *
 * # Safety
 * `data` must be a live dataset handle; `out` must be writable.
 */
enum CamuvStatus camuv_prior_new(const struct CamuvDataset *data, struct CamuvPrior **out);

/**
 * Parses `{"forbidden": [[cause, effect], ...]}` over the variables of `data`.
 *
 * # Safety
 * `json` must be NUL-terminated; `data` a live handle; `out` writable.
 */
enum CamuvStatus camuv_prior_from_json(const char *json,
                                       const struct CamuvDataset *data,
                                       struct CamuvPrior **out);

/**
 * Asserts that `cause` is not a direct cause of `effect`.
 *
 * # Safety
 * `prior` must be a live handle; names must be NUL-terminated.
 */
enum CamuvStatus camuv_prior_forbid(struct CamuvPrior *prior,
                                    const char *cause,
                                    const char *effect);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void camuv_prior_free(struct CamuvPrior *p);

/**
 * Runs discovery. `prior` may be null.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum CamuvStatus camuv_discover(const struct CamuvDataset *data,
                                const struct CamuvPrior *prior,
                                double alpha,
                                size_t max_subset,
                                struct CamuvGraph **out);

/**
 * Number of directed edges.
 *
 * # Safety
 * `g` must be a live graph handle.
 */
size_t camuv_graph_n_directed(const struct CamuvGraph *g);

/**
 * Number of dashed (latent-connected) pairs.
 *
 * # Safety
 * `g` must be a live graph handle.
 */
size_t camuv_graph_n_dashed(const struct CamuvGraph *g);

/**
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum CamuvStatus camuv_graph_to_json(const struct CamuvGraph *g, char **out);

/**
 * # Safety
 * `g` must be a live graph handle; `out` must be writable.
 */
enum CamuvStatus camuv_graph_to_dot(const struct CamuvGraph *g, char **out);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void camuv_graph_free(struct CamuvGraph *g);

/**
 * Time-series discovery over lags `0..=max_lag`; rows of `data` are time
 * points in order.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum CamuvStatus camuv_discover_ts(const struct CamuvDataset *data,
                                   size_t max_lag,
                                   double alpha,
                                   size_t max_subset,
                                   struct CamuvLagGraph **out);

/**
 * Number of lagged directed edges.
 *
 * # Safety
 * `g` must be a live lag-graph handle.
 */
size_t camuv_lag_graph_n_edges(const struct CamuvLagGraph *g);

/**
 * # Safety
 * `g` must be a live lag-graph handle; `out` must be writable.
 */
enum CamuvStatus camuv_lag_graph_to_json(const struct CamuvLagGraph *g, char **out);

/**
 * # Safety
 * `g` must be a live lag-graph handle; `out` must be writable.
 */
enum CamuvStatus camuv_lag_graph_to_dot(const struct CamuvLagGraph *g, char **out);

/**
 * # Safety
 * `g` must be null or a handle not yet freed.
 */
void camuv_lag_graph_free(struct CamuvLagGraph *g);

/**
 * Gamma-approximation HSIC p-value for two samples of length `n`.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles; `p_value` must be writable.
 */
enum CamuvStatus camuv_hsic_pvalue(const double *x, const double *y, size_t n, double *p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAMUV_H */
