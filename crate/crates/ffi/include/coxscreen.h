#ifndef COXSCREEN_H
#define COXSCREEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Request the Wald statistic in [`cox_screen`].
 */
#define COX_STAT_WALD 1

/**
 * Request the partial-likelihood-ratio statistic in [`cox_screen`].
 */
#define COX_STAT_PLIK 2

/**
 * Result code of every fallible call.
 */
typedef enum CoxStatus {
  COX_STATUS_OK = 0,
  COX_STATUS_NULL_POINTER = 1,
  COX_STATUS_INVALID_ARGUMENT = 2,
  COX_STATUS_IO = 3,
  COX_STATUS_VALIDATION = 4,
  COX_STATUS_FIT = 5,
  COX_STATUS_CONFIG = 6,
  COX_STATUS_PANIC = 7,
} CoxStatus;

typedef enum CoxFitStatus {
  COX_FIT_STATUS_CONVERGED = 0,
  COX_FIT_STATUS_SEPARATION = 1,
  COX_FIT_STATUS_SINGULAR = 2,
  COX_FIT_STATUS_NOT_CONVERGED = 3,
  COX_FIT_STATUS_NON_FINITE = 4,
} CoxFitStatus;

typedef enum CoxStatistic {
  COX_STATISTIC_MPLE = 0,
  COX_STATISTIC_WALD = 1,
  COX_STATISTIC_PLIK = 2,
} CoxStatistic;

typedef enum CoxBaseline {
  COX_BASELINE_PSIS_WALD = 0,
  COX_BASELINE_PSIS_PLIK = 1,
  COX_BASELINE_CORS = 2,
  COX_BASELINE_CRIS = 3,
} CoxBaseline;

/**
 * Opaque survival dataset.
 */
typedef struct CoxDataset CoxDataset;

/**
 * Opaque screening result.
 */
typedef struct CoxScreenResult CoxScreenResult;

/**
 * One screened covariate. Statistics that were not computed, or whose fit
 * failed, are NaN.
 */
typedef struct CoxScreenRecord {
  size_t index;
  double beta_hat;
  double sigma_hat;
  double wald;
  double plik;
  enum CoxFitStatus fit_status;
  size_t iterations;
} CoxScreenRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *cox_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cox_version(void);

/**
 * `floor(n / ln n)`, at least 1.
 */
size_t cox_default_top_k(size_t n);

/**
 * Builds a dataset from `n` times, `n` statuses (0 censored, 1 event) and an
 * `n * p` covariate block stored column by column.
 *
 * # Safety
 * `time` and `status` must point to `n` readable values, `covariates` to
 * `n * p`, and `out` must be writable.
 */
enum CoxStatus cox_dataset_from_arrays(size_t n,
                                       size_t p,
                                       const double *time,
                                       const int32_t *status,
                                       const double *covariates,
                                       struct CoxDataset **out);

/**
 * Reads a CSV file. `time_col` and `status_col` may be NULL for the
 * defaults "time" and "status"; all other columns become covariates.
 *
 * # Safety
 * String arguments must be NUL-terminated or NULL where allowed; `out` must
 * be writable.
 */
enum CoxStatus cox_dataset_read_csv(const char *path,
                                    const char *time_col,
                                    const char *status_col,
                                    struct CoxDataset **out);

/**
 * Simulates one replicate of a built-in design (1, 2 or 3), calibrating
 * uniform censoring to `censor_target` first.
 *
 * # Safety
 * `out` must be writable.
 */
enum CoxStatus cox_simulate_example(uint32_t example,
                                    size_t n,
                                    size_t p,
                                    double censor_target,
                                    uint64_t seed,
                                    uint64_t replicate_id,
                                    struct CoxDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle or NULL.
 */
size_t cox_dataset_n(const struct CoxDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or NULL.
 */
size_t cox_dataset_p(const struct CoxDataset *dataset);

/**
 * Writes the dataset as CSV with columns time, status, covariates.
 *
 * # Safety
 * `dataset` must be a live handle and `path` NUL-terminated.
 */
enum CoxStatus cox_dataset_write_csv(const struct CoxDataset *dataset, const char *path);

/**
 * # Safety
 * `dataset` must come from this library and not be used afterwards.
 */
void cox_dataset_free(struct CoxDataset *dataset);

/**
 * Conditional screening with the `q` 0-based covariates in `conditioning`
 * (may be NULL when `q` is 0). MPLE is always computed; `statistics` is a
 * bit mask of `COX_STAT_WALD` and `COX_STAT_PLIK`.
 *
 * # Safety
 * `dataset` must be a live handle, `conditioning` must point to `q` values
 * and `out` must be writable.
 */
enum CoxStatus cox_screen(const struct CoxDataset *dataset,
                          const size_t *conditioning,
                          size_t q,
                          uint32_t statistics,
                          struct CoxScreenResult **out);

/**
 * Number of screened covariates (`p - q`).
 *
 * # Safety
 * `result` must be a live handle or NULL.
 */
size_t cox_screen_result_len(const struct CoxScreenResult *result);

/**
 * Log partial likelihood of the conditioning-only model; NaN for NULL.
 *
 * # Safety
 * `result` must be a live handle or NULL.
 */
double cox_screen_result_null_loglik(const struct CoxScreenResult *result);

/**
 * Copies record `k` (in ascending covariate order) into `out`.
 *
 * # Safety
 * `result` must be a live handle and `out` writable.
 */
enum CoxStatus cox_screen_result_record(const struct CoxScreenResult *result,
                                        size_t k,
                                        struct CoxScreenRecord *out);

/**
 * Copies the ranking by `stat` into `buffer` (capacity `capacity`) and
 * stores its full length in `len`. A NULL buffer with capacity 0 only
 * queries the length.
 *
 * # Safety
 * `result` must be a live handle, `buffer` writable for `capacity` values
 * and `len` writable.
 */
enum CoxStatus cox_screen_result_ranking(const struct CoxScreenResult *result,
                                         enum CoxStatistic stat,
                                         size_t *buffer,
                                         size_t capacity,
                                         size_t *len);

/**
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void cox_screen_result_free(struct CoxScreenResult *result);

/**
 * Runs a marginal baseline. `statistics` and `ranking` must each hold `p`
 * values; failed fits give NaN statistics and rank last.
 *
 * # Safety
 * `dataset` must be a live handle; both buffers must be writable for `p`
 * values.
 */
enum CoxStatus cox_baseline(const struct CoxDataset *dataset,
                            enum CoxBaseline method,
                            double *statistics,
                            size_t *ranking);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COXSCREEN_H */
