#ifndef CHURN_H
#define CHURN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ChurnStatus {
  CHURN_STATUS_OK = 0,
  CHURN_STATUS_NULL_POINTER = 1,
  CHURN_STATUS_INVALID_ARGUMENT = 2,
  CHURN_STATUS_IO = 3,
  /**
   * Malformed or inconsistent input data.
   */
  CHURN_STATUS_DATA = 4,
  /**
   * Serialized model text could not be read.
   */
  CHURN_STATUS_JSON = 5,
  /**
   * Training failed or the input is degenerate.
   */
  CHURN_STATUS_MODEL = 6,
  /**
   * The model was fitted on different features.
   */
  CHURN_STATUS_FINGERPRINT = 7,
  CHURN_STATUS_PANIC = 99,
} ChurnStatus;

/**
 * A labeled churn table plus its dummy-encoded features.
 */
typedef struct ChurnDataset ChurnDataset;

/**
 * A fitted preprocessing + classifier pipeline.
 */
typedef struct ChurnModel ChurnModel;

/**
 * Binary metrics with "Left" as the positive class.
 */
typedef struct ChurnMetrics {
  double accuracy;
  double kappa;
  double precision;
  double recall;
  double specificity;
  double f1;
  /**
   * NaN when computed from counts alone.
   */
  double roc_auc;
} ChurnMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * success. The pointer stays valid until the next call on the thread.
 */
const char *churn_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *churn_version(void);

/**
 * Load a churn CSV file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum ChurnStatus churn_dataset_load(const char *path, struct ChurnDataset **out);

/**
 * Generate `n` synthetic churn records.
 *
 * # Safety
 * `out` must be writable.
 */
enum ChurnStatus churn_dataset_synthetic(size_t n, uint64_t seed, struct ChurnDataset **out);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t churn_dataset_rows(const struct ChurnDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle; `stayed` and `left` must be writable.
 */
enum ChurnStatus churn_dataset_class_counts(const struct ChurnDataset *dataset,
                                            size_t *stayed,
                                            size_t *left);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void churn_dataset_free(struct ChurnDataset *dataset);

/**
 * Fit a model of `family` ("gnb", "knn", "svm", "cart", "rf", "ann") on
 * every row of `dataset`. `names`/`values` hold `n_params` overrides of
 * the family defaults and may be NULL when `n_params` is 0.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum ChurnStatus churn_model_fit(const struct ChurnDataset *dataset,
                                 const char *family,
                                 const char *const *names,
                                 const double *values,
                                 size_t n_params,
                                 uint64_t seed,
                                 struct ChurnModel **out);

/**
 * Write one churn probability per row of `dataset` into `scores`, which
 * must hold exactly `len` == row count values.
 *
 * # Safety
 * `scores` must be writable for `len` doubles.
 */
enum ChurnStatus churn_model_predict(const struct ChurnModel *model,
                                     const struct ChurnDataset *dataset,
                                     double *scores,
                                     size_t len);

/**
 * Score `dataset` and compare with its labels at the 0.5 cutoff.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum ChurnStatus churn_model_evaluate(const struct ChurnModel *model,
                                      const struct ChurnDataset *dataset,
                                      struct ChurnMetrics *out);

/**
 * Serialize a model to JSON. Free the string with [`churn_string_free`].
 *
 * # Safety
 * `model` must be live; `out` must be writable.
 */
enum ChurnStatus churn_model_to_json(const struct ChurnModel *model, char **out);

/**
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum ChurnStatus churn_model_from_json(const char *json, struct ChurnModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void churn_model_free(struct ChurnModel *model);

/**
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void churn_string_free(char *s);

/**
 * Metrics from confusion-matrix counts; `roc_auc` is NaN.
 *
 * # Safety
 * `out` must be writable.
 */
enum ChurnStatus churn_metrics_from_counts(uint64_t tp,
                                           uint64_t fp,
                                           uint64_t tn,
                                           uint64_t fn_,
                                           struct ChurnMetrics *out);

/**
 * Upper tail of the chi-square distribution; NaN for `x < 0` or `df == 0`.
 */
double churn_chi_square_survival(double x, uint32_t df);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHURN_H */
