#ifndef ACQSENS_H
#define ACQSENS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Which population model [`acq_fit_population`] estimates.
 */
typedef enum AcqModel {
  /**
   * Failure on the HQ/LQ indicator.
   */
  ACQ_MODEL_QUALITY = 0,
  /**
   * Failure on the signed distance to the region.
   */
  ACQ_MODEL_DISTANCE = 1,
} AcqModel;

/**
 * Result code of every fallible call.
 */
typedef enum AcqStatus {
  ACQ_STATUS_OK = 0,
  ACQ_STATUS_NULL_ARGUMENT = 1,
  ACQ_STATUS_INVALID_UTF8 = 2,
  /**
   * Invalid input data, configuration or arguments.
   */
  ACQ_STATUS_INPUT_ERROR = 3,
  /**
   * The analysis produced nothing to report.
   */
  ACQ_STATUS_EMPTY_RESULT = 4,
  ACQ_STATUS_NUMERICAL_ERROR = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  ACQ_STATUS_PANIC = 6,
} AcqStatus;

/**
 * A fitted mixed-effects model.
 */
typedef struct AcqFit AcqFit;

/**
 * A loaded prediction table together with its run configuration.
 */
typedef struct AcqTable AcqTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next `acq_*` call on the same thread.
 */
const char *acq_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *acq_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void acq_string_free(char *s);

/**
 * Loads a prediction CSV using the space and load settings of a run
 * configuration given as JSON text.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum AcqStatus acq_table_load(const char *csv_path, const char *config_json, struct AcqTable **out);

/**
 * Number of prediction records.
 *
 * # Safety
 * `table` must be a live handle; `out_len` must be writable.
 */
enum AcqStatus acq_table_len(const struct AcqTable *table, uintptr_t *out_len);

/**
 * Number of distinct methods.
 *
 * # Safety
 * `table` must be a live handle; `out_count` must be writable.
 */
enum AcqStatus acq_table_method_count(const struct AcqTable *table, uintptr_t *out_count);

/**
 * Releases a table. Null is ignored.
 *
 * # Safety
 * `table` must come from [`acq_table_load`] and not be freed twice.
 */
void acq_table_free(struct AcqTable *table);

/**
 * Fits a population model with Method and CaseID random intercepts for the
 * region given as JSON (array or `{"thresholds": [...]}`).
 *
 * # Safety
 * `table` must be a live handle, `region_json` NUL-terminated and `out`
 * writable.
 */
enum AcqStatus acq_fit_population(const struct AcqTable *table,
                                  const char *region_json,
                                  enum AcqModel model,
                                  struct AcqFit **out);

/**
 * Estimate, standard error and two-sided Wald p-value of a named coefficient
 * such as `"(Intercept)"`, `"Q"` or `"dQ"`. Any out-pointer may be null.
 *
 * # Safety
 * `fit` must be a live handle and `name` NUL-terminated.
 */
enum AcqStatus acq_fit_coefficient(const struct AcqFit *fit,
                                   const char *name,
                                   double *out_estimate,
                                   double *out_std_error,
                                   double *out_p_value);

/**
 * Whether the fit met its convergence criteria.
 *
 * # Safety
 * `fit` must be a live handle; `out` must be writable.
 */
enum AcqStatus acq_fit_converged(const struct AcqFit *fit, bool *out);

/**
 * The full fit as a JSON document; free with [`acq_string_free`].
 *
 * # Safety
 * `fit` must be a live handle; `out_json` must be writable.
 */
enum AcqStatus acq_fit_to_json(const struct AcqFit *fit, char **out_json);

/**
 * Releases a fit. Null is ignored.
 *
 * # Safety
 * `fit` must come from [`acq_fit_population`] and not be freed twice.
 */
void acq_fit_free(struct AcqFit *fit);

/**
 * Runs the grid scan, Pareto decomposition and selection with the table's
 * configuration. Writes a JSON object with `candidates`, `layers` and
 * `selection`; free with [`acq_string_free`].
 *
 * # Safety
 * `table` must be a live handle; `out_json` must be writable.
 */
enum AcqStatus acq_optimize(const struct AcqTable *table, char **out_json);

/**
 * Signed max-norm distance of `point` to the region `thresholds` (both of
 * length `dim`) in the table's parameter space; negative inside.
 *
 * # Safety
 * `table` must be a live handle; arrays must hold `dim` values.
 */
enum AcqStatus acq_signed_distance(const struct AcqTable *table,
                                   const double *point,
                                   const double *thresholds,
                                   uintptr_t dim,
                                   double *out_distance);

/**
 * One-sided (greater) Wilcoxon signed-rank p-value of paired differences.
 *
 * # Safety
 * `diffs` must hold `n` values; `out_p_value` must be writable.
 */
enum AcqStatus acq_wilcoxon_greater(const double *diffs, uintptr_t n, double *out_p_value);

/**
 * Runs the command-line interface with `argv[0..argc]` and returns its exit
 * code (0 success, 1 input error, 2 empty result, 3 numerical failure).
 *
 * # Safety
 * `argv` must hold `argc` NUL-terminated strings.
 */
int acq_run_cli(int argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACQSENS_H */
