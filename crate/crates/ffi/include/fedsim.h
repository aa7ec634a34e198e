#ifndef FEDSIM_H
#define FEDSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Per-round metric selector for [`fedsim_run_metric`].
 */
typedef enum {
  FedsimMetric_TestLoss = 0,
  FedsimMetric_TestAccuracy = 1,
  FedsimMetric_VerifiedCount = 2,
  FedsimMetric_VerifiedHonest = 3,
  FedsimMetric_VerifiedMalicious = 4,
  FedsimMetric_MeanHonestUtility = 5,
  FedsimMetric_ServerExpenditure = 6,
} FedsimMetric;

/**
 * Status code returned by every fallible function.
 */
typedef enum {
  FedsimStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  FedsimStatus_NullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  FedsimStatus_InvalidUtf8 = 2,
  /**
   * The config document failed to parse or validate.
   */
  FedsimStatus_ConfigError = 3,
  /**
   * A file could not be read or written.
   */
  FedsimStatus_IoError = 4,
  /**
   * The simulation itself failed.
   */
  FedsimStatus_RuntimeError = 5,
  /**
   * A round or metric index was out of range.
   */
  FedsimStatus_OutOfRange = 6,
} FedsimStatus;

/**
 * Opaque handle to a finished run.
 */
typedef struct FedsimRun FedsimRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; do not free.
 */
const char *fedsim_version(void);

/**
 * Parse a TOML config and run the experiment to completion. On success
 * writes a new handle into `out_run`.
 *
 * # Safety
 * `config_toml` must point to a NUL-terminated string and `out_run` to a
 * writable pointer slot; both must be non-null.
 */
FedsimStatus fedsim_run_toml(const char *config_toml, FedsimRun **out_run);

/**
 * Release a run handle. A null pointer is a no-op.
 *
 * # Safety
 * `run` must be a pointer returned by [`fedsim_run_toml`] that has not
 * already been freed.
 */
void fedsim_run_free(FedsimRun *run);

/**
 * Number of completed rounds, or 0 for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle from [`fedsim_run_toml`].
 */
size_t fedsim_run_rounds(const FedsimRun *run);

/**
 * Read one per-round metric into `out_value`.
 *
 * # Safety
 * `run` must be a live handle and `out_value` a writable f64 slot.
 */
FedsimStatus fedsim_run_metric(const FedsimRun *run,
                               size_t round,
                               FedsimMetric metric,
                               double *out_value);

/**
 * Summary of the run (final metrics, pass rates, rationality checks) as a
 * JSON string; free with [`fedsim_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out_json` a writable pointer slot.
 */
FedsimStatus fedsim_run_summary_json(const FedsimRun *run, char **out_json);

/**
 * The per-round metrics table as CSV text (same schema as `metrics.csv`);
 * free with [`fedsim_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out_csv` a writable pointer slot.
 */
FedsimStatus fedsim_run_metrics_csv(const FedsimRun *run, char **out_csv);

/**
 * The per-(round, client) ledger as CSV text (same schema as `ledger.csv`);
 * empty body (header only) for FedAvg/Krum runs. Free with
 * [`fedsim_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out_csv` a writable pointer slot.
 */
FedsimStatus fedsim_run_ledger_csv(const FedsimRun *run, char **out_csv);

/**
 * Description of the most recent error on this thread, or null if none;
 * free with [`fedsim_string_free`].
 */
char *fedsim_last_error_message(void);

/**
 * Release a string returned by this library. A null pointer is a no-op.
 *
 * # Safety
 * `s` must be a pointer returned by one of this library's string-producing
 * functions, not yet freed.
 */
void fedsim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDSIM_H */
