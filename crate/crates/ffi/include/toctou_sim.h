#ifndef TOCTOU_SIM_H
#define TOCTOU_SIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
enum TsStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  TsStatus_Ok = 0,
  TsStatus_NullPointer = 1,
  TsStatus_InvalidUtf8 = 2,
  TsStatus_InvalidArgument = 3,
  TsStatus_LoadFailed = 4,
  TsStatus_RunFailed = 5,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum TsStatus TsStatus;
#else
typedef int32_t TsStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Agent profile selector for runs.
 */
enum TsProfile
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  /**
   * Screenshot observation, coordinate-bound clicks.
   */
  TsProfile_Coordinate = 0,
  /**
   * Structured observation, element-selector actions.
   */
  TsProfile_Selector = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum TsProfile TsProfile;
#else
typedef int32_t TsProfile;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Attack strategy for Monte Carlo trials.
 */
enum TsStrategy
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  /**
   * Refresh at a fixed time; `lo_s` carries the time, `hi_s` is ignored.
   */
  TsStrategy_FixedRefresh = 0,
  /**
   * Refresh sampled uniformly from `[lo_s, hi_s]` per trial.
   */
  TsStrategy_UniformRefresh = 1,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum TsStrategy TsStrategy;
#else
typedef int32_t TsStrategy;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque run-result handle.
 */
typedef struct TsRunResult TsRunResult;

/**
 * Opaque scenario handle.
 */
typedef struct TsScenario TsScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *ts_version(void);

/**
 * JSON array of bundled scenario ids. Free with `ts_string_free`.
 */
char *ts_bundled_ids(void);

/**
 * Loads a bundled scenario (`s1`..`s9`).
 *
 * # Safety
 * `id` must be a valid NUL-terminated string; `out` must be a valid
 * pointer. On success `*out` owns the scenario until `ts_scenario_free`.
 */
TsStatus ts_scenario_bundled(const char *id, TsScenario **out);

/**
 * Parses a scenario from a JSON document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be valid.
 */
TsStatus ts_scenario_load_json(const char *json, TsScenario **out);

/**
 * Loads a scenario from a file path.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid.
 */
TsStatus ts_scenario_load_file(const char *path, TsScenario **out);

/**
 * Scenario id as an owned string. Free with `ts_string_free`.
 *
 * # Safety
 * `scenario` must be a live handle from one of the load calls, or NULL.
 */
char *ts_scenario_id(const TsScenario *scenario);

/**
 * Serializes the scenario back to its JSON document form.
 *
 * # Safety
 * `scenario` must be a live handle or NULL.
 */
char *ts_scenario_to_json(const TsScenario *scenario);

/**
 * Releases a scenario handle. NULL is a no-op.
 *
 * # Safety
 * `scenario` must have come from a load call and not been freed before.
 */
void ts_scenario_free(TsScenario *scenario);

/**
 * Runs a scenario with one agent profile.
 *
 * `latency_ms` is the fixed planning latency; `residual_ms` the gap between
 * validation and dispatch; `max_iterations` the retry bound for
 * expiring-state pages.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be valid. On success `*out`
 * owns the result until `ts_run_result_free`.
 */
TsStatus ts_run_case(const TsScenario *scenario,
                     TsProfile profile,
                     bool validate,
                     uint64_t latency_ms,
                     uint64_t residual_ms,
                     uint32_t max_iterations,
                     uint64_t seed,
                     TsRunResult **out);

/**
 * Whether the run triggered a race (violation plus oracle failure).
 *
 * # Safety
 * `result` must be a live handle or NULL (returns false).
 */
bool ts_run_result_triggered(const TsRunResult *result);

/**
 * Whether the task oracle passed.
 *
 * # Safety
 * `result` must be a live handle or NULL (returns false).
 */
bool ts_run_result_oracle_pass(const TsRunResult *result);

/**
 * Number of check/validate/act cycles the run took.
 *
 * # Safety
 * `result` must be a live handle or NULL (returns 0).
 */
uint64_t ts_run_result_steps(const TsRunResult *result);

/**
 * Full run result as JSON. Free with `ts_string_free`.
 *
 * # Safety
 * `result` must be a live handle or NULL.
 */
char *ts_run_result_to_json(const TsRunResult *result);

/**
 * Releases a run-result handle. NULL is a no-op.
 *
 * # Safety
 * `result` must have come from `ts_run_case` and not been freed before.
 */
void ts_run_result_free(TsRunResult *result);

/**
 * Success probability of an update at time `t_s` under latency
 * `U[a_s, b_s]` and residual window `w_s` (all seconds).
 *
 * # Safety
 * `out_p` must be a valid pointer.
 */
TsStatus ts_analytic_p(double t_s, double a_s, double b_s, double w_s, double *out_p);

/**
 * Maximum success probability and the time interval attaining it.
 *
 * # Safety
 * All out-pointers must be valid.
 */
TsStatus ts_max_success(double a_s,
                        double b_s,
                        double w_s,
                        double *out_p,
                        double *out_t_lo,
                        double *out_t_hi);

/**
 * Seeded Monte Carlo trials of the residual-window attack.
 *
 * For `FixedRefresh`, `lo_s` is the refresh time and `hi_s` is ignored.
 * With `full_sim` the trials drive whole validate-act cycles instead of the
 * closed-form membership test; both paths produce identical counts.
 *
 * # Safety
 * `out_count` must be a valid pointer.
 */
TsStatus ts_monte_carlo(TsStrategy strategy,
                        double lo_s,
                        double hi_s,
                        double a_s,
                        double b_s,
                        double w_s,
                        uint64_t trials,
                        uint64_t seed,
                        bool full_sim,
                        uint64_t *out_count);

/**
 * Frees a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must have been returned by a `ts_*` call that allocates, and not
 * freed before.
 */
void ts_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOCTOU_SIM_H */
