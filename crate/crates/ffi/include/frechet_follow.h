#ifndef FRECHET_FOLLOW_H
#define FRECHET_FOLLOW_H

/* Generated by cbindgen from the Rust sources; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  FF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FF_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  FF_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed or out-of-contract arguments.
   */
  FF_STATUS_INPUT = 3,
  /**
   * A scenario or model violates a named invariant.
   */
  FF_STATUS_INVARIANT = 4,
  /**
   * Search structures could not be built (e.g. no IK at an endpoint).
   */
  FF_STATUS_CONSTRUCTION = 5,
  /**
   * The operation needs state that does not exist yet.
   */
  FF_STATUS_STATE = 6,
  FF_STATUS_PARSE = 7,
  FF_STATUS_IO = 8,
  /**
   * A caller-provided buffer is too small; the required length is reported.
   */
  FF_STATUS_BUFFER_TOO_SMALL = 9,
  /**
   * Internal error or caught panic. Always a bug.
   */
  FF_STATUS_INTERNAL = 10,
} FfStatus;

/**
 * Which planner [`ff_plan`] runs.
 */
typedef enum {
  FF_PLANNER_KIND_FRECHET = 0,
  FF_PLANNER_KIND_GREEDY_IK = 1,
  FF_PLANNER_KIND_VECTOR_FIELD = 2,
} FfPlannerKind;

/**
 * Opaque anytime planner driven one densification step at a time.
 */
typedef struct FfAnytimePlanner FfAnytimePlanner;

/**
 * Opaque finished run: solution (if any) and trace.
 */
typedef struct FfRunOutput FfRunOutput;

/**
 * Opaque planning scenario.
 */
typedef struct FfScenario FfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Text of the last error on this thread, or null if the last call succeeded.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *ff_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ff_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string obtained from this library, not yet freed.
 */
void ff_string_free(char *s);

/**
 * Loads and validates a scenario file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid for writes.
 */
FfStatus ff_scenario_load(const char *path, FfScenario **out);

/**
 * Parses and validates a scenario from JSON text.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be valid for writes.
 */
FfStatus ff_scenario_from_json(const char *json, FfScenario **out);

/**
 * Overrides the scenario's random seed.
 *
 * # Safety
 * `scenario` must be a live handle.
 */
FfStatus ff_scenario_set_seed(FfScenario *scenario, uint64_t seed);

/**
 * Number of joints of the scenario's arm, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle.
 */
size_t ff_scenario_dof(const FfScenario *scenario);

/**
 * # Safety
 * `scenario` must be null or a handle from this library, not yet freed.
 */
void ff_scenario_free(FfScenario *scenario);

/**
 * Runs a planner to completion. `strategy` may be null (scenario default)
 * or text such as `hybrid:p=0.25` / `ltg:m=5`. A negative
 * `max_iterations` and a negative `max_seconds` both mean "unset"; if both
 * are unset the scenario's budget applies. An infeasible outcome is still
 * `FF_STATUS_OK`; check [`ff_run_is_feasible`].
 *
 * # Safety
 * `scenario` must be a live handle; `strategy` null or a valid string;
 * `out` valid for writes.
 */
FfStatus ff_plan(const FfScenario *scenario,
                 FfPlannerKind planner,
                 const char *strategy,
                 int64_t max_iterations,
                 double max_seconds,
                 FfRunOutput **out);

/**
 * 1 if the run produced a path, 0 otherwise (or for a null handle).
 *
 * # Safety
 * `run` must be null or a live handle.
 */
int32_t ff_run_is_feasible(const FfRunOutput *run);

/**
 * Fréchet cost of the solution (infinity when infeasible).
 *
 * # Safety
 * `run` must be a live handle; `out_cost` valid for writes.
 */
FfStatus ff_run_frechet_cost(const FfRunOutput *run, double *out_cost);

/**
 * Copies the solution's configurations (row-major, `dof` angles each) into
 * `out`, writing the number of values to `out_len`. Pass a null `out` to
 * query the length; an infeasible run yields length 0.
 *
 * # Safety
 * `run` must be a live handle; `out` null or valid for `capacity` writes;
 * `out_len` valid for writes.
 */
FfStatus ff_run_configs(const FfRunOutput *run, double *out, size_t capacity, size_t *out_len);

/**
 * Copies the best cost after every trace row into `out`, as for [`ff_run_configs`].
 *
 * # Safety
 * As for [`ff_run_configs`].
 */
FfStatus ff_run_trace_costs(const FfRunOutput *run, double *out, size_t capacity, size_t *out_len);

/**
 * The full run output as JSON. Release with [`ff_string_free`].
 *
 * # Safety
 * `run` must be a live handle; `out` valid for writes.
 */
FfStatus ff_run_to_json(const FfRunOutput *run, char **out);

/**
 * # Safety
 * `run` must be null or a handle from this library, not yet freed.
 */
void ff_run_free(FfRunOutput *run);

/**
 * Builds the initial anytime planner state (and its first plan) for
 * step-by-step control. `strategy` may be null for the scenario default.
 *
 * # Safety
 * `scenario` must be a live handle; `strategy` null or a valid string;
 * `out` valid for writes.
 */
FfStatus ff_anytime_new(const FfScenario *scenario, const char *strategy, FfAnytimePlanner **out);

/**
 * Runs one densification iteration and reports the best cost afterwards
 * (infinity while no path is known).
 *
 * # Safety
 * `planner` must be a live handle; `out_cost` null or valid for writes.
 */
FfStatus ff_anytime_step(FfAnytimePlanner *planner, double *out_cost);

/**
 * Best cost so far (infinity while no path is known, or for a null handle).
 *
 * # Safety
 * `planner` must be null or a live handle.
 */
double ff_anytime_best_cost(const FfAnytimePlanner *planner);

/**
 * Copies the best path's configurations, as for [`ff_run_configs`].
 *
 * # Safety
 * As for [`ff_run_configs`], with a live `planner` handle.
 */
FfStatus ff_anytime_best_configs(const FfAnytimePlanner *planner,
                                 double *out,
                                 size_t capacity,
                                 size_t *out_len);

/**
 * # Safety
 * `planner` must be null or a handle from this library, not yet freed.
 */
void ff_anytime_free(FfAnytimePlanner *planner);

/**
 * Discrete Fréchet distance between two pose sequences given as flat
 * `x, y, theta` triples (`p_len` and `q_len` count poses). Also reports the
 * coupling pair attaining the cost.
 *
 * # Safety
 * `p` and `q` must point to `3 * p_len` and `3 * q_len` readable values;
 * output pointers must be valid for writes (`out_i`, `out_j` may be null).
 */
FfStatus ff_discrete_frechet(const double *p,
                             size_t p_len,
                             const double *q,
                             size_t q_len,
                             double w_rot,
                             double *out_cost,
                             size_t *out_i,
                             size_t *out_j);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRECHET_FOLLOW_H */
