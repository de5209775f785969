#ifndef LOCALBRANCH_H
#define LOCALBRANCH_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Codes returned by every fallible function. The first four match the
 * command-line exit codes.
 */
typedef enum LbStatus {
  LB_STATUS_OK = 0,
  /**
   * The call ran but found no improved or feasible point.
   */
  LB_STATUS_NO_RESULT = 1,
  LB_STATUS_INVALID_INPUT = 2,
  LB_STATUS_SOLVER_FAILURE = 3,
  LB_STATUS_NULL_POINTER = 4,
  LB_STATUS_PANIC = 5,
} LbStatus;

/**
 * A parsed and validated problem.
 */
typedef struct LbProblem LbProblem;

/**
 * A point produced by [`lb_improve`] or [`lb_find_feasible`].
 */
typedef struct LbResult LbResult;

typedef struct LbImproveOptions {
  /**
   * Neighbourhood radius; 0 selects it from the number of binaries.
   */
  size_t k;
  size_t max_iterations;
  /**
   * Seconds per MILP solve.
   */
  double milp_time_limit;
  /**
   * Overall seconds; 0 or negative means no limit.
   */
  double time_limit;
  double feasibility_tolerance;
  double integrality_tolerance;
  /**
   * Stop at the first improvement instead of searching each neighbourhood
   * and restarting from its best point.
   */
  bool first_improvement;
} LbImproveOptions;

typedef struct LbFeasibleOptions {
  size_t starts;
  uint64_t seed;
  double milp_time_limit;
  double time_limit;
  double feasibility_tolerance;
  double integrality_tolerance;
} LbFeasibleOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *lb_last_error(void);

/**
 * Radius `min(15, max(1, floor(b / 2)))`.
 */
size_t lb_compute_k(size_t binaries);

/**
 * Parses a NUL-terminated instance document.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum LbStatus lb_problem_from_json(const char *json, struct LbProblem **out);

/**
 * # Safety
 * `problem` must come from [`lb_problem_from_json`] and not be used again.
 */
void lb_problem_free(struct LbProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t lb_problem_num_vars(const struct LbProblem *problem);

/**
 * # Safety
 * `problem` must be a live handle or null.
 */
size_t lb_problem_num_binaries(const struct LbProblem *problem);

/**
 * Evaluates `point` (length `len`). Writes the objective, the largest
 * violation and the verdict to the non-null output pointers. A tolerance
 * of 0 selects the default.
 *
 * # Safety
 * Pointers must be valid; `point` must hold `len` doubles.
 */
enum LbStatus lb_check(const struct LbProblem *problem,
                       const double *point,
                       size_t len,
                       double feasibility_tolerance,
                       double *objective,
                       double *max_violation,
                       bool *feasible);

struct LbImproveOptions lb_improve_options_default(void);

struct LbFeasibleOptions lb_feasible_options_default(void);

/**
 * Searches around the feasible `incumbent`. Returns `LB_STATUS_OK` and sets
 * `*out` when a better point is found, `LB_STATUS_NO_RESULT` otherwise.
 * `options` may be null for defaults.
 *
 * # Safety
 * Pointers must be valid; `incumbent` must hold `len` doubles.
 */
enum LbStatus lb_improve(const struct LbProblem *problem,
                         const double *incumbent,
                         size_t len,
                         const struct LbImproveOptions *options,
                         struct LbResult **out);

/**
 * Looks for a feasible point without an incumbent. `options` may be null.
 *
 * # Safety
 * Pointers must be valid.
 */
enum LbStatus lb_find_feasible(const struct LbProblem *problem,
                               const struct LbFeasibleOptions *options,
                               struct LbResult **out);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
double lb_result_objective(const struct LbResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
size_t lb_result_len(const struct LbResult *result);

/**
 * # Safety
 * `result` must be a live handle or null.
 */
size_t lb_result_iterations(const struct LbResult *result);

/**
 * Copies the point into `buf`, which must hold at least
 * [`lb_result_len`] doubles.
 *
 * # Safety
 * `buf` must be valid for `cap` writes.
 */
enum LbStatus lb_result_point(const struct LbResult *result, double *buf, size_t cap);

/**
 * # Safety
 * `result` must come from this library and not be used again.
 */
void lb_result_free(struct LbResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOCALBRANCH_H */
