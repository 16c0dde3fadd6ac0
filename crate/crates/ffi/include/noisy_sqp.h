#ifndef NOISY_SQP_H
#define NOISY_SQP_H

#include <stddef.h>
#include <stdint.h>

/**
 * How a run ended.
 */
typedef enum NsqpRunStatus {
  NSQP_RUN_STATUS_BUDGET_ITERS = 0,
  NSQP_RUN_STATUS_BUDGET_EVALS = 1,
  NSQP_RUN_STATUS_EARLY_STATIONARY = 2,
  NSQP_RUN_STATUS_EARLY_INFEASIBLE_STATIONARY = 3,
  NSQP_RUN_STATUS_DEGENERATE_DIRECTION = 4,
  NSQP_RUN_STATUS_LINE_SEARCH_FAILURE = 5,
  NSQP_RUN_STATUS_TEST_UNSATISFIABLE = 6,
  NSQP_RUN_STATUS_NON_FINITE = 7,
} NsqpRunStatus;

/**
 * Return code of every fallible entry point.
 */
typedef enum NsqpStatus {
  NSQP_STATUS_OK = 0,
  NSQP_STATUS_NULL_POINTER = 1,
  NSQP_STATUS_INVALID_ARGUMENT = 2,
  NSQP_STATUS_UNKNOWN_PROBLEM = 3,
  NSQP_STATUS_SOLVER_ERROR = 4,
  NSQP_STATUS_PANIC = 5,
} NsqpStatus;

typedef enum NsqpVariant {
  NSQP_VARIANT_ADAPTIVE = 0,
  NSQP_VARIANT_LINE_SEARCH = 1,
} NsqpVariant;

/**
 * Opaque problem handle.
 */
typedef struct NsqpProblem NsqpProblem;

/**
 * Opaque result handle.
 */
typedef struct NsqpResult NsqpResult;

/**
 * Solver options. Obtain defaults from [`nsqp_options_default`].
 */
typedef struct NsqpOptions {
  enum NsqpVariant variant;
  /**
   * Nonzero for the optimistic tests.
   */
  int optimistic;
  /**
   * Nonzero to solve subproblems to tight tolerance.
   */
  int exact;
  /**
   * Relative inexactness factor when `exact` is zero.
   */
  double kappa;
  double eps_f;
  double eps_c;
  uint64_t seed;
  /**
   * Zero keeps the preset budget.
   */
  size_t max_iters;
  /**
   * Zero keeps the preset budget.
   */
  uint64_t max_weighted_evals;
} NsqpOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *nsqp_last_error_message(void);

/**
 * Static, NUL-terminated library version.
 */
const char *nsqp_version(void);

/**
 * Looks up a registry problem by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NsqpStatus nsqp_problem_builtin(const char *name, struct NsqpProblem **out);

/**
 * Parses a quadratic problem from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum NsqpStatus nsqp_problem_from_json(const char *json, struct NsqpProblem **out);

/**
 * Builds a problem from a user callback. A nonzero return from the
 * callback ends the run with the non-finite status.
 *
 * # Safety
 * `x0` must point to `n` doubles and `out` must be valid. `user_data` must
 * stay valid until the problem is freed.
 */
enum NsqpStatus nsqp_problem_from_callback(size_t n,
                                           size_t m,
                                           const double *x0,
                                           int (*eval)(void *user_data,
                                                       const double *x,
                                                       double *f,
                                                       double *g,
                                                       double *c,
                                                       double *j),
                                           void *user_data,
                                           struct NsqpProblem **out);

/**
 * Returns a new problem whose last constraint appears twice.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum NsqpStatus nsqp_problem_duplicate_last(const struct NsqpProblem *problem,
                                            struct NsqpProblem **out);

/**
 * # Safety
 * `problem` must be a live handle; `n` and `m` may be null.
 */
enum NsqpStatus nsqp_problem_dims(const struct NsqpProblem *problem, size_t *n, size_t *m);

/**
 * # Safety
 * `problem` must be null or a handle not yet freed.
 */
void nsqp_problem_free(struct NsqpProblem *problem);

/**
 * Optimistic adaptive solver at zero noise with relaxed subproblem solves.
 */
struct NsqpOptions nsqp_options_default(void);

/**
 * Runs the solver. `options` may be null for the defaults.
 *
 * # Safety
 * `problem` must be a live handle, `options` null or valid, `out` valid.
 */
enum NsqpStatus nsqp_solve(const struct NsqpProblem *problem,
                           const struct NsqpOptions *options,
                           struct NsqpResult **out);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void nsqp_result_free(struct NsqpResult *result);

/**
 * # Safety
 * `result` must be a live handle and `out` valid.
 */
enum NsqpStatus nsqp_result_status(const struct NsqpResult *result, enum NsqpRunStatus *out);

/**
 * Iteration count, weighted evaluation count and a success flag.
 * Any output pointer may be null.
 *
 * # Safety
 * `result` must be a live handle.
 */
enum NsqpStatus nsqp_result_counts(const struct NsqpResult *result,
                                   size_t *iters,
                                   uint64_t *weighted_evals,
                                   int *success);

/**
 * Copies the final iterate into `x`, which must hold `len ≥ n` doubles.
 *
 * # Safety
 * `result` must be a live handle and `x` must point to `len` doubles.
 */
enum NsqpStatus nsqp_result_final_x(const struct NsqpResult *result, double *x, size_t len);

/**
 * Exact feasibility and stationarity errors at the best iterate. Fails
 * with `InvalidArgument` when no iterate could be evaluated.
 *
 * # Safety
 * `result` must be a live handle; `feas` and `stat` may be null.
 */
enum NsqpStatus nsqp_result_best_errors(const struct NsqpResult *result,
                                        double *feas,
                                        double *stat);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOISY_SQP_H */
