#ifndef ROBUST_RECOURSE_H
#define ROBUST_RECOURSE_H

/* Generated by cbindgen from the robust-recourse-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_POINTER = 1,
  RR_STATUS_INVALID_ARGUMENT = 2,
  RR_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Bad norm for the algorithm, or an unknown algorithm code.
   */
  RR_STATUS_UNSUPPORTED = 4,
  RR_STATUS_NUMERIC_FAILURE = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  RR_STATUS_PANIC = 6,
} RrStatus;

/**
 * Algorithm codes accepted by [`rr_solve`].
 */
typedef enum RrAlgorithm {
  /**
   * Candidate decomposition, `p = 1`.
   */
  RR_ALGORITHM_ALG1 = 0,
  /**
   * Coordinate descent, `p = ∞`.
   */
  RR_ALGORITHM_ALG2 = 1,
  RR_ALGORITHM_ROAR_L1 = 2,
  RR_ALGORITHM_ROAR_LINF = 3,
} RrAlgorithm;

/**
 * Opaque recourse problem.
 */
typedef struct RrProblem RrProblem;

/**
 * Opaque solved recourse.
 */
typedef struct RrSolution RrSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the calling thread, or null if none. The pointer
 * stays valid until the next failing call on this thread.
 */
const char *rr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rr_version(void);

/**
 * Creates a problem for the GLM `weights`, `intercept` and origin `origin`
 * (both of length `dim`). `p` is the norm order, `INFINITY` for the max
 * norm. On success `*out` receives a handle to release with
 * [`rr_problem_free`].
 *
 * # Safety
 * `weights` and `origin` must point to `dim` readable doubles and `out` to a
 * writable handle slot.
 */
enum RrStatus rr_problem_new(const double *weights,
                             double intercept,
                             const double *origin,
                             uintptr_t dim,
                             double p,
                             double alpha,
                             double lambda,
                             bool perturb_intercept,
                             struct RrProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`rr_problem_new`] not yet freed.
 */
void rr_problem_free(struct RrProblem *problem);

/**
 * Worst-case price `max_θ J(x, θ)` of the recourse `x` (length `dim` of the
 * problem) over the problem's neighborhood.
 *
 * # Safety
 * `problem` must be a live handle, `x` must point to `len` readable doubles,
 * and `price` must be writable.
 */
enum RrStatus rr_worst_case_price(const struct RrProblem *problem,
                                  const double *x,
                                  uintptr_t len,
                                  double *price);

/**
 * Solves the problem with the given [`RrAlgorithm`] code under that
 * algorithm's norm (the problem's `p` is replaced). On success `*out`
 * receives a handle to release with [`rr_solution_free`].
 *
 * # Safety
 * `problem` must be a live handle and `out` a writable handle slot.
 */
enum RrStatus rr_solve(const struct RrProblem *problem,
                       uint32_t algorithm,
                       struct RrSolution **out);

/**
 * # Safety
 * `solution` must be null or a handle from [`rr_solve`] not yet freed.
 */
void rr_solution_free(struct RrSolution *solution);

/**
 * Number of features of the recourse; 0 for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
uintptr_t rr_solution_dim(const struct RrSolution *solution);

/**
 * Certified worst-case price; NaN for a null handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
double rr_solution_price(const struct RrSolution *solution);

/**
 * Whether every inner solve met its stopping rule.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
bool rr_solution_converged(const struct RrSolution *solution);

/**
 * Copies the recourse into `buf`, which must hold exactly
 * [`rr_solution_dim`] doubles.
 *
 * # Safety
 * `solution` must be a live handle and `buf` must point to `len` writable
 * doubles.
 */
enum RrStatus rr_solution_recourse(const struct RrSolution *solution, double *buf, uintptr_t len);

/**
 * Copies the worst-case model as `dim` weights followed by the intercept
 * into `buf`, which must hold `dim + 1` doubles.
 *
 * # Safety
 * `solution` must be a live handle and `buf` must point to `len` writable
 * doubles.
 */
enum RrStatus rr_solution_adversarial_model(const struct RrSolution *solution,
                                            double *buf,
                                            uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_RECOURSE_H */
