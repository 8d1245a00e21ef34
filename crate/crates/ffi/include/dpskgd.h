#ifndef DPSKGD_H
#define DPSKGD_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum DpskgdStatus {
  DPSKGD_STATUS_OK = 0,
  DPSKGD_STATUS_NULL_POINTER = 1,
  DPSKGD_STATUS_INVALID_ARGUMENT = 2,
  DPSKGD_STATUS_DIMENSION_MISMATCH = 3,
  DPSKGD_STATUS_BUDGET_OUT_OF_RANGE = 4,
  // Quadratic loss has no component-Lipschitz constant, so it cannot be privatized.
  DPSKGD_STATUS_UNBOUNDED_LIPSCHITZ = 5,
  DPSKGD_STATUS_DIVERGED = 6,
  DPSKGD_STATUS_NO_CONVERGENCE = 7,
  DPSKGD_STATUS_BUFFER_TOO_SMALL = 8,
  DPSKGD_STATUS_PANIC = 9,
} DpskgdStatus;

typedef enum DpskgdLoss {
  DPSKGD_LOSS_LOGISTIC = 0,
  DPSKGD_LOSS_QUADRATIC = 1,
} DpskgdLoss;

// A calibrated method ready to run.
typedef struct DpskgdPlan DpskgdPlan;

// Dataset plus its reference optimum.
typedef struct DpskgdProblem DpskgdProblem;

// Output of one run.
typedef struct DpskgdRun DpskgdRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *dpskgd_last_error(void);

// Library version as a static nul-terminated string.
const char *dpskgd_version(void);

// Build a problem from an `n × d` design stored column-major in `x`
// (`x[j*n + i]` is feature `j` of sample `i`) and labels `y` of length `n`.
// Logistic labels must be ±1. Solves for the reference optimum.
//
// # Safety
// `x` must point to `n*d` doubles, `y` to `n` doubles, `out` to writable storage.
enum DpskgdStatus dpskgd_problem_new(enum DpskgdLoss loss,
                                     uintptr_t n,
                                     uintptr_t d,
                                     const double *x,
                                     const double *y,
                                     struct DpskgdProblem **out);

// # Safety
// `problem` must come from [`dpskgd_problem_new`] and not be freed twice. Null is ignored.
void dpskgd_problem_free(struct DpskgdProblem *problem);

// # Safety
// `problem` must be a live handle; `n` and `d` writable.
enum DpskgdStatus dpskgd_problem_shape(const struct DpskgdProblem *problem,
                                       uintptr_t *n,
                                       uintptr_t *d);

// Copy the reference optimum into `w` (capacity `len`, at least `d`) and its value into `f_star`.
//
// # Safety
// `problem` must be a live handle, `w` must hold `len` doubles, `f_star` writable.
enum DpskgdStatus dpskgd_problem_optimum(const struct DpskgdProblem *problem,
                                         double *w,
                                         uintptr_t len,
                                         double *f_star);

// Objective value at `w` of length `len == d`.
//
// # Safety
// `problem` must be a live handle, `w` must hold `len` doubles, `value` writable.
enum DpskgdStatus dpskgd_problem_value(const struct DpskgdProblem *problem,
                                       const double *w,
                                       uintptr_t len,
                                       double *value);

// Calibrate a method for `problem` under `(epsilon, delta)`.
//
// `method` names the sampling strategy: `dp-sgd`, `dp-cd-uniform`,
// `dp-skgd-importance`, `dp-skgd-block`, `block-uniform` or `nice`.
// `block_size` and `tau` are read only by the block and nice strategies.
// With `epochs == 0 && steps == 0` the convex schedule is chosen
// automatically; otherwise both must be positive.
//
// # Safety
// `problem` must be a live handle, `method` a nul-terminated string, `out` writable.
enum DpskgdStatus dpskgd_plan_new(const struct DpskgdProblem *problem,
                                  const char *method,
                                  uintptr_t block_size,
                                  uintptr_t tau,
                                  double epsilon,
                                  double delta,
                                  uint64_t epochs,
                                  uint64_t steps,
                                  struct DpskgdPlan **out);

// # Safety
// `plan` must come from [`dpskgd_plan_new`] and not be freed twice. Null is ignored.
void dpskgd_plan_free(struct DpskgdPlan *plan);

// Schedule, audited epsilon and utility bound of a plan. Any output pointer may be null.
//
// # Safety
// `plan` must be a live handle; non-null outputs must be writable.
enum DpskgdStatus dpskgd_plan_info(const struct DpskgdPlan *plan,
                                   uint64_t *epochs,
                                   uint64_t *steps,
                                   double *audited_epsilon,
                                   double *utility_bound);

// Run `plan` on `problem` with the given seed. The same inputs give bitwise identical output.
//
// # Safety
// `problem` and `plan` must be live handles and `out` writable.
enum DpskgdStatus dpskgd_run(const struct DpskgdProblem *problem,
                             const struct DpskgdPlan *plan,
                             uint64_t seed,
                             struct DpskgdRun **out);

// # Safety
// `run` must come from [`dpskgd_run`] and not be freed twice. Null is ignored.
void dpskgd_run_free(struct DpskgdRun *run);

// Copy the private output `w_priv` (length `d`) into `w`.
//
// # Safety
// `run` must be a live handle and `w` must hold `len` doubles.
enum DpskgdStatus dpskgd_run_weights(const struct DpskgdRun *run, double *w, uintptr_t len);

// Number of recorded objective values, `T + 1`. Returns 0 for a null handle.
//
// # Safety
// `run` must be a live handle or null.
uintptr_t dpskgd_run_objective_len(const struct DpskgdRun *run);

// Copy `f(w^0), …, f(w^T)` into `values`.
//
// # Safety
// `run` must be a live handle and `values` must hold `len` doubles.
enum DpskgdStatus dpskgd_run_objective(const struct DpskgdRun *run, double *values, uintptr_t len);

// Total gradient coordinates evaluated during the run.
//
// # Safety
// `run` must be a live handle and `count` writable.
enum DpskgdStatus dpskgd_run_coord_evals(const struct DpskgdRun *run, uint64_t *count);

// Per-coordinate noise variance `12 L² K T ln(1/δ) / (n² ε²)` for a single
// Lipschitz constant. Requires `epsilon <= 1` and `delta < 1/3`.
//
// # Safety
// `sigma_sq` must be writable.
enum DpskgdStatus dpskgd_calibrate_noise(double lipschitz,
                                         uint64_t epochs,
                                         uint64_t steps,
                                         uintptr_t n,
                                         double epsilon,
                                         double delta,
                                         double *sigma_sq);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPSKGD_H */
