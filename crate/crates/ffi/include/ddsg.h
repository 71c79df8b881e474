#ifndef DDSG_H
#define DDSG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DdsgStatus {
  DDSG_STATUS_OK = 0,
  DDSG_STATUS_NULL_POINTER = 1,
  DDSG_STATUS_INVALID_ARGUMENT = 2,
  DDSG_STATUS_OUT_OF_DOMAIN = 3,
  DDSG_STATUS_NUMERICAL = 4,
  DDSG_STATUS_SERIALIZATION = 5,
  DDSG_STATUS_PANIC = 6,
} DdsgStatus;

// Why a solve stopped.
typedef enum DdsgStopReason {
  DDSG_STOP_REASON_CONVERGED = 0,
  DDSG_STOP_REASON_EARLY_STOPPED = 1,
  DDSG_STOP_REASON_MAX_ITERS = 2,
} DdsgStopReason;

// Opaque hierarchical sparse grid.
typedef struct DdsgGrid DdsgGrid;

// Opaque IRBC model with its expectation rule.
typedef struct DdsgModel DdsgModel;

// Opaque policy function.
typedef struct DdsgPolicy DdsgPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *ddsg_last_error_message(void);

// Library version as a static nul-terminated string.
const char *ddsg_version(void);

// Release a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library and not yet freed.
void ddsg_string_free(char *s);

// Regular sparse grid of level-sum `depth` on the box `[lower, upper]`.
//
// # Safety
// `lower` and `upper` must point to `dim` doubles; `grid` must be writable.
enum DdsgStatus ddsg_grid_new(size_t dim,
                              size_t depth,
                              size_t num_outputs,
                              const double *lower,
                              const double *upper,
                              struct DdsgGrid **grid);

// # Safety
// `grid` must be null or a live handle from [`ddsg_grid_new`].
void ddsg_grid_free(struct DdsgGrid *grid);

// # Safety
// `grid` must be a live handle; `count` must be writable.
enum DdsgStatus ddsg_grid_num_points(const struct DdsgGrid *grid, size_t *count);

// Write the node coordinates row-major into `points` (`num_points * dim`).
//
// # Safety
// `points` must point to `len` writable doubles.
enum DdsgStatus ddsg_grid_points(const struct DdsgGrid *grid, double *points, size_t len);

// Fit the grid to nodal values, row-major `num_points * num_outputs`.
//
// # Safety
// `grid` must be a live handle; `values` must point to `len` doubles.
enum DdsgStatus ddsg_grid_hierarchize(struct DdsgGrid *grid, const double *values, size_t len);

// Evaluate the interpolant at `x` (`dim` doubles) into `out_values`.
//
// # Safety
// Pointers must cover the stated lengths.
enum DdsgStatus ddsg_grid_interpolate(const struct DdsgGrid *grid,
                                      const double *x,
                                      size_t x_len,
                                      double *out_values,
                                      size_t out_len);

// Integral of the interpolant over the box, one value per output.
//
// # Safety
// `out_values` must point to `out_len` writable doubles.
enum DdsgStatus ddsg_grid_integrate(const struct DdsgGrid *grid,
                                    double *out_values,
                                    size_t out_len);

// IRBC model with `n` countries, default calibration and the monomial rule.
//
// # Safety
// `model` must be writable.
enum DdsgStatus ddsg_model_new(size_t n, struct DdsgModel **model);

// # Safety
// `model` must be null or a live handle from [`ddsg_model_new`].
void ddsg_model_free(struct DdsgModel *model);

// Deterministic steady state: `state` gets `2n` doubles, `policy` `n + 1`.
//
// # Safety
// Buffers must cover the stated lengths.
enum DdsgStatus ddsg_model_steady_state(const struct DdsgModel *model,
                                        double *state,
                                        size_t state_len,
                                        double *policy,
                                        size_t policy_len);

// Solve the model described by a JSON run configuration. The model section
// of the configuration is used; no files are written.
//
// # Safety
// `config_json` must be a nul-terminated string; out-pointers must be
// writable. `iterations` and `stop_reason` may be null.
enum DdsgStatus ddsg_solve(const char *config_json,
                           struct DdsgPolicy **policy,
                           size_t *iterations,
                           enum DdsgStopReason *stop_reason);

// Load a policy from its JSON artifact text.
//
// # Safety
// `json` must be a nul-terminated string; `policy` must be writable.
enum DdsgStatus ddsg_policy_from_json(const char *json, struct DdsgPolicy **policy);

// Serialize a policy; release the string with [`ddsg_string_free`].
//
// # Safety
// `policy` must be a live handle; `json` must be writable.
enum DdsgStatus ddsg_policy_to_json(const struct DdsgPolicy *policy, char **json);

// # Safety
// `policy` must be null or a live policy handle.
void ddsg_policy_free(struct DdsgPolicy *policy);

// Number of stored grid points of a policy.
//
// # Safety
// `policy` must be a live handle; `count` must be writable.
enum DdsgStatus ddsg_policy_num_points(const struct DdsgPolicy *policy, size_t *count);

// Evaluate the policy at `state`, writing `(k'_1..k'_N, lambda)`.
//
// # Safety
// Pointers must cover the stated lengths.
enum DdsgStatus ddsg_policy_evaluate(const struct DdsgPolicy *policy,
                                     const double *state,
                                     size_t state_len,
                                     double *out_values,
                                     size_t out_len);

// Mean and 99.9th percentile of log10 Euler errors along a simulated path.
//
// # Safety
// Handles must be live; `mean_log10` and `p999_log10` must be writable.
enum DdsgStatus ddsg_policy_euler_errors(const struct DdsgPolicy *policy,
                                         const struct DdsgModel *model,
                                         size_t periods,
                                         size_t burn_in,
                                         uint64_t seed,
                                         double *mean_log10,
                                         double *p999_log10);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDSG_H */
