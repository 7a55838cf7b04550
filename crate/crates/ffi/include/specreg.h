#ifndef SPECREG_H
#define SPECREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum {
  SPECREG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SPECREG_STATUS_NULL_POINTER = 1,
  SPECREG_STATUS_DOMAIN = 2,
  SPECREG_STATUS_RANGE = 3,
  SPECREG_STATUS_MODEL = 4,
  SPECREG_STATUS_CONFIG = 5,
  /**
   * A statistical precondition failed (for example n too small for γ(n)).
   */
  SPECREG_STATUS_PRECONDITION = 6,
  SPECREG_STATUS_PARSE = 7,
  SPECREG_STATUS_IO = 8,
  /**
   * A requested value is not available for this handle.
   */
  SPECREG_STATUS_UNAVAILABLE = 9,
  /**
   * An internal panic was caught at the boundary.
   */
  SPECREG_STATUS_PANIC = 10,
} SpecregStatus;

/**
 * Reciprocal kernel spectrum w(k).
 */
typedef struct SpecregKernel SpecregKernel;

/**
 * Noisy samples y(i/n), i = 1..n.
 */
typedef struct SpecregObservations SpecregObservations;

/**
 * A selected truncation with its estimate of f.
 */
typedef struct SpecregSelection SpecregSelection;

/**
 * Optional overrides for the penalized rule; a `has_*` flag of 0 leaves the
 * default in place.
 */
typedef struct {
  bool has_gamma_override;
  double gamma_override;
  bool has_coefficient_override;
  double coefficient_override;
  bool has_big_gamma;
  double big_gamma;
  bool accept_empirical_big_gamma;
} SpecregPenaltyOptions;

/**
 * Energy estimate H(n,f) and its companions.
 */
typedef struct {
  double h_hat;
  double anti_penalty;
  double b_norm_sq_hat;
  double sigma_used;
  size_t m_used;
  size_t n;
} SpecregEnergy;

/**
 * A closed interval [lower, upper].
 */
typedef struct {
  double lower;
  double upper;
} SpecregInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call into the library on the same thread.
 */
const char *specreg_last_error_message(void);

/**
 * Static name of a status code.
 */
const char *specreg_status_name(SpecregStatus status);

/**
 * Copies `n` samples y[i−1] = y(i/n) into a new handle.
 *
 * # Safety
 * `y` must point to `n` readable doubles; `out` must be writable.
 */
SpecregStatus specreg_observations_new(const double *y, size_t n, SpecregObservations **out);

/**
 * # Safety
 * `obs` must come from [`specreg_observations_new`] or be null.
 */
void specreg_observations_free(SpecregObservations *obs);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `obs` must be a live handle or null.
 */
size_t specreg_observations_len(const SpecregObservations *obs);

/**
 * Residual estimate of σ with preliminary truncation `pre_n` (0 selects
 * Ent(n^{1/3})).
 *
 * # Safety
 * `obs` must be a live handle; `out` must be writable.
 */
SpecregStatus specreg_estimate_sigma(const SpecregObservations *obs, size_t pre_n, double *out);

/**
 * w(k) = scale · max(⌊k/2⌋, 1)^θ.
 *
 * # Safety
 * `out` must be writable.
 */
SpecregStatus specreg_kernel_power_law(double theta, double scale, SpecregKernel **out);

/**
 * w(k) = 1.
 *
 * # Safety
 * `out` must be writable.
 */
SpecregStatus specreg_kernel_identity(SpecregKernel **out);

/**
 * Explicit weights w(1..=len).
 *
 * # Safety
 * `values` must point to `len` readable doubles; `out` must be writable.
 */
SpecregStatus specreg_kernel_explicit(const double *values, size_t len, SpecregKernel **out);

/**
 * # Safety
 * `kernel` must come from a `specreg_kernel_*` constructor or be null.
 */
void specreg_kernel_free(SpecregKernel *kernel);

/**
 * Adaptive truncation M(n).
 *
 * # Safety
 * `obs` and `kernel` must be live handles; `out` must be writable.
 */
SpecregStatus specreg_select_adaptive(const SpecregObservations *obs,
                                      const SpecregKernel *kernel,
                                      SpecregSelection **out);

/**
 * Penalized truncation M₁(n) with known noise scale `sigma`; `options` may
 * be null.
 *
 * # Safety
 * `obs` and `kernel` must be live handles; `options` must be null or
 * readable; `out` must be writable.
 */
SpecregStatus specreg_select_penalized(const SpecregObservations *obs,
                                       const SpecregKernel *kernel,
                                       double sigma,
                                       const SpecregPenaltyOptions *options,
                                       SpecregSelection **out);

/**
 * # Safety
 * `sel` must come from a `specreg_select_*` function or be null.
 */
void specreg_selection_free(SpecregSelection *sel);

/**
 * Selected truncation (M or M₁), or 0 for a null handle.
 *
 * # Safety
 * `sel` must be a live handle or null.
 */
size_t specreg_selection_truncation(const SpecregSelection *sel);

/**
 * Minimum of the curve the truncation was chosen from (τ* or τ₁*), or NaN.
 *
 * # Safety
 * `sel` must be a live handle or null.
 */
double specreg_selection_tau_star(const SpecregSelection *sel);

/**
 * Whether the penalty coefficient was clamped at 0.
 *
 * # Safety
 * `sel` must be a live handle or null.
 */
bool specreg_selection_clamped(const SpecregSelection *sel);

/**
 * Raw γ(n) of a penalized selection; `Unavailable` otherwise.
 *
 * # Safety
 * `sel` must be a live handle; `out` must be writable.
 */
SpecregStatus specreg_selection_gamma_hat(const SpecregSelection *sel, double *out);

/**
 * Copies up to `cap` estimate coefficients c(k,n)w(k) into `buf` and stores
 * the full count in `len`.
 *
 * # Safety
 * `sel` must be a live handle; `buf` must have room for `cap` doubles (may
 * be null when `cap` is 0); `len` must be writable.
 */
SpecregStatus specreg_selection_coefficients(const SpecregSelection *sel,
                                             double *buf,
                                             size_t cap,
                                             size_t *len);

/**
 * Evaluates the estimate of f at `t`.
 *
 * # Safety
 * `sel` must be a live handle; `out` must be writable.
 */
SpecregStatus specreg_selection_eval(const SpecregSelection *sel, double t, double *out);

/**
 * Energy estimate at the selection's truncation.
 *
 * # Safety
 * All handles must be live; `out` must be writable.
 */
SpecregStatus specreg_energy(const SpecregObservations *obs,
                             const SpecregKernel *kernel,
                             const SpecregSelection *sel,
                             double sigma,
                             SpecregEnergy *out);

/**
 * Two-sided asymptotic interval for the energy at `level`.
 *
 * # Safety
 * `energy` must be readable; `out` must be writable.
 */
SpecregStatus specreg_energy_ci(const SpecregEnergy *energy, double level, SpecregInterval *out);

/**
 * Interval for ‖f̃ − f‖² from a penalized selection.
 *
 * # Safety
 * `sel` must be a live handle; `out` must be writable.
 */
SpecregStatus specreg_function_ci(const SpecregSelection *sel,
                                  double sigma,
                                  double level,
                                  SpecregInterval *out);

/**
 * Library version as a static string.
 */
const char *specreg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECREG_H */
