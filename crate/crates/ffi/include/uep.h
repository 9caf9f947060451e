#ifndef UEP_H
#define UEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum UepStatus {
  UEP_STATUS_OK = 0,
  UEP_STATUS_NULL_POINTER = 1,
  UEP_STATUS_INVALID_ARGUMENT = 2,
  UEP_STATUS_INVALID_CHANNEL = 3,
  UEP_STATUS_PARSE = 4,
  UEP_STATUS_IO = 5,
  UEP_STATUS_COMPUTATION = 6,
  UEP_STATUS_PANIC = 7,
} UepStatus;

// Opaque channel handle; create with `uep_dmc_new` or `uep_dmc_load`, release with `uep_dmc_free`.
typedef struct UepDmc UepDmc;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *uep_version(void);

// Message of the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next call into this library on the same thread.
const char *uep_last_error_message(void);

// Builds a channel from a row-major `inputs x outputs` matrix.
//
// # Safety
// `matrix` must point to `inputs * outputs` readable doubles and `out_dmc` must be writable.
enum UepStatus uep_dmc_new(const double *matrix,
                           size_t inputs,
                           size_t outputs,
                           struct UepDmc **out_dmc);

// Loads a channel from a JSON file.
//
// # Safety
// `path` must be a NUL-terminated string and `out_dmc` must be writable.
enum UepStatus uep_dmc_load(const char *path, struct UepDmc **out_dmc);

// Releases a handle; NULL is ignored.
//
// # Safety
// `dmc` must be NULL or a live handle that is not used afterwards.
void uep_dmc_free(struct UepDmc *dmc);

// Input alphabet size, or 0 for NULL.
//
// # Safety
// `dmc` must be NULL or a live handle.
size_t uep_dmc_inputs(const struct UepDmc *dmc);

// Output alphabet size, or 0 for NULL.
//
// # Safety
// `dmc` must be NULL or a live handle.
size_t uep_dmc_outputs(const struct UepDmc *dmc);

// Capacity in nats.
//
// # Safety
// `dmc` must be a live handle and `capacity` writable.
enum UepStatus uep_capacity(const struct UepDmc *dmc, double *capacity);

// Red-alert exponent in nats and its input letter; `letter` may be NULL.
//
// # Safety
// `dmc` must be a live handle, `value` writable, `letter` writable or NULL.
enum UepStatus uep_red_alert(const struct UepDmc *dmc, double *value, size_t *letter);

// `D_max` in nats and its letter pair; `x_a` and `x_d` may be NULL.
//
// # Safety
// `dmc` must be a live handle, `value` writable, `x_a` and `x_d` writable or NULL.
enum UepStatus uep_d_max(const struct UepDmc *dmc, double *value, size_t *x_a, size_t *x_d);

// Lower and upper false-alarm exponents in nats; either pointer may be NULL.
//
// # Safety
// `dmc` must be a live handle; `lower` and `upper` writable or NULL.
enum UepStatus uep_false_alarm(const struct UepDmc *dmc, double *lower, double *upper);

// Sphere-packing exponent at `rate` nats, maximized over inputs when `input` is NULL,
// otherwise at the input law `input[0..inputs]`.
//
// # Safety
// `dmc` must be a live handle, `input` NULL or `uep_dmc_inputs(dmc)` readable doubles,
// and `value` writable.
enum UepStatus uep_sphere_packing(const struct UepDmc *dmc,
                                  double rate,
                                  const double *input,
                                  double *value);

// Exact probability that `x_r^n` produces an output in the radius-`delta` sup-norm
// ball around `P_Y*`; `ln_probability` may be NULL.
//
// # Safety
// `dmc` must be a live handle, `probability` writable, `ln_probability` writable or NULL.
enum UepStatus uep_exact_missed_detection(const struct UepDmc *dmc,
                                          uint64_t n,
                                          double delta,
                                          double *probability,
                                          double *ln_probability);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UEP_H */
