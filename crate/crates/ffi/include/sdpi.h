/* C ABI for the sdpi contraction-coefficient toolkit. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible call.
typedef enum SdpiStatus {
  SdpiStatus_Ok = 0,
  SdpiStatus_NullPointer = 1,
  SdpiStatus_InvalidArgument = 2,
  SdpiStatus_ParseError = 3,
  SdpiStatus_ComputeFailed = 4,
} SdpiStatus;

// Opaque handle: an input pmf plus a column-stochastic channel.
typedef struct SdpiChannel SdpiChannel;

// Opaque handle: an f-divergence generator.
typedef struct SdpiGenerator SdpiGenerator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the thread's last error message into `buf` (truncated to
// `len - 1` bytes, always NUL-terminated) and returns the full message
// length in bytes. `buf` may be NULL to query the length.
//
// # Safety
// `buf`, when non-NULL, must point to at least `len` writable bytes.
size_t sdpi_last_error(char *buf, size_t len);

// Builds a channel handle from a builtin spec string:
// `bsc:<p>`, `bec:<beta>:<q>`, or `dsbs:<alpha>`.
//
// # Safety
// `spec` must be a NUL-terminated string; `out` must be a valid pointer.
enum SdpiStatus sdpi_channel_from_builtin(const char *spec, struct SdpiChannel **out);

// Builds a channel handle from the JSON schema
// `{"p_x": [...], "W": [[row-major rows]]}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be a valid pointer.
enum SdpiStatus sdpi_channel_from_json(const char *json, struct SdpiChannel **out);

// Releases a channel handle. NULL is a no-op.
//
// # Safety
// `channel` must have been returned by a `sdpi_channel_from_*` call and
// not freed before.
void sdpi_channel_free(struct SdpiChannel *channel);

// Input alphabet size, or 0 for NULL.
//
// # Safety
// `channel` must be a live handle or NULL.
size_t sdpi_channel_input_dim(const struct SdpiChannel *channel);

// Output alphabet size, or 0 for NULL.
//
// # Safety
// `channel` must be a live handle or NULL.
size_t sdpi_channel_output_dim(const struct SdpiChannel *channel);

// Contraction coefficient for chi-squared divergence: the squared second
// singular value of the divergence transition matrix.
//
// # Safety
// `channel` must be a live handle; `out` must be a valid pointer.
enum SdpiStatus sdpi_eta_chi2(const struct SdpiChannel *channel, double *out);

// Builds a generator handle by name: `kl`, `chi2`, `tv`, or
// `tsallis:<alpha>`.
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be a valid pointer.
enum SdpiStatus sdpi_generator_from_name(const char *name, struct SdpiGenerator **out);

// Builds a user-defined generator from an evaluation callback plus its
// declared limits and derivatives at unity. Pass NaN for an unknown
// third derivative (it is only needed by the generalized-Pinsker checks).
// Declared derivatives are validated against finite differences; a
// mismatch yields `InvalidArgument`.
//
// # Safety
// `eval` must be callable with any `t > 0` from any thread for the life
// of the handle, and `user_data` must stay valid that long. `name` must
// be NUL-terminated; `out` must be a valid pointer.
enum SdpiStatus sdpi_generator_custom(const char *name,
                                      double (*eval)(double, void*),
                                      void *user_data,
                                      double f_at_zero,
                                      double perspective_at_zero,
                                      double d1_at_one,
                                      double d2_at_one,
                                      double d3_at_one,
                                      struct SdpiGenerator **out);

// Releases a generator handle. NULL is a no-op.
//
// # Safety
// `generator` must have been returned by a `sdpi_generator_*` call and
// not freed before.
void sdpi_generator_free(struct SdpiGenerator *generator);

// `D_f(R || P)` for pmfs given as arrays of length `len`. Infinite
// divergences yield `out_value = INFINITY` with `out_finite = false` and
// status `Ok`.
//
// # Safety
// `r` and `p` must point to `len` readable doubles; `out_value` and
// `out_finite` must be valid pointers.
enum SdpiStatus sdpi_f_divergence(const struct SdpiGenerator *generator,
                                  const double *r,
                                  const double *p,
                                  size_t len,
                                  double *out_value,
                                  bool *out_finite);

// Multistart lower estimate of `eta_f`. `restarts = 0` keeps the default
// budget.
//
// # Safety
// `generator` and `channel` must be live handles; `out` must be a valid
// pointer.
enum SdpiStatus sdpi_estimate_eta(const struct SdpiGenerator *generator,
                                  const struct SdpiChannel *channel,
                                  uint64_t seed,
                                  uint32_t restarts,
                                  double *out);

// Full bound certification; on success writes a NUL-terminated JSON
// report (release with [`sdpi_string_free`]).
//
// # Safety
// `generator` and `channel` must be live handles; `out_json` must be a
// valid pointer.
enum SdpiStatus sdpi_certify_json(const struct SdpiGenerator *generator,
                                  const struct SdpiChannel *channel,
                                  uint64_t seed,
                                  uint32_t restarts,
                                  char **out_json);

// Releases a string returned by this library. NULL is a no-op.
//
// # Safety
// `s` must have been returned by this library and not freed before.
void sdpi_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
