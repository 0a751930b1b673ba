#ifndef DRIFTGP_H
#define DRIFTGP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum DgpStatus {
  DGP_STATUS_OK = 0,
  DGP_STATUS_NULL_POINTER = 1,
  DGP_STATUS_INVALID_INPUT = 2,
  DGP_STATUS_DIMENSION_MISMATCH = 3,
  DGP_STATUS_FACTORIZATION_FAILURE = 4,
  DGP_STATUS_SINGULAR_INNOVATION = 5,
  DGP_STATUS_MISSION_ABORTED = 6,
  DGP_STATUS_PARSE = 7,
  DGP_STATUS_IO = 8,
  DGP_STATUS_CONFIG = 9,
  DGP_STATUS_INTERNAL = 10,
} DgpStatus;

// Kernel selector passed as `uint32_t`.
typedef enum DgpKernel {
  DGP_KERNEL_INCOMPRESSIBLE = 0,
  DGP_KERNEL_STANDARD = 1,
} DgpKernel;

// Opaque GP model.
typedef struct DgpModel DgpModel;

// Hyperparameters shared by the kernel and the drift likelihood.
typedef struct DgpHyper {
  double lengthscale_m;
  double current_variance;
  double gps_noise_std_m;
} DgpHyper;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *dgp_last_error_message(void);

// Creates an empty model. `target_noise_var` is the variance attached to
// each added target, m²/s².
//
// # Safety
// `hyper_params` and `out` must be valid pointers.
enum DgpStatus dgp_model_new(const struct DgpHyper *hyper_params,
                             uint32_t kernel,
                             double target_noise_var,
                             struct DgpModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from this library and not be used afterwards.
void dgp_model_free(struct DgpModel *model);

// Number of targets held by the model, or 0 for null.
//
// # Safety
// `model` must be null or a live handle.
size_t dgp_model_len(const struct DgpModel *model);

// Appends `n` targets. On failure the model is unchanged.
//
// # Safety
// `model` must be a live handle; `positions` and `currents` must each hold
// `2n` doubles.
enum DgpStatus dgp_model_add_targets(struct DgpModel *model,
                                     const double *positions,
                                     const double *currents,
                                     size_t n);

// Posterior mean (`2n` doubles) and, if `cov_out` is not null, the 2×2
// marginal covariance per query (`4n` doubles, row-major).
//
// # Safety
// `queries` must hold `2n` doubles, `mean_out` room for `2n`, and
// `cov_out` null or room for `4n`.
enum DgpStatus dgp_model_predict(const struct DgpModel *model,
                                 const double *queries,
                                 size_t n,
                                 double *mean_out,
                                 double *cov_out);

// Serializes the model to JSON. Free the string with [`dgp_string_free`].
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum DgpStatus dgp_model_to_json(const struct DgpModel *model, char **out);

// Rebuilds a model from [`dgp_model_to_json`] output.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum DgpStatus dgp_model_from_json(const char *json, struct DgpModel **out);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void dgp_string_free(char *s);

// 2×2 kernel block between `x` and `xp` (each 2 doubles), row-major into
// `out` (4 doubles).
//
// # Safety
// All pointers must be valid for the stated lengths.
enum DgpStatus dgp_eval_kernel(const struct DgpHyper *hyper_params,
                               uint32_t kernel,
                               const double *x,
                               const double *xp,
                               double *out);

// Runs the estimator over a JSON Lines cycle log with default EM settings
// and returns the final model. `failed_cycles`, if not null, receives the
// number of cycles that could not be processed.
//
// # Safety
// `path` must be a NUL-terminated string; `hyper_params` and `out` valid pointers.
enum DgpStatus dgp_process_mission_file(const char *path,
                                        const struct DgpHyper *hyper_params,
                                        uint32_t kernel,
                                        struct DgpModel **out,
                                        size_t *failed_cycles);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRIFTGP_H */
