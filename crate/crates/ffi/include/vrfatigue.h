/* C API for the vrfatigue visual-fatigue detection library. */

#ifndef VRFATIGUE_H
#define VRFATIGUE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Classifier architecture selector (mirrors the library's model set).
typedef enum VrfModelKind {
  VRF_MODEL_KIND_EKYT = 0,
  VRF_MODEL_KIND_FCN = 1,
  VRF_MODEL_KIND_INCEPTION = 2,
  VRF_MODEL_KIND_MCDCNN = 3,
  VRF_MODEL_KIND_TCN = 4,
  VRF_MODEL_KIND_TLENET = 5,
} VrfModelKind;

// Status code of every fallible call.
typedef enum VrfStatus {
  // Success; out-parameters are valid.
  VRF_STATUS_OK = 0,
  // A required pointer argument was null.
  VRF_STATUS_NULL_POINTER = 1,
  // An argument was out of range or inconsistent (see `vrf_last_error`).
  VRF_STATUS_INVALID_ARGUMENT = 2,
  // A path or string argument was not valid UTF-8.
  VRF_STATUS_INVALID_UTF8 = 3,
  // File I/O or checkpoint (de)serialization failed.
  VRF_STATUS_IO = 4,
  // The computation could not produce a valid result (degenerate input).
  VRF_STATUS_NUMERIC = 5,
  // An internal panic was caught at the boundary.
  VRF_STATUS_PANIC = 6,
} VrfStatus;

// Opaque model handle.
typedef struct VrfModel VrfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *vrf_version(void);

// Message of the most recent failure on this thread (empty string if the
// last call succeeded). Valid until the next vrfatigue call on this thread.
const char *vrf_last_error(void);

// Builds a freshly initialized classifier for 4-channel windows of
// `input_len` samples, deterministically from `seed`, and writes the handle
// to `out_model`.
//
// # Safety
// `out_model` must be a valid pointer to writable storage.
enum VrfStatus vrf_model_build(enum VrfModelKind kind,
                               size_t input_len,
                               uint64_t seed,
                               struct VrfModel **out_model);

// Loads a model checkpoint written by the library (or by
// [`vrf_model_save`]) and writes the handle to `out_model`.
//
// # Safety
// `path` must be a NUL-terminated string; `out_model` must be writable.
enum VrfStatus vrf_model_load(const char *path, struct VrfModel **out_model);

// Saves a model as a checkpoint file with f64 payloads.
//
// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum VrfStatus vrf_model_save(const struct VrfModel *model, const char *path);

// Total trainable parameter count, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uint64_t vrf_model_param_count(const struct VrfModel *model);

// Expected input length in samples (window length × 250 Hz), or 0 for a
// null handle.
//
// # Safety
// `model` must be null or a live handle.
uint64_t vrf_model_input_len(const struct VrfModel *model);

// Runs inference on a batch of windows and writes one fatigue probability
// per window to `out_probs`.
//
// `input` holds `batch × channels × len` f64 values in row-major order
// (window-major, then channel, then time); `channels` must be 4 and `len`
// must equal the model's input length. `out_probs` must hold `batch`
// values.
//
// # Safety
// `model` must be a live handle; `input` and `out_probs` must point to
// buffers of the stated sizes.
enum VrfStatus vrf_model_predict(struct VrfModel *model,
                                 const double *input,
                                 size_t batch,
                                 size_t channels,
                                 size_t len,
                                 double *out_probs);

// Releases a model handle; null is a no-op.
//
// # Safety
// `model` must be null or a handle not freed before.
void vrf_model_free(struct VrfModel *model);

// Two-sided paired t-test of two equally sized samples (tests mean(a − b)).
// Writes the statistic, p-value, and degrees of freedom.
//
// # Safety
// `a` and `b` must hold `n` values; the out-pointers must be writable.
enum VrfStatus vrf_paired_t(const double *a,
                            const double *b,
                            size_t n,
                            double *out_t,
                            double *out_p,
                            double *out_df);

// Two-sided two-sample t-test; Welch by default, pooled-variance Student
// form when `equal_var` is true. The statistic's sign follows mean(a) −
// mean(b).
//
// # Safety
// `a` must hold `n_a` values and `b` `n_b`; the out-pointers must be
// writable.
enum VrfStatus vrf_two_sample_t(const double *a,
                                size_t n_a,
                                const double *b,
                                size_t n_b,
                                bool equal_var,
                                double *out_t,
                                double *out_p,
                                double *out_df);

// Area under the ROC curve of `scores` against binary `labels`
// (non-zero = positive class). Ties share credit; a single-class label set
// yields 0.5.
//
// # Safety
// `scores` and `labels` must hold `n` values; `out_auc` must be writable.
enum VrfStatus vrf_auc(const double *scores, const uint8_t *labels, size_t n, double *out_auc);

// Converts a 3D gaze direction to (horizontal, vertical) angles in degrees
// of visual angle; fails on the zero vector.
//
// # Safety
// `out_h` and `out_v` must be writable.
enum VrfStatus vrf_vector_to_angles(double x, double y, double z, double *out_h, double *out_v);

// Converts (horizontal, vertical) degrees of visual angle back to a unit
// 3D gaze direction.
//
// # Safety
// `out_x`, `out_y`, and `out_z` must be writable.
enum VrfStatus vrf_angles_to_vector(double theta_h,
                                    double theta_v,
                                    double *out_x,
                                    double *out_y,
                                    double *out_z);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VRFATIGUE_H */
