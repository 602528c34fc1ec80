#ifndef GGM_H
#define GGM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GgmStatus {
  GGM_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or a too-small output buffer.
  GGM_STATUS_INVALID_ARGUMENT = 1,
  // Input rejected by the library (bad parameters, malformed JSON, ...).
  GGM_STATUS_VALIDATION = 2,
  // A numerical routine failed (not positive definite, no convergence, ...).
  GGM_STATUS_NUMERICAL = 3,
  // Internal panic; the handle arguments should be considered unusable.
  GGM_STATUS_PANIC = 4,
} GgmStatus;

// A learned precision matrix and edge set.
typedef struct GgmEstimate GgmEstimate;

// A Gaussian graphical model.
typedef struct GgmModel GgmModel;

// An `m × n` sample matrix.
typedef struct GgmSamples GgmSamples;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *ggm_last_error(void);

// Library version as a static string.
const char *ggm_version(void);

// Parses a model file (the JSON written by `ggm gen`).
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer.
enum GgmStatus ggm_model_from_json(const char *json, struct GgmModel **out);

// Builds a model from a generator spec such as
// `{"family": "path_cliques", "n": 64, "d": 4, "rho": 0.95, "standardize": true}`.
//
// # Safety
// `spec_json` must be a nul-terminated string and `out` a valid pointer.
enum GgmStatus ggm_model_generate(const char *spec_json, struct GgmModel **out);

// Builds a model from an `n × n` precision matrix.
//
// # Safety
// `theta` must point to `n * n` doubles and `out` must be valid.
enum GgmStatus ggm_model_from_precision(size_t n, const double *theta, struct GgmModel **out);

// Builds a model from an `n × n` covariance matrix.
//
// # Safety
// `sigma` must point to `n * n` doubles and `out` must be valid.
enum GgmStatus ggm_model_from_covariance(size_t n, const double *sigma, struct GgmModel **out);

// Number of variables, 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t ggm_model_dim(const struct GgmModel *model);

// κ of the model through `out`; `Validation` when the model has no edges.
//
// # Safety
// `model` must be a live handle and `out` valid.
enum GgmStatus ggm_model_kappa(const struct GgmModel *model, double *out);

// Copies the precision matrix into `buf` (`n * n` doubles).
//
// # Safety
// `model` must be a live handle and `buf` must hold `cap` doubles.
enum GgmStatus ggm_model_precision(const struct GgmModel *model, double *buf, size_t cap);

// Copies the covariance matrix into `buf` (`n * n` doubles).
//
// # Safety
// `model` must be a live handle and `buf` must hold `cap` doubles.
enum GgmStatus ggm_model_covariance(const struct GgmModel *model, double *buf, size_t cap);

// Serializes the model in the model-file format. Release the string with
// [`ggm_string_free`].
//
// # Safety
// `model` must be a live handle and `out` valid.
enum GgmStatus ggm_model_to_json(const struct GgmModel *model, char **out);

// # Safety
// `model` must be null or a handle not yet freed.
void ggm_model_free(struct GgmModel *model);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void ggm_string_free(char *s);

// Draws `m` samples with the given seed.
//
// # Safety
// `model` must be a live handle and `out` valid.
enum GgmStatus ggm_sample(const struct GgmModel *model,
                          size_t m,
                          uint64_t seed,
                          struct GgmSamples **out);

// Wraps caller data (`m × n`, row-major).
//
// # Safety
// `data` must point to `m * n` doubles and `out` must be valid.
enum GgmStatus ggm_samples_from_data(size_t m,
                                     size_t n,
                                     const double *data,
                                     struct GgmSamples **out);

// Writes the row and column counts.
//
// # Safety
// `samples` must be a live handle; `m` and `n` valid pointers.
enum GgmStatus ggm_samples_shape(const struct GgmSamples *samples, size_t *m, size_t *n);

// Copies the data (row-major, `m * n` doubles) into `buf`.
//
// # Safety
// `samples` must be a live handle and `buf` must hold `cap` doubles.
enum GgmStatus ggm_samples_data(const struct GgmSamples *samples, double *buf, size_t cap);

// # Safety
// `samples` must be null or a handle not yet freed.
void ggm_samples_free(struct GgmSamples *samples);

// Learns from samples. `algorithm` is `greedy`, `search_and_validate` or
// `hybrid`; `config_json` (nullable) holds learner parameters such as
// `{"kappa": 0.3, "d": 4}` or `{"nu": 0.01, "t_steps": 6}`.
//
// # Safety
// `samples` must be a live handle, the strings nul-terminated (or null for
// `config_json`) and `out` valid.
enum GgmStatus ggm_learn_samples(const struct GgmSamples *samples,
                                 const char *algorithm,
                                 const char *config_json,
                                 struct GgmEstimate **out);

// Learns from the model's exact covariance. Unset `kappa` and `d` in the
// config default to the model's own values.
//
// # Safety
// As for [`ggm_learn_samples`], with `model` a live handle.
enum GgmStatus ggm_learn_population(const struct GgmModel *model,
                                    const char *algorithm,
                                    const char *config_json,
                                    struct GgmEstimate **out);

// # Safety
// `est` must be null or a live handle.
size_t ggm_estimate_dim(const struct GgmEstimate *est);

// # Safety
// `est` must be null or a live handle.
size_t ggm_estimate_edge_count(const struct GgmEstimate *est);

// Copies the edges as `(i, j)` pairs with `i < j` into `buf`
// (`2 * edge_count` entries).
//
// # Safety
// `est` must be a live handle and `buf` must hold `cap` values.
enum GgmStatus ggm_estimate_edges(const struct GgmEstimate *est, size_t *buf, size_t cap);

// Copies the estimated precision matrix (`n * n` doubles) into `buf`.
//
// # Safety
// `est` must be a live handle and `buf` must hold `cap` doubles.
enum GgmStatus ggm_estimate_precision(const struct GgmEstimate *est, double *buf, size_t cap);

// Incorrect edges per node after thresholding the estimate at `kappa / 2`.
//
// # Safety
// `est` and `truth` must be live handles and `out` valid.
enum GgmStatus ggm_structure_error(const struct GgmEstimate *est,
                                   const struct GgmModel *truth,
                                   double kappa,
                                   double *out);

// # Safety
// `est` must be null or a handle not yet freed.
void ggm_estimate_free(struct GgmEstimate *est);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GGM_H */
