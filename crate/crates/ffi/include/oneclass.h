#ifndef ONECLASS_H
#define ONECLASS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OcDescriptor {
  OC_DESCRIPTOR_NND = 0,
  OC_DESCRIPTOR_LNND = 1,
  OC_DESCRIPTOR_LOF = 2,
  OC_DESCRIPTOR_ALP = 3,
  OC_DESCRIPTOR_SVM = 4,
} OcDescriptor;

typedef enum OcStatus {
  OC_STATUS_OK = 0,
  OC_STATUS_NULL_POINTER = 1,
  OC_STATUS_INVALID_ARGUMENT = 2,
  OC_STATUS_INSUFFICIENT_DATA = 3,
  OC_STATUS_NOT_CONVERGED = 4,
  OC_STATUS_CALLBACK_FAILED = 5,
  OC_STATUS_INTERNAL = 6,
} OcStatus;

typedef enum OcOptimiser {
  OC_OPTIMISER_RANDOM = 0,
  OC_OPTIMISER_HOOKE_JEEVES = 1,
  OC_OPTIMISER_NELDER_MEAD = 2,
  OC_OPTIMISER_TPE = 3,
  OC_OPTIMISER_MALHERBE_POWELL = 4,
} OcOptimiser;

/**
 * Opaque fitted descriptor.
 */
typedef struct OcModel OcModel;

/**
 * Budget and seed for a search. Zero caps select the library defaults.
 */
typedef struct OcBudget {
  size_t max_evaluations;
  size_t max_proposals;
  uint64_t seed;
} OcBudget;

/**
 * Objective to maximise over `[0, 1]^dim`. A non-finite return aborts the search.
 */
typedef double (*OcObjectiveFn)(const double *coords, size_t dim, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *oc_last_error_message(void);

/**
 * Number of hyperparameters `descriptor` takes: 1, or 2 for ALP and SVM.
 */
size_t oc_param_count(enum OcDescriptor descriptor);

/**
 * Default hyperparameters for `n_targets` instances in `features` dimensions.
 * `out_params` must hold `oc_param_count(descriptor)` values.
 *
 * # Safety
 * `out_params` must be valid for that many writes.
 */
enum OcStatus oc_default_params(enum OcDescriptor descriptor,
                                size_t n_targets,
                                size_t features,
                                double *out_params);

/**
 * Fits `descriptor` with explicit hyperparameters on a target-only matrix.
 * Integer hyperparameters are passed as whole-valued doubles.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles, `params` `n_params` doubles, and
 * `out_model` must be writable. Release the model with [`oc_model_free`].
 */
enum OcStatus oc_model_fit(enum OcDescriptor descriptor,
                           const double *params,
                           size_t n_params,
                           const double *data,
                           size_t rows,
                           size_t cols,
                           struct OcModel **out_model);

/**
 * Searches the hyperparameters of `descriptor` against the validation AUROC on
 * labelled training data, then fits the winner on the targets.
 * `is_target` holds one byte per row, nonzero for the target class.
 *
 * # Safety
 * `data` must hold `rows * cols` doubles and `is_target` `rows` bytes.
 * `out_model` must be writable; `out_validation_auroc` may be NULL.
 */
enum OcStatus oc_tune(enum OcDescriptor descriptor,
                      enum OcOptimiser optimiser,
                      const double *data,
                      size_t rows,
                      size_t cols,
                      const uint8_t *is_target,
                      struct OcBudget budget,
                      struct OcModel **out_model,
                      double *out_validation_auroc);

/**
 * Scores `rows` queries; larger means more target-like.
 *
 * # Safety
 * `model` must come from this library, `queries` must hold `rows * cols`
 * doubles and `out_scores` room for `rows` doubles.
 */
enum OcStatus oc_model_score(const struct OcModel *model,
                             const double *queries,
                             size_t rows,
                             size_t cols,
                             double *out_scores);

/**
 * Copies the fitted hyperparameters into `out_params`, which must hold
 * `oc_param_count` values for the model's descriptor.
 *
 * # Safety
 * `model` must come from this library and `out_params` be writable.
 */
enum OcStatus oc_model_params(const struct OcModel *model, double *out_params);

/**
 * Serialises the fitted state as JSON. Free the string with [`oc_string_free`].
 *
 * # Safety
 * `model` must come from this library and `out_json` be writable.
 */
enum OcStatus oc_model_to_json(const struct OcModel *model, char **out_json);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void oc_model_free(struct OcModel *model);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library not yet freed.
 */
void oc_string_free(char *s);

/**
 * Area under the ROC curve of target versus non-target scores, ties counted half.
 *
 * # Safety
 * `targets` must hold `n_targets` doubles and `others` `n_others`.
 */
enum OcStatus oc_auroc(const double *targets,
                       size_t n_targets,
                       const double *others,
                       size_t n_others,
                       double *out_auroc);

/**
 * Maximises a caller-supplied function over `[0, 1]^dim`. `start` (`dim`
 * values) seeds the local optimisers and may be NULL for the box centre.
 * `out_best` receives `dim` coordinates.
 *
 * # Safety
 * `objective` must be safe to call with `user_data` from this thread;
 * the pointers must be valid for the stated lengths.
 */
enum OcStatus oc_optimize(enum OcOptimiser optimiser,
                          size_t dim,
                          OcObjectiveFn objective,
                          void *user_data,
                          const double *start,
                          struct OcBudget budget,
                          double *out_best,
                          double *out_value,
                          size_t *out_evaluations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ONECLASS_H */
