#ifndef DYNMMSBM_H
#define DYNMMSBM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_ARGUMENT = 2,
  DM_STATUS_IO = 3,
  DM_STATUS_PARSE = 4,
  DM_STATUS_NUMERICAL = 5,
  DM_STATUS_MODEL = 6,
  DM_STATUS_BUFFER_TOO_SMALL = 7,
  DM_STATUS_PANIC = 8,
} DmStatus;

// A fitted model.
typedef struct DmModel DmModel;

// A dynamic network.
typedef struct DmNetwork DmNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *dm_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dm_version(void);

// Loads a network from CSV files. `monadic` and `dyadic` may be null.
//
// # Safety
// String arguments must be null or NUL-terminated; `out` must be writable.
enum DmStatus dm_network_load(const char *edges,
                              const char *monadic,
                              const char *dyadic,
                              int directed,
                              int dense,
                              struct DmNetwork **out);

// Draws a network from the `easy`, `medium` or `hard` preset. When
// `truth_required` is non-null, the true memberships (slots x K,
// row-major) are written to `truth_pi` following the array-output
// convention.
//
// # Safety
// `preset` must be NUL-terminated; pointers must be valid for their lengths.
enum DmStatus dm_network_simulate(const char *preset,
                                  uint64_t seed,
                                  struct DmNetwork **out,
                                  double *truth_pi,
                                  size_t truth_len,
                                  size_t *truth_required);

// # Safety
// `net` must be null or a handle from this library, not yet freed.
void dm_network_free(struct DmNetwork *net);

// Writes the node, period and modeled-dyad counts.
//
// # Safety
// `net` must be a live handle; output pointers must be writable.
enum DmStatus dm_network_shape(const struct DmNetwork *net,
                               size_t *n_nodes,
                               size_t *n_periods,
                               size_t *n_dyads);

// Fits by batch variational EM from the spectral initialization. A zero
// `max_iter` or non-positive `tol` selects the default.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DmStatus dm_fit_vem(const struct DmNetwork *net,
                         size_t k,
                         size_t m,
                         uint64_t seed,
                         size_t max_iter,
                         double tol,
                         struct DmModel **out);

// Fits by stochastic variational inference with `batch_nodes` nodes per
// period per step and a `holdout` fraction of dyads for stopping.
//
// # Safety
// `net` must be a live handle; `out` must be writable.
enum DmStatus dm_fit_svi(const struct DmNetwork *net,
                         size_t k,
                         size_t m,
                         uint64_t seed,
                         size_t batch_nodes,
                         double holdout,
                         struct DmModel **out);

// # Safety
// `path` must be NUL-terminated; `out` must be writable.
enum DmStatus dm_model_load(const char *path, struct DmModel **out);

// # Safety
// `model` must be a live handle; `path` must be NUL-terminated.
enum DmStatus dm_model_save(const struct DmModel *model, const char *path);

// # Safety
// `model` must be null or a handle from this library, not yet freed.
void dm_model_free(struct DmModel *model);

// Writes K, M, the iteration count, whether the fit converged and its
// final lower bound.
//
// # Safety
// `model` must be a live handle; output pointers must be writable.
enum DmStatus dm_model_summary(const struct DmModel *model,
                               size_t *k,
                               size_t *m,
                               size_t *iterations,
                               int *converged,
                               double *lower_bound);

// Edge probabilities between groups (K x K, row-major, sender rows).
//
// # Safety
// `model` must be a live handle; `out` must hold `len` values or be null.
enum DmStatus dm_model_blockmodel(const struct DmModel *model,
                                  double *out,
                                  size_t len,
                                  size_t *required);

// Posterior-mean memberships per node-period slot (slots x K, row-major;
// slots are ordered by period, then node).
//
// # Safety
// `model` must be a live handle; `out` must hold `len` values or be null.
enum DmStatus dm_model_memberships(const struct DmModel *model,
                                   double *out,
                                   size_t len,
                                   size_t *required);

// State probabilities per period (T x M, row-major).
//
// # Safety
// `model` must be a live handle; `out` must hold `len` values or be null.
enum DmStatus dm_model_state_probs(const struct DmModel *model,
                                   double *out,
                                   size_t len,
                                   size_t *required);

// Fitted edge probability of every modeled dyad of `net`, which must be
// the network the model was fitted on.
//
// # Safety
// Handles must be live; `out` must hold `len` values or be null.
enum DmStatus dm_model_predict(const struct DmModel *model,
                               const struct DmNetwork *net,
                               double *out,
                               size_t len,
                               size_t *required);

// Area under the ROC curve with its DeLong standard error. `labels` holds
// 0 or 1 per case.
//
// # Safety
// `scores` and `labels` must hold `n` values; outputs must be writable.
enum DmStatus dm_auroc(const double *scores,
                       const uint8_t *labels,
                       size_t n,
                       double *value,
                       double *sd);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNMMSBM_H */
