#ifndef BIASKIT_H
#define BIASKIT_H

#include <stddef.h>
#include <stdint.h>

typedef enum BiaskitStatus {
  BIASKIT_STATUS_OK = 0,
  // Null pointer, non-UTF-8 string, or a buffer of the wrong length.
  BIASKIT_STATUS_INVALID_ARGUMENT = 1,
  // Input rejected by validation (bad CSV, schema, parameters, ...).
  BIASKIT_STATUS_VALIDATION = 2,
  // A file could not be read or written.
  BIASKIT_STATUS_IO = 3,
  // A panic was caught at the boundary.
  BIASKIT_STATUS_INTERNAL = 4,
} BiaskitStatus;

typedef enum BiaskitResampleMethod {
  BIASKIT_RESAMPLE_METHOD_UNDERSAMPLE = 0,
  BIASKIT_RESAMPLE_METHOD_OVERSAMPLE = 1,
  // Oversample every class to the majority count with SMOTE.
  BIASKIT_RESAMPLE_METHOD_SMOTE = 2,
} BiaskitResampleMethod;

// Opaque dataset handle.
typedef struct BiaskitDataset BiaskitDataset;

// Decision-tree hyperparameters; see [`biaskit_tree_params_default`].
typedef struct BiaskitTreeParams {
  size_t max_depth;
  size_t min_samples_split;
  double min_impurity_decrease;
} BiaskitTreeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the thread's next call into this library.
const char *biaskit_last_error(void);

// # Safety
// `s` is null or a string returned by this library and not yet freed.
void biaskit_string_free(char *s);

struct BiaskitTreeParams biaskit_tree_params_default(void);

// Loads a CSV file against a schema given as JSON text.
//
// # Safety
// `path` and `schema_json` are NUL-terminated strings; `out` is valid for a
// write.
enum BiaskitStatus biaskit_dataset_load_csv(const char *path,
                                            const char *schema_json,
                                            struct BiaskitDataset **out);

// Loads an IDX image/label file pair.
//
// # Safety
// `images_path` and `labels_path` are NUL-terminated strings; `out` is valid
// for a write.
enum BiaskitStatus biaskit_dataset_load_idx(const char *images_path,
                                            const char *labels_path,
                                            struct BiaskitDataset **out);

// # Safety
// `ds` is null or a handle from this library that has not been freed.
void biaskit_dataset_free(struct BiaskitDataset *ds);

// Row count; 0 for a null handle.
//
// # Safety
// `ds` is null or a live handle.
size_t biaskit_dataset_len(const struct BiaskitDataset *ds);

// Feature count (label column excluded); 0 for a null handle.
//
// # Safety
// `ds` is null or a live handle.
size_t biaskit_dataset_n_features(const struct BiaskitDataset *ds);

// # Safety
// `ds` is a live handle; `path` is a NUL-terminated string.
enum BiaskitStatus biaskit_dataset_write_csv(const struct BiaskitDataset *ds, const char *path);

// Class counts, proportions and imbalance ratio as a JSON object. Free the
// result with [`biaskit_string_free`].
//
// # Safety
// `ds` is a live handle; `out` is valid for a write.
enum BiaskitStatus biaskit_class_distribution_json(const struct BiaskitDataset *ds, char **out);

// Per-row weights moving the label distribution to `target`: `"uniform"`
// or `"class=p,..."`. `out` must hold exactly one value per row.
//
// # Safety
// `ds` is a live handle; `target` is a NUL-terminated string; `out` is
// valid for `len` writes.
enum BiaskitStatus biaskit_class_weights(const struct BiaskitDataset *ds,
                                         const char *target,
                                         double *out,
                                         size_t len);

// # Safety
// `out` is valid for a write.
enum BiaskitStatus biaskit_mcc(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn_, double *out);

// Area under the ROC curve; `labels[i]` nonzero marks a positive.
//
// # Safety
// `scores` and `labels` are valid for `n` reads; `out` is valid for a write.
enum BiaskitStatus biaskit_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

// Shift report as a JSON object. `tree` may be null for default
// parameters. Free the result with [`biaskit_string_free`].
//
// # Safety
// `train` and `test` are live handles; `tree` is null or valid for a read;
// `out` is valid for a write.
enum BiaskitStatus biaskit_detect_shift_json(const struct BiaskitDataset *train,
                                             const struct BiaskitDataset *test,
                                             const struct BiaskitTreeParams *tree,
                                             size_t folds,
                                             size_t kl_bins,
                                             uint64_t seed,
                                             char **out);

// Density-ratio weights for the rows of `train`. `out` must hold exactly
// one value per training row. `tree` may be null for default parameters.
//
// # Safety
// `train` and `test` are live handles; `tree` is null or valid for a read;
// `out` is valid for `len` writes.
enum BiaskitStatus biaskit_importance_weights(const struct BiaskitDataset *train,
                                              const struct BiaskitDataset *test,
                                              const struct BiaskitTreeParams *tree,
                                              uint64_t seed,
                                              double *out,
                                              size_t len);

// Keeps row `i` with probability `weights[i] / max(weights)`.
//
// # Safety
// `ds` is a live handle; `weights` is valid for `len` reads; `out` is valid
// for a write.
enum BiaskitStatus biaskit_rejection_sample(const struct BiaskitDataset *ds,
                                            const double *weights,
                                            size_t len,
                                            uint64_t seed,
                                            struct BiaskitDataset **out);

// Balances the classes of a labeled dataset. `k` is used only by SMOTE.
//
// # Safety
// `ds` is a live handle; `out` is valid for a write.
enum BiaskitStatus biaskit_resample(const struct BiaskitDataset *ds,
                                    enum BiaskitResampleMethod method,
                                    size_t k,
                                    uint64_t seed,
                                    struct BiaskitDataset **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIASKIT_H */
