#ifndef EMBDEBIAS_H
#define EMBDEBIAS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EdStatus {
  ED_STATUS_OK = 0,
  ED_STATUS_NULL_POINTER = 1,
  ED_STATUS_INVALID_ARGUMENT = 2,
  ED_STATUS_IO = 3,
  ED_STATUS_PARSE = 4,
  ED_STATUS_DIMENSION_MISMATCH = 5,
  ED_STATUS_NON_FINITE = 6,
  ED_STATUS_DEGENERATE_MEANS = 7,
  ED_STATUS_SINGULAR_SCATTER = 8,
  ED_STATUS_RANK_DEFICIENT = 9,
  ED_STATUS_INVALID_GAMMA = 10,
  ED_STATUS_SINGLE_CLASS = 11,
  ED_STATUS_OTHER = 98,
  ED_STATUS_PANIC = 99,
} EdStatus;

// Opaque embedding table.
typedef struct EdEmbeddings EdEmbeddings;

// Opaque random Fourier feature map.
typedef struct EdKernelMap EdKernelMap;

// Opaque projection operator.
typedef struct EdOperator EdOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *ed_last_error(void);

// Unit LDA direction separating the rows of `xa` (`na`×`dim`) from those of
// `xb` (`nb`×`dim`). Writes `dim` values to `out`.
enum EdStatus ed_lda_fit(const double *xa,
                         size_t na,
                         const double *xb,
                         size_t nb,
                         size_t dim,
                         double shrinkage,
                         double *out);

// Cosine between a bias direction `w` and a coefficient vector `v`.
enum EdStatus ed_bias_correlation(const double *w, const double *v, size_t dim, double *out);

// ROC AUC of `scores` against `labels` (non-zero = positive).
enum EdStatus ed_roc_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

// Operator removing the span of `k` directions stored row-major in
// `directions` (`k`×`dim`).
enum EdStatus ed_operator_from_directions(const double *directions,
                                          size_t k,
                                          size_t dim,
                                          double rel_tol,
                                          struct EdOperator **out);

size_t ed_operator_dim(const struct EdOperator *op);

size_t ed_operator_rank(const struct EdOperator *op);

// Projects the `n` rows of `x` (`n`×dim) in place.
enum EdStatus ed_operator_apply(const struct EdOperator *op, double *x, size_t n);

void ed_operator_free(struct EdOperator *op);

// Samples a kernel map from `input_dim` to `output_dim` features
// (`0` gives `4·input_dim`). A `gamma` ≤ 0 selects the median heuristic,
// which needs `sample` (`n_sample`×`input_dim`).
enum EdStatus ed_kernel_map_new(size_t input_dim,
                                size_t output_dim,
                                double gamma,
                                uint64_t seed,
                                const double *sample,
                                size_t n_sample,
                                struct EdKernelMap **out);

size_t ed_kernel_map_input_dim(const struct EdKernelMap *map);

size_t ed_kernel_map_output_dim(const struct EdKernelMap *map);

double ed_kernel_map_gamma(const struct EdKernelMap *map);

// Maps `n` rows of `x` (`n`×input_dim) into `out` (`n`×output_dim).
enum EdStatus ed_kernel_map_transform(const struct EdKernelMap *map,
                                      const double *x,
                                      size_t n,
                                      double *out);

void ed_kernel_map_free(struct EdKernelMap *map);

// Loads an embedding file. `format`: 0 infers from the extension, 1 binary,
// 2 CSV.
enum EdStatus ed_embeddings_load(const char *path, uint32_t format, struct EdEmbeddings **out);

size_t ed_embeddings_rows(const struct EdEmbeddings *t);

size_t ed_embeddings_dim(const struct EdEmbeddings *t);

// Clip id of row `i`, or null when out of range. Owned by the table.
const char *ed_embeddings_clip_id(const struct EdEmbeddings *t, size_t i);

// Frame index of row `i`, or `u32::MAX` when out of range.
uint32_t ed_embeddings_frame(const struct EdEmbeddings *t, size_t i);

// Copies all vectors row-major into `out`, which must hold rows×dim values.
enum EdStatus ed_embeddings_copy(const struct EdEmbeddings *t, double *out, size_t len);

void ed_embeddings_free(struct EdEmbeddings *t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMBDEBIAS_H */
