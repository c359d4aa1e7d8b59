#ifndef VINTK_H
#define VINTK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VntkStatus {
  VNTK_STATUS_OK = 0,
  VNTK_STATUS_NULL_POINTER = 1,
  VNTK_STATUS_INVALID_ARGUMENT = 2,
  VNTK_STATUS_NUMERIC = 3,
  VNTK_STATUS_INFEASIBLE = 4,
  VNTK_STATUS_IO = 5,
  VNTK_STATUS_BUFFER_TOO_SMALL = 6,
  VNTK_STATUS_PANIC = 7,
} VntkStatus;

/**
 * A symmetric kernel Gram matrix.
 */
typedef struct VntkGram VntkGram;

/**
 * A search space definition.
 */
typedef struct VntkSpace VntkSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the next call.
 */
const char *vntk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *vntk_version(void);

/**
 * Looks up a built-in space (`pure-vit`, `hybrid`, `pure-vit-msa-only`, `hybrid-msa-only`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `space` a valid out-pointer.
 */
enum VntkStatus vntk_space_new(const char *name, struct VntkSpace **space);

/**
 * # Safety
 * `space` must come from [`vntk_space_new`] and not be used afterwards; null is ignored.
 */
void vntk_space_free(struct VntkSpace *space);

/**
 * # Safety
 * `space` must be a live handle and `cardinality` a valid out-pointer.
 */
enum VntkStatus vntk_space_cardinality(const struct VntkSpace *space, uint64_t *cardinality);

/**
 * Writes the encoding of a seeded uniform sample into `buf`.
 *
 * # Safety
 * `space` must be a live handle; `buf` must hold `len` bytes; `written` may be null.
 */
enum VntkStatus vntk_space_sample(const struct VntkSpace *space,
                                  uint64_t seed,
                                  char *buf,
                                  size_t len,
                                  size_t *written);

/**
 * Parameter and MAC counts of a genotype at the default input size.
 *
 * # Safety
 * `genotype` must be NUL-terminated; both out-pointers must be valid.
 */
enum VntkStatus vntk_genotype_cost(const char *genotype, uint64_t *params, uint64_t *macs);

/**
 * Proxy score of a genotype; `metric` is one of `fnorm`, `mean`, `ncn`, `relu`, `vintk`.
 *
 * # Safety
 * String arguments must be NUL-terminated; `value` must be a valid out-pointer.
 */
enum VntkStatus vntk_score_genotype(const char *genotype,
                                    const char *metric,
                                    uint64_t seed,
                                    size_t probe_size,
                                    double *value);

/**
 * Empirical NTK Gram of a genotype at initialization over `probe_size` probes.
 *
 * # Safety
 * `genotype` must be NUL-terminated; `gram` must be a valid out-pointer.
 */
enum VntkStatus vntk_ntk_gram(const char *genotype,
                              uint64_t seed,
                              size_t probe_size,
                              struct VntkGram **gram);

/**
 * Builds a Gram from `n * n` row-major values; they must be symmetric.
 *
 * # Safety
 * `data` must point to `n * n` doubles; `gram` must be a valid out-pointer.
 */
enum VntkStatus vntk_gram_from_data(size_t n, const double *data, struct VntkGram **gram);

/**
 * # Safety
 * `gram` must come from this library and not be used afterwards; null is ignored.
 */
void vntk_gram_free(struct VntkGram *gram);

/**
 * # Safety
 * `gram` must be a live handle and `dim` a valid out-pointer.
 */
enum VntkStatus vntk_gram_dim(const struct VntkGram *gram, size_t *dim);

/**
 * Copies the row-major entries into `buf`, which must hold `dim * dim` doubles.
 *
 * # Safety
 * `gram` must be a live handle; `buf` must point to `len` writable doubles.
 */
enum VntkStatus vntk_gram_copy(const struct VntkGram *gram, double *buf, size_t len);

/**
 * Entrywise product of two Grams of equal size.
 *
 * # Safety
 * `a` and `b` must be live handles; `product` must be a valid out-pointer.
 */
enum VntkStatus vntk_gram_hadamard(const struct VntkGram *a,
                                   const struct VntkGram *b,
                                   struct VntkGram **product);

/**
 * Summarizes a Gram with `fnorm`, `mean`, `ncn` or `vintk` (signed mean of an already-formed product).
 *
 * # Safety
 * `gram` must be a live handle; `metric` NUL-terminated; `value` a valid out-pointer.
 */
enum VntkStatus vntk_gram_score(const struct VntkGram *gram,
                                const char *metric,
                                double *value);

/**
 * Kendall tau-b and its two-sided p-value for two rankings of length `n`.
 *
 * # Safety
 * `x` and `y` must each point to `n` doubles; out-pointers must be valid.
 */
enum VntkStatus vntk_kendall_tau(const double *x,
                                 const double *y,
                                 size_t n,
                                 double *tau,
                                 double *p_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VINTK_H */
