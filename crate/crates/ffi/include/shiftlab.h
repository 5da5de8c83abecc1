#ifndef SHIFTLAB_H
#define SHIFTLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum ShiftlabStatus {
  SHIFTLAB_STATUS_OK = 0,
  SHIFTLAB_STATUS_NULL_POINTER = 1,
  /**
   * Invalid input; matches CLI exit code 2.
   */
  SHIFTLAB_STATUS_VALIDATION = 2,
  /**
   * Escape, root-solve or other numerical failure; matches exit code 3.
   */
  SHIFTLAB_STATUS_NUMERICAL = 3,
  SHIFTLAB_STATUS_PANIC = 4,
} ShiftlabStatus;

/**
 * Region of a point relative to the filtration.
 */
typedef enum ShiftlabRegion {
  SHIFTLAB_REGION_INNER = 0,
  SHIFTLAB_REGION_PLUS_CONE = 1,
  SHIFTLAB_REGION_MINUS_CONE = 2,
} ShiftlabRegion;

/**
 * Opaque handle to a validated shift-like map.
 */
typedef struct ShiftlabShift ShiftlabShift;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a map of dimension `k` and type `nu`. `coeffs` holds
 * `n_coeffs` complex coefficients, lowest degree first, interleaved.
 *
 * # Safety
 * `coeffs` must point to `2 * n_coeffs` doubles and `out` must be writable.
 */
enum ShiftlabStatus shiftlab_shift_new(size_t k,
                                       size_t nu,
                                       double a_re,
                                       double a_im,
                                       const double *coeffs,
                                       size_t n_coeffs,
                                       struct ShiftlabShift **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `h` must come from `shiftlab_shift_new` and not be used afterwards.
 */
void shiftlab_shift_free(struct ShiftlabShift *h);

/**
 * Dimension `k` of the map, or 0 for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t shiftlab_dimension(const struct ShiftlabShift *h);

/**
 * `out = S_a(z)`.
 *
 * # Safety
 * `z` and `out` must each hold `2k` doubles.
 */
enum ShiftlabStatus shiftlab_apply(const struct ShiftlabShift *h, const double *z, double *out);

/**
 * `out = S_a^{-1}(z)`; fails for `a = 0`.
 *
 * # Safety
 * `z` and `out` must each hold `2k` doubles.
 */
enum ShiftlabStatus shiftlab_apply_inverse(const struct ShiftlabShift *h,
                                           const double *z,
                                           double *out);

/**
 * `out = S_a^n(z)`, negative `n` iterating the inverse.
 *
 * # Safety
 * `z` and `out` must each hold `2k` doubles.
 */
enum ShiftlabStatus shiftlab_iterate(const struct ShiftlabShift *h,
                                     const double *z,
                                     int64_t n,
                                     double *out);

/**
 * Forward Green function truncated at `level` blocks.
 *
 * # Safety
 * `z` must hold `2k` doubles and `out` must be writable.
 */
enum ShiftlabStatus shiftlab_green_plus(const struct ShiftlabShift *h,
                                        const double *z,
                                        size_t level,
                                        double *out);

/**
 * Backward Green function truncated at `level` blocks; fails for `a = 0`.
 *
 * # Safety
 * `z` must hold `2k` doubles and `out` must be writable.
 */
enum ShiftlabStatus shiftlab_green_minus(const struct ShiftlabShift *h,
                                         const double *z,
                                         size_t level,
                                         double *out);

/**
 * Distance of `z` from the graph of `p` over its first `nu` coordinates.
 *
 * # Safety
 * `z` must hold `2k` doubles and `out` must be writable.
 */
enum ShiftlabStatus shiftlab_graph_residual(const struct ShiftlabShift *h,
                                            const double *z,
                                            double *out);

/**
 * Filtration region of `z` for radius `r`; `index` is the 1-based
 * dominating coordinate, 0 for the inner polydisc.
 *
 * # Safety
 * `z` must hold `2k` doubles; `region` and `index` must be writable.
 */
enum ShiftlabStatus shiftlab_classify_point(const struct ShiftlabShift *h,
                                            double r,
                                            const double *z,
                                            enum ShiftlabRegion *region,
                                            size_t *index);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes, into `buf`. Returns the full message length;
 * pass a null `buf` to query it.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t shiftlab_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIFTLAB_H */
