#ifndef HLOC_H
#define HLOC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum HlocStatus {
  HLOC_STATUS_OK = 0,
  HLOC_STATUS_NULL_POINTER = 1,
  HLOC_STATUS_INVALID_GRID = 2,
  HLOC_STATUS_GRID_MISMATCH = 3,
  HLOC_STATUS_INVALID_PARAMETER = 4,
  HLOC_STATUS_NON_FINITE = 5,
  HLOC_STATUS_NON_POSITIVE_WEIGHT = 6,
  HLOC_STATUS_DEGENERATE = 7,
  HLOC_STATUS_UNKNOWN_EXPERIMENT = 8,
  HLOC_STATUS_CONFIG = 9,
  HLOC_STATUS_IO = 10,
  HLOC_STATUS_LENGTH_MISMATCH = 11,
  HLOC_STATUS_PANIC = 12,
} HlocStatus;

/**
 * A real-valued function sampled on a grid.
 */
typedef struct HlocField HlocField;

/**
 * A sampled weight with its cube-query tables.
 */
typedef struct HlocWeight HlocWeight;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *hloc_last_error(void);

/**
 * Zero field on the grid with `n` (odd) nodes per axis on `[-half_width, half_width]^dim`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum HlocStatus hloc_field_new(size_t dim, double half_width, size_t n, struct HlocField **out);

/**
 * # Safety
 * `field` must be null or a handle from this library not yet freed.
 */
void hloc_field_free(struct HlocField *field);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
size_t hloc_field_len(const struct HlocField *field);

/**
 * Overwrites all node values (row-major, last axis fastest).
 *
 * # Safety
 * `values` must point to `len` readable doubles.
 */
enum HlocStatus hloc_field_set(struct HlocField *field, const double *values, size_t len);

/**
 * Copies all node values into `values`.
 *
 * # Safety
 * `values` must point to `len` writable doubles.
 */
enum HlocStatus hloc_field_get(const struct HlocField *field, double *values, size_t len);

/**
 * Weight from a family description such as `{"family": "exponential", "c": 1.0}`.
 *
 * # Safety
 * `family_json` must be a NUL-terminated string; `out` valid for a write.
 */
enum HlocStatus hloc_weight_new(size_t dim,
                                double half_width,
                                size_t n,
                                const char *family_json,
                                struct HlocWeight **out);

/**
 * Weight whose node values are those of `field`; they must be positive.
 *
 * # Safety
 * `field` must be a live handle; `out` valid for a write.
 */
enum HlocStatus hloc_weight_from_field(const struct HlocField *field, struct HlocWeight **out);

/**
 * # Safety
 * `weight` must be null or a handle from this library not yet freed.
 */
void hloc_weight_free(struct HlocWeight *weight);

/**
 * Grid estimate of the local `A_p` constant over cubes of side below `max_side`.
 *
 * # Safety
 * Handles must be live; `out` valid for a write.
 */
enum HlocStatus hloc_ap_loc_constant(const struct HlocWeight *weight,
                                     double p,
                                     double max_side,
                                     double *out);

/**
 * Weighted `L^p` norm.
 *
 * # Safety
 * Handles must be live; `out` valid for a write.
 */
enum HlocStatus hloc_lp_norm(const struct HlocField *field,
                             const struct HlocWeight *weight,
                             double p,
                             double *out);

/**
 * Weighted weak `L^1` quasi-norm.
 *
 * # Safety
 * Handles must be live; `out` valid for a write.
 */
enum HlocStatus hloc_weak_l1_norm(const struct HlocField *field,
                                  const struct HlocWeight *weight,
                                  double *out);

/**
 * Local Riesz transform along axis `j` (1-based) into a new field.
 *
 * # Safety
 * `field` must be live; `out` valid for a write.
 */
enum HlocStatus hloc_riesz_transform(const struct HlocField *field,
                                     size_t j,
                                     struct HlocField **out);

/**
 * Local Hardy–Littlewood maximal function into a new field.
 *
 * # Safety
 * `field` must be live; `out` valid for a write.
 */
enum HlocStatus hloc_local_maximal(const struct HlocField *field, struct HlocField **out);

/**
 * Smooth maximal function over the scales `ratio^{-k}` in `[t_min, 1)`.
 *
 * # Safety
 * `field` must be live; `out` valid for a write.
 */
enum HlocStatus hloc_smooth_maximal(const struct HlocField *field,
                                    double t_min,
                                    double ratio,
                                    struct HlocField **out);

/**
 * Weighted local Hardy norm with the same scale ladder as [`hloc_smooth_maximal`].
 *
 * # Safety
 * Handles must be live; `out` valid for a write.
 */
enum HlocStatus hloc_h1_norm(const struct HlocField *field,
                             const struct HlocWeight *weight,
                             double t_min,
                             double ratio,
                             double *out);

/**
 * Runs the experiment described by the JSON file at `config_path`, writing
 * its artifacts under `out_dir` (or the configured directory when null).
 * `passed` receives 1 when every criterion held, else 0.
 *
 * # Safety
 * Strings must be NUL-terminated; `passed` valid for a write.
 */
enum HlocStatus hloc_run_experiment(const char *config_path, const char *out_dir, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HLOC_H */
