#ifndef BTE_H
#define BTE_H

/* Generated by cbindgen from the bte-ffi sources. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum BteStatus {
  BTE_STATUS_OK = 0,
  BTE_STATUS_NULL_ARGUMENT = 1,
  BTE_STATUS_INVALID_ARGUMENT = 2,
  BTE_STATUS_IO = 3,
  BTE_STATUS_PARSE = 4,
  BTE_STATUS_ENCODE = 5,
  BTE_STATUS_PERTURB = 6,
  BTE_STATUS_FEATURES = 7,
  BTE_STATUS_HINT = 8,
  BTE_STATUS_STATS = 9,
  BTE_STATUS_BUFFER_TOO_SMALL = 10,
  BTE_STATUS_PANIC = 11,
} BteStatus;

// Three-channel hint raster.
typedef struct BteHint BteHint;

// Binary vessel mask.
typedef struct BteMask BteMask;

// Cubic Bezier tree.
typedef struct BteTree BteTree;

// One segment of a tree, copied out.
typedef struct BteSegment {
  uint32_t id;
  // Parent id, or -1 for a root.
  int64_t parent;
  // `x0 y0 x1 y1 x2 y2 x3 y3`.
  double control[8];
  double radius;
} BteSegment;

// Mean within-start difference with its SEM, 95% t interval and two-sided
// p-value.
typedef struct BtePairedEffect {
  size_t n;
  double delta_mean;
  double sem;
  double ci_low;
  double ci_high;
  double p_value;
} BtePairedEffect;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL if none. Valid until
// the next failing call on the same thread; do not free.
const char *bte_last_error(void);

// Clears the stored message for this thread.
void bte_clear_error(void);

// Library version as a static NUL-terminated string.
const char *bte_version(void);

// Loads a PNG or PNM mask; pixels with luma above 127 are vessel.
//
// # Safety
// `path` must be NUL-terminated; `out` must be valid for writes.
enum BteStatus bte_mask_load(const char *path, struct BteMask **out);

// Builds a mask from `width * height` row-major bytes, nonzero = vessel.
//
// # Safety
// `bits` must be readable for `width * height` bytes; `out` valid for writes.
enum BteStatus bte_mask_from_bits(const uint8_t *bits,
                                  size_t width,
                                  size_t height,
                                  struct BteMask **out);

// Nearest-neighbour resampling to `target x target`.
//
// # Safety
// `mask` must be a live handle or NULL; `out` valid for writes.
enum BteStatus bte_mask_resample(const struct BteMask *mask, size_t target, struct BteMask **out);

// # Safety
// `mask` must be a live handle; `width`/`height` valid for writes.
enum BteStatus bte_mask_dims(const struct BteMask *mask, size_t *width, size_t *height);

// # Safety
// `mask` must come from this library and not be freed twice.
void bte_mask_free(struct BteMask *mask);

// Encodes a mask into a tree with default parameters. `source_id` (may be
// NULL) is stored as the tree's source.
//
// # Safety
// `mask` must be a live handle, `source_id` NULL or NUL-terminated, `out`
// valid for writes.
enum BteStatus bte_encode(const struct BteMask *mask, const char *source_id, struct BteTree **out);

// # Safety
// `path` NUL-terminated; `out` valid for writes.
enum BteStatus bte_tree_load(const char *path, struct BteTree **out);

// Parses BTE text held in memory.
//
// # Safety
// `text` NUL-terminated; `out` valid for writes.
enum BteStatus bte_tree_parse(const char *text, struct BteTree **out);

// Writes the tree atomically with a provenance header for `seed`.
//
// # Safety
// `tree` live; `path` NUL-terminated.
enum BteStatus bte_tree_save(const struct BteTree *tree, const char *path, uint64_t seed);

// Number of segments; 0 for NULL.
//
// # Safety
// `tree` live or NULL.
size_t bte_tree_segment_count(const struct BteTree *tree);

// Copies segment `index` (file order) into `out`.
//
// # Safety
// `tree` live; `out` valid for writes.
enum BteStatus bte_tree_segment(const struct BteTree *tree, size_t index, struct BteSegment *out);

// # Safety
// `tree` must come from this library and not be freed twice.
void bte_tree_free(struct BteTree *tree);

// Applies a named grid entry (`baseline`, `tortuosity_2x`, `arc_drop_10`,
// `radius_x0.70`, `pixdrop_30`, ...) and returns the perturbed tree.
//
// # Safety
// Handles live; `config` NUL-terminated; `out` valid for writes.
enum BteStatus bte_perturb(const struct BteTree *tree,
                           const struct BteMask *mask,
                           const char *config,
                           double gamma,
                           uint64_t seed,
                           struct BteTree **out);

// Name of feature `index` (0-19), or NULL when out of range. Static; do
// not free.
const char *bte_feature_name(size_t index);

// Writes the 20 features of `tree` against `mask` into `out[0..20]`.
//
// # Safety
// Handles live; `out` writable for 20 doubles.
enum BteStatus bte_features(const struct BteTree *tree, const struct BteMask *mask, double *out);

// Renders the hint of `tree` over the radius field of `mask`.
//
// # Safety
// Handles live; `out` valid for writes.
enum BteStatus bte_hint_render(const struct BteTree *tree,
                               const struct BteMask *mask,
                               struct BteHint **out);

// Applies a named grid entry and renders the result, matching one file of
// the command-line `hint` grid.
//
// # Safety
// Handles live; `config` NUL-terminated; `out` valid for writes.
enum BteStatus bte_hint_render_config(const struct BteTree *tree,
                                      const struct BteMask *mask,
                                      const char *config,
                                      double gamma,
                                      uint64_t seed,
                                      struct BteHint **out);

// # Safety
// `hint` live; `width`/`height` valid for writes.
enum BteStatus bte_hint_dims(const struct BteHint *hint, size_t *width, size_t *height);

// Copies channel `channel` (0-2, values in [-1, 1], row-major) into `buf`,
// which must hold `width * height` doubles.
//
// # Safety
// `hint` live; `buf` writable for `len` doubles.
enum BteStatus bte_hint_channel(const struct BteHint *hint,
                                size_t channel,
                                double *buf,
                                size_t len);

// Writes the hint as BTEF with a provenance block for `seed`.
//
// # Safety
// `hint` live; `path` NUL-terminated.
enum BteStatus bte_hint_write(const struct BteHint *hint, const char *path, uint64_t seed);

// # Safety
// `hint` must come from this library and not be freed twice.
void bte_hint_free(struct BteHint *hint);

// Per-start differences `prob_config[i] - prob_baseline[i]` over `n`
// starts, summarized.
//
// # Safety
// Both arrays must be readable for `n` doubles; `out` valid for writes.
enum BteStatus bte_paired_effect(const double *prob_config,
                                 const double *prob_baseline,
                                 size_t n,
                                 struct BtePairedEffect *out);

// Quantile of Student's t with `df` degrees of freedom.
//
// # Safety
// `out` valid for writes.
enum BteStatus bte_t_quantile(double p, double df, double *out);

// `|a| / |b|`. Fails with `BTE_STATUS_STATS` when `|b|` is too small for
// the ratio to be meaningful.
//
// # Safety
// `out` valid for writes.
enum BteStatus bte_contrast_ratio(double a, double b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BTE_H */
