#ifndef INPAINT_OPT_H
#define INPAINT_OPT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  INPAINT_STATUS_OK = 0,
  INPAINT_STATUS_NULL_POINTER = 1,
  INPAINT_STATUS_IO = 2,
  INPAINT_STATUS_FORMAT = 3,
  INPAINT_STATUS_DIMENSION_MISMATCH = 4,
  INPAINT_STATUS_EMPTY_MASK = 5,
  INPAINT_STATUS_INVALID_PARAMETER = 6,
  INPAINT_STATUS_CONVERGENCE = 7,
  INPAINT_STATUS_PANIC = 8,
} InpaintStatus;

typedef enum {
  INPAINT_TONAL_METHOD_LSQ = 0,
  INPAINT_TONAL_METHOD_ECHO = 1,
} InpaintTonalMethod;

/**
 * Opaque image handle.
 */
typedef struct InpaintImage InpaintImage;

/**
 * Opaque handle for mask positions with their stored values.
 */
typedef struct InpaintKnown InpaintKnown;

/**
 * Opaque binary mask handle.
 */
typedef struct InpaintMask InpaintMask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. The pointer stays valid until
 * the next failing call on the same thread.
 */
const char *inpaint_last_error(void);

/**
 * Creates an image from `width * height * channels` interleaved samples.
 *
 * # Safety
 * `data` must point to that many readable doubles; `out` must be writable.
 */
InpaintStatus inpaint_image_new(size_t width,
                                size_t height,
                                size_t channels,
                                const double *data,
                                InpaintImage **out);

/**
 * Reads a PGM or PPM file.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
InpaintStatus inpaint_image_load(const char *file, InpaintImage **out);

/**
 * Writes an 8-bit PGM or PPM file.
 *
 * # Safety
 * `img` must be a live handle; `file` a NUL-terminated string.
 */
InpaintStatus inpaint_image_save(const InpaintImage *img, const char *file);

/**
 * Writes width, height and channel count. Any output pointer may be null.
 *
 * # Safety
 * `img` must be a live handle; non-null outputs must be writable.
 */
InpaintStatus inpaint_image_shape(const InpaintImage *img,
                                  size_t *width,
                                  size_t *height,
                                  size_t *channels);

/**
 * Copies the interleaved samples into `data`, which holds `len` doubles.
 *
 * # Safety
 * `img` must be a live handle; `data` must have room for `len` doubles.
 */
InpaintStatus inpaint_image_data(const InpaintImage *img, double *data, size_t len);

/**
 * # Safety
 * `img` must be null or a handle not freed before.
 */
void inpaint_image_free(InpaintImage *img);

/**
 * Reads a {0,255} PGM mask.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
InpaintStatus inpaint_mask_load(const char *file, InpaintMask **out);

/**
 * # Safety
 * `mask` must be a live handle; `file` a NUL-terminated string.
 */
InpaintStatus inpaint_mask_save(const InpaintMask *mask, const char *file);

/**
 * Number of mask pixels, or 0 for a null handle.
 *
 * # Safety
 * `mask` must be null or a live handle.
 */
size_t inpaint_mask_count(const InpaintMask *mask);

/**
 * Whether pixel `index` (row-major) is a mask pixel. Out of range reads 0.
 *
 * # Safety
 * `mask` must be null or a live handle.
 */
int inpaint_mask_get(const InpaintMask *mask, size_t index);

/**
 * # Safety
 * `mask` must be null or a handle not freed before.
 */
void inpaint_mask_free(InpaintMask *mask);

/**
 * Uniformly random mask with exactly `round(density * width * height)` pixels.
 *
 * # Safety
 * `out` must be writable.
 */
InpaintStatus inpaint_mask_random(size_t width,
                                  size_t height,
                                  double density,
                                  uint64_t seed,
                                  InpaintMask **out);

/**
 * Dithered Laplace magnitude mask. `fell_back`, when not null, is set to 1
 * if the image was flat and a random mask was returned instead.
 *
 * # Safety
 * `img` must be a live handle; `out` writable; `fell_back` null or writable.
 */
InpaintStatus inpaint_mask_analytic(const InpaintImage *img,
                                    double density,
                                    uint64_t seed,
                                    InpaintMask **out,
                                    int *fell_back);

/**
 * Probabilistic sparsification from the full mask. Pass 0 for `p` or `q`
 * to use the defaults (0.02 and 0.98).
 *
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
InpaintStatus inpaint_mask_sparsify(const InpaintImage *img,
                                    double density,
                                    double p,
                                    double q,
                                    uint64_t seed,
                                    InpaintMask **out);

/**
 * Nonlocal pixel exchange starting from `mask`.
 *
 * # Safety
 * `img` and `mask` must be live handles; `out` must be writable.
 */
InpaintStatus inpaint_mask_nlpe(const InpaintImage *img,
                                const InpaintMask *mask,
                                size_t cycles,
                                size_t swap_size,
                                uint64_t seed,
                                InpaintMask **out);

/**
 * Known data holding the image values at the mask pixels.
 *
 * # Safety
 * `img` and `mask` must be live handles; `out` must be writable.
 */
InpaintStatus inpaint_known_from_image(const InpaintImage *img,
                                       const InpaintMask *mask,
                                       InpaintKnown **out);

/**
 * Reads a TONAL file.
 *
 * # Safety
 * `file` must be a NUL-terminated string; `out` must be writable.
 */
InpaintStatus inpaint_known_load(const char *file, InpaintKnown **out);

/**
 * Writes a TONAL file.
 *
 * # Safety
 * `known` must be a live handle; `file` a NUL-terminated string.
 */
InpaintStatus inpaint_known_save(const InpaintKnown *known, const char *file);

/**
 * Number of stored pixels, or 0 for a null handle.
 *
 * # Safety
 * `known` must be null or a live handle.
 */
size_t inpaint_known_len(const InpaintKnown *known);

/**
 * # Safety
 * `known` must be null or a handle not freed before.
 */
void inpaint_known_free(InpaintKnown *known);

/**
 * Tonal optimisation of the values at `mask` with default settings.
 * `method` is an [`InpaintTonalMethod`] value.
 *
 * # Safety
 * `img` and `mask` must be live handles; `out` must be writable.
 */
InpaintStatus inpaint_tonal(const InpaintImage *img,
                            const InpaintMask *mask,
                            int method,
                            uint64_t seed,
                            InpaintKnown **out);

/**
 * Homogeneous diffusion inpainting. `tolerance` <= 0 selects the default.
 *
 * # Safety
 * `known` must be a live handle; `out` must be writable.
 */
InpaintStatus inpaint_solve(const InpaintKnown *known, double tolerance, InpaintImage **out);

/**
 * PSNR in dB with peak 255; identical images give +infinity.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
InpaintStatus inpaint_psnr(const InpaintImage *a, const InpaintImage *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INPAINT_OPT_H */
