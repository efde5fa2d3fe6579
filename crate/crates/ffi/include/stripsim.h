#ifndef STRIPSIM_H
#define STRIPSIM_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum StripsimStatus {
  STRIPSIM_STATUS_OK = 0,
  STRIPSIM_STATUS_NULL_ARGUMENT = 1,
  STRIPSIM_STATUS_INVALID_ARGUMENT = 2,
  STRIPSIM_STATUS_IO = 3,
  STRIPSIM_STATUS_UNSUPPORTED_FORMAT = 4,
  STRIPSIM_STATUS_CORRUPT_FILE = 5,
  STRIPSIM_STATUS_IMAGE_TOO_SMALL = 6,
  STRIPSIM_STATUS_INVALID_PLAN = 7,
  STRIPSIM_STATUS_DIMENSION_MISMATCH = 8,
  STRIPSIM_STATUS_STATS = 9,
  STRIPSIM_STATUS_PANIC = 10,
} StripsimStatus;

/**
 * Severity codes accepted where a `uint32_t severity` is expected.
 */
typedef enum StripsimSeverity {
  STRIPSIM_SEVERITY_UNATTACKED = 0,
  STRIPSIM_SEVERITY_MILD = 1,
  STRIPSIM_SEVERITY_MODERATE = 2,
  STRIPSIM_SEVERITY_SEVERE = 3,
} StripsimSeverity;

/**
 * Bayer layout codes accepted where a `uint32_t pattern` is expected.
 */
typedef enum StripsimPattern {
  STRIPSIM_PATTERN_RGGB = 0,
  STRIPSIM_PATTERN_GRBG = 1,
  STRIPSIM_PATTERN_GBRG = 2,
  STRIPSIM_PATTERN_BGGR = 3,
} StripsimPattern;

/**
 * t-test variant codes accepted where a `uint32_t kind` is expected.
 */
typedef enum StripsimTTestKind {
  STRIPSIM_T_TEST_KIND_WELCH = 0,
  STRIPSIM_T_TEST_KIND_POOLED = 1,
  STRIPSIM_T_TEST_KIND_PAIRED = 2,
} StripsimTTestKind;

/**
 * Opaque RGB image.
 */
typedef struct StripsimImage StripsimImage;

/**
 * Opaque attack plan.
 */
typedef struct StripsimPlan StripsimPlan;

typedef struct StripsimSamplerConfig {
  size_t min_strip_height;
  size_t max_strip_height;
  size_t max_placement_attempts;
} StripsimSamplerConfig;

/**
 * Half-open row range.
 */
typedef struct StripsimStrip {
  size_t start_row;
  size_t end_row;
} StripsimStrip;

typedef struct StripsimTTestResult {
  double t_statistic;
  double degrees_of_freedom;
  double p_value;
  int significant_at_5pct;
  int degenerate;
} StripsimTTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *stripsim_last_error(void);

/**
 * Loads a PNG or binary PPM.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum StripsimStatus stripsim_image_load(const char *path, struct StripsimImage **out);

/**
 * Writes PPM for a `.ppm` path, PNG otherwise.
 *
 * # Safety
 * `image` must come from this library; `path` must be NUL-terminated.
 */
enum StripsimStatus stripsim_image_save(const struct StripsimImage *image, const char *path);

/**
 * Copies `width * height * 3` interleaved RGB bytes into a new image.
 *
 * # Safety
 * `data` must point to at least `width * height * 3` readable bytes.
 */
enum StripsimStatus stripsim_image_from_rgb(const uint8_t *data,
                                            size_t width,
                                            size_t height,
                                            struct StripsimImage **out);

/**
 * # Safety
 * `image` must be NULL or come from this library.
 */
size_t stripsim_image_width(const struct StripsimImage *image);

/**
 * # Safety
 * `image` must be NULL or come from this library.
 */
size_t stripsim_image_height(const struct StripsimImage *image);

/**
 * Borrowed pointer to the interleaved RGB bytes, row-major; valid until the
 * image is freed. `len` (optional) receives the byte count.
 *
 * # Safety
 * `image` must be NULL or come from this library; `len` may be NULL.
 */
const uint8_t *stripsim_image_data(const struct StripsimImage *image, size_t *len);

/**
 * # Safety
 * `image` must be NULL or come from this library and not be used again.
 */
void stripsim_image_free(struct StripsimImage *image);

/**
 * Default sampler bounds.
 */
struct StripsimSamplerConfig stripsim_sampler_default(void);

/**
 * Draws a random plan. `config` may be NULL for the defaults.
 *
 * # Safety
 * `config` must be NULL or readable; `out` must be writable.
 */
enum StripsimStatus stripsim_plan_sample(uint32_t severity_code,
                                         size_t width,
                                         size_t height,
                                         uint64_t seed,
                                         const struct StripsimSamplerConfig *config,
                                         struct StripsimPlan **out);

/**
 * Builds a plan from explicit strips (geometry checked, count range not).
 *
 * # Safety
 * `strips` must point to `count` readable entries (may be NULL if 0).
 */
enum StripsimStatus stripsim_plan_explicit(uint32_t severity_code,
                                           uint64_t seed,
                                           size_t width,
                                           size_t height,
                                           const struct StripsimStrip *strips,
                                           size_t count,
                                           struct StripsimPlan **out);

/**
 * # Safety
 * `plan` must be NULL or come from this library.
 */
size_t stripsim_plan_strip_count(const struct StripsimPlan *plan);

/**
 * # Safety
 * `plan` must come from this library; `out` must be writable.
 */
enum StripsimStatus stripsim_plan_strip(const struct StripsimPlan *plan,
                                        size_t index,
                                        struct StripsimStrip *out);

/**
 * # Safety
 * `plan` must be NULL or come from this library and not be used again.
 */
void stripsim_plan_free(struct StripsimPlan *plan);

/**
 * Channel-swap attack; the result is a new image.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum StripsimStatus stripsim_apply_swap(const struct StripsimImage *image,
                                        const struct StripsimPlan *plan,
                                        uint32_t pattern_code,
                                        struct StripsimImage **out);

/**
 * Row-packet loss model; the result is a new image.
 *
 * # Safety
 * Handles must come from this library; `out` must be writable.
 */
enum StripsimStatus stripsim_simulate_packet_loss(const struct StripsimImage *image,
                                                  const struct StripsimPlan *plan,
                                                  uint32_t pattern_code,
                                                  struct StripsimImage **out);

/**
 * Sets `*matched` to 1 when the differing rows of the two images line up
 * with the plan's strips, else 0.
 *
 * # Safety
 * Handles must come from this library; `matched` must be writable.
 */
enum StripsimStatus stripsim_verify(const struct StripsimImage *original,
                                    const struct StripsimImage *attacked,
                                    const struct StripsimPlan *plan,
                                    int *matched);

/**
 * `master_seed ^ fnv1a64(path)`; a NULL path hashes as empty.
 *
 * # Safety
 * `path` must be NULL or NUL-terminated.
 */
uint64_t stripsim_derive_seed(uint64_t master_seed, const char *path);

/**
 * Signed percentage change against a positive baseline.
 *
 * # Safety
 * `out` must be writable.
 */
enum StripsimStatus stripsim_degradation(double no_attack, double attacked, double *out);

/**
 * Two-sided t-test of `a` against `b`.
 *
 * # Safety
 * `a` and `b` must point to `na` and `nb` readable doubles; `out` must be
 * writable.
 */
enum StripsimStatus stripsim_ttest(const double *a,
                                   size_t na,
                                   const double *b,
                                   size_t nb,
                                   uint32_t kind_code,
                                   struct StripsimTTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRIPSIM_H */
