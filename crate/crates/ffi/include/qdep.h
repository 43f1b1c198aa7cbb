#ifndef QDEP_H
#define QDEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QdepStatus {
  QDEP_STATUS_OK = 0,
  QDEP_STATUS_NULL_POINTER = 1,
  QDEP_STATUS_INVALID_SAMPLE = 2,
  QDEP_STATUS_INVALID_DATA = 3,
  QDEP_STATUS_DOMAIN = 4,
  QDEP_STATUS_CONFIGURATION = 5,
  QDEP_STATUS_NOT_IMPLEMENTED = 6,
  QDEP_STATUS_INPUT = 7,
  QDEP_STATUS_CACHE = 8,
  QDEP_STATUS_PANIC = 9,
} QdepStatus;

typedef enum QdepStatisticKind {
  QDEP_STATISTIC_KIND_TN = 0,
  QDEP_STATISTIC_KIND_VN = 1,
  QDEP_STATISTIC_KIND_MAX_BET = 2,
} QdepStatisticKind;

// Per-cell lower and upper barriers of the 10×10 diagram.
typedef struct QdepBarriers QdepBarriers;

// Monte Carlo null distribution of one statistic.
typedef struct QdepNull QdepNull;

// Ranked bivariate sample.
typedef struct QdepPseudoSample QdepPseudoSample;

// `q̄ₙ` on a dyadic grid.
typedef struct QdepSurface QdepSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call into the library on the same thread.
const char *qdep_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *qdep_version(void);

// Ranks `n` pairs, breaking ties at random from `tie_seed`.
enum QdepStatus qdep_pseudo_sample_new(const double *x,
                                       const double *y,
                                       size_t n,
                                       uint64_t tie_seed,
                                       struct QdepPseudoSample **out);

void qdep_pseudo_sample_free(struct QdepPseudoSample *p);

size_t qdep_pseudo_sample_len(const struct QdepPseudoSample *p);

// `q̄ₙ` on the grid of depth `s` (size `2^(s+1) − 1`).
enum QdepStatus qdep_surface_new(const struct QdepPseudoSample *sample,
                                 uint32_t s,
                                 struct QdepSurface **out);

void qdep_surface_free(struct QdepSurface *p);

// Grid size `d`; the surface holds `d·d` values.
size_t qdep_surface_size(const struct QdepSurface *p);

// Copies the row-major `d·d` values into `buf`, which must hold `len ≥ d·d`.
enum QdepStatus qdep_surface_values(const struct QdepSurface *p, double *buf, size_t len);

enum QdepStatus qdep_surface_t_stat(const struct QdepSurface *p, double t_frac, double *out);

enum QdepStatus qdep_surface_v_stat(const struct QdepSurface *p, double *out);

// Simulates the null of `kind` at sample size `n`, grid size `d`.
enum QdepStatus qdep_null_new(enum QdepStatisticKind kind,
                              size_t n,
                              size_t d,
                              double t_frac,
                              size_t runs,
                              uint64_t seed,
                              struct QdepNull **out);

void qdep_null_free(struct QdepNull *p);

enum QdepStatus qdep_null_critical_value(const struct QdepNull *p, double alpha, double *out);

// Statistic of `sample` and its Monte Carlo p-value against `null`.
enum QdepStatus qdep_test(const struct QdepPseudoSample *sample,
                          const struct QdepNull *null,
                          double *stat_out,
                          double *p_out);

// Calibrates diagram barriers at sample size `n`, grid depth `s`.
enum QdepStatus qdep_barriers_new(size_t n,
                                  uint32_t s,
                                  double alpha_side,
                                  size_t runs,
                                  uint64_t seed,
                                  struct QdepBarriers **out);

void qdep_barriers_free(struct QdepBarriers *p);

// Classifies the 100 decile cells. `classes` receives 100 entries, cell
// `(k, l)` at index `(k−1)·10 + (l−1)`, coded 0 white, 1 blue, 2 pink,
// 3 mixed.
enum QdepStatus qdep_classify(const struct QdepSurface *surface,
                              const struct QdepBarriers *barriers,
                              uint8_t *classes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDEP_H */
