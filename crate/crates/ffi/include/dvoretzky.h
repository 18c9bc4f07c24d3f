#ifndef DVORETZKY_H
#define DVORETZKY_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define DV_OK 0

#define DV_ERR_NULL 1

#define DV_ERR_INVALID_ARGUMENT 2

#define DV_ERR_PARSE 3

#define DV_ERR_SEQUENCE 4

#define DV_ERR_DENSITY 5

#define DV_ERR_CANTOR 6

#define DV_ERR_KERNEL 7

#define DV_ERR_ENERGY 8

#define DV_ERR_MONTECARLO 9

#define DV_ERR_PANIC 10

#define DV_CLASS_DIVERGES 0

#define DV_CLASS_CONVERGES 1

#define DV_CLASS_INCONCLUSIVE 2

typedef struct DvCantor DvCantor;

typedef struct DvDensity DvDensity;

typedef struct DvSequence DvSequence;

typedef struct DvCoverageStats {
  bool covered;
  /**
   * 0 when the target was not covered.
   */
  uint64_t first_cover_time;
  double uncovered_length;
  uint64_t uncovered_count;
} DvCoverageStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dv_version(void);

/**
 * Copy the last error message of this thread into `buf`, NUL-terminated and
 * truncated to `len`. Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dv_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t dv_sequence_from_json(const char *json, struct DvSequence **out);

/**
 * # Safety
 * `seq` must be null or a handle from `dv_sequence_from_json`.
 */
void dv_sequence_free(struct DvSequence *seq);

/**
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_sequence_first_index(const struct DvSequence *seq, uint64_t *out);

/**
 * ℓ_n.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_sequence_term(const struct DvSequence *seq, uint64_t n, double *out);

/**
 * L_n.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_sequence_partial_sum(const struct DvSequence *seq, uint64_t n, double *out);

/**
 * Σ (ℓ_n - r)_+.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_sequence_positive_part_sum(const struct DvSequence *seq, double r, double *out);

/**
 * Lower estimate of the Hawkes ratio at `horizon`.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_hawkes_d(const struct DvSequence *seq, uint64_t horizon, double *out);

/**
 * ln of the partial Shepp sum and its `DV_CLASS_*` label.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_shepp_series(const struct DvSequence *seq,
                        double a,
                        uint64_t horizon,
                        double *out_log_sum,
                        int32_t *out_class);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t dv_density_from_json(const char *json, struct DvDensity **out);

/**
 * # Safety
 * `d` must be null or a handle from `dv_density_from_json`.
 */
void dv_density_free(struct DvDensity *d);

/**
 * Inverse CDF at u ∈ [0, 1).
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_density_sample(const struct DvDensity *d, double u, double *out);

/**
 * μ_f of the arc centered at `center` with half-length `radius`.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_density_arc_measure(const struct DvDensity *d,
                               double center,
                               double radius,
                               double *out);

/**
 * Essential infimum m_f.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_density_essinf(const struct DvDensity *d, double *out);

/**
 * (ψ_r * f)(s) for the approximate identity of `seq` at radius r.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_kernel_convolve(const struct DvSequence *seq,
                           const struct DvDensity *d,
                           double r,
                           double s,
                           double *out);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t dv_cantor_from_json(const char *json, struct DvCantor **out);

/**
 * # Safety
 * `c` must be null or a handle from `dv_cantor_from_json`.
 */
void dv_cantor_free(struct DvCantor *c);

/**
 * Interval length δ_k at level k.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_cantor_delta(const struct DvCantor *c, uint32_t k, double *out);

/**
 * σ0 of [a, b).
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_cantor_measure(const struct DvCantor *c, double a, double b, double *out);

/**
 * Lower and upper box-dimension estimates over levels lo..=hi.
 *
 * # Safety
 * Handles and output pointers must be valid.
 */
int32_t dv_cantor_box_dimension(const struct DvCantor *c,
                                uint32_t lo,
                                uint32_t hi,
                                double *out_lower,
                                double *out_upper);

/**
 * One covering trial with a finite point target.
 *
 * # Safety
 * Handles and output pointers must be valid; `points` must hold `count` values.
 */
int32_t dv_run_trial(const struct DvDensity *d,
                     const struct DvSequence *seq,
                     uint64_t n,
                     uint64_t seed,
                     const double *points,
                     size_t count,
                     struct DvCoverageStats *out);

/**
 * Riesz energies at each depth (exclusive diagonal) and the trajectory label.
 * A null `cantor` selects the uniform measure.
 *
 * # Safety
 * `depths` and `out_values` must hold `count` values.
 */
int32_t dv_energy_riesz(const struct DvCantor *cantor,
                        double s,
                        const uint32_t *depths,
                        size_t count,
                        double *out_values,
                        int32_t *out_class);

/**
 * Φ^(a) energies for the lengths of `seq`. A null `cantor` selects the uniform measure.
 *
 * # Safety
 * `depths` and `out_values` must hold `count` values.
 */
int32_t dv_energy_phi(const struct DvCantor *cantor,
                      const struct DvSequence *seq,
                      double a,
                      const uint32_t *depths,
                      size_t count,
                      double *out_values,
                      int32_t *out_class);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DVORETZKY_H */
