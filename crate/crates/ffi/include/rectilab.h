#ifndef RECTILAB_H
#define RECTILAB_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_COMPUTATION = 3,
  RL_STATUS_PANIC = 4,
} RlStatus;

// Detector verdict.
typedef enum RlVerdict {
  RL_VERDICT_RECTIFIABLE_LIKE = 0,
  RL_VERDICT_NON_RECTIFIABLE_LIKE = 1,
  RL_VERDICT_INCONCLUSIVE = 2,
} RlVerdict;

// Opaque handle to an immutable discrete measure.
typedef struct RlMeasure RlMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the next call on this thread.
const char *rl_last_error_message(void);

// Uniform samples of a unit segment in ℝ^d.
//
// # Safety
// `out` must be null or point to writable storage for a handle.
enum RlStatus rl_measure_segment(size_t d, size_t resolution, struct RlMeasure **out);

// Samples of a circle arc of the given radius and opening angle.
//
// # Safety
// `out` must be null or point to writable storage for a handle.
enum RlStatus rl_measure_arc(size_t d,
                             double radius,
                             double angle,
                             size_t resolution,
                             struct RlMeasure **out);

// Four-corner Cantor set after the given number of generations.
//
// # Safety
// `out` must be null or point to writable storage for a handle.
enum RlStatus rl_measure_cantor(uint32_t generations, size_t d, struct RlMeasure **out);

// Measure from `len` points stored row-major in `coords` (`len · d` values) with positive `weights`.
//
// # Safety
// `coords` must point to `len · d` doubles and `weights` to `len` doubles.
enum RlStatus rl_measure_from_points(size_t n,
                                     size_t d,
                                     const double *coords,
                                     const double *weights,
                                     size_t len,
                                     struct RlMeasure **out);

// Releases a handle; null is ignored.
//
// # Safety
// `measure` must come from this library and not be used afterwards.
void rl_measure_free(struct RlMeasure *measure);

// Number of support points.
//
// # Safety
// `measure` must be null or a live handle; `out` must be null or writable.
enum RlStatus rl_measure_len(const struct RlMeasure *measure, size_t *out);

// Total mass.
//
// # Safety
// `measure` must be null or a live handle; `out` must be null or writable.
enum RlStatus rl_measure_total_mass(const struct RlMeasure *measure, double *out);

// Exact ρ-variation of `len` values with `arity` components each, stored row-major.
//
// # Safety
// `values` must point to `len · arity` doubles.
enum RlStatus rl_rho_variation(const double *values,
                               size_t len,
                               size_t arity,
                               double rho,
                               double *out);

// `‖V_ρ T μ‖_{L²(μ)}` for the Riesz kernel with the smooth profile on a dyadic grid with
// `per_octave` scales per octave, from twice the diameter down to the minimal spacing.
//
// # Safety
// `measure` must be null or a live handle; `out` must be null or writable.
enum RlStatus rl_variation_l2_norm(const struct RlMeasure *measure,
                                   double rho,
                                   uint32_t per_octave,
                                   double *out);

// Detector verdict at the default thresholds.
//
// # Safety
// `measure` must be null or a live handle; `out` must be null or writable.
enum RlStatus rl_detect(const struct RlMeasure *measure, enum RlVerdict *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RECTILAB_H */
