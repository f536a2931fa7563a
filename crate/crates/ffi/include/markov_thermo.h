#ifndef MARKOV_THERMO_H
#define MARKOV_THERMO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Nonzero codes follow the command-line exit codes, with
 * extra values for misuse of the interface itself.
 */
typedef enum MtStatus {
  MT_STATUS_OK = 0,
  /**
   * Bad input or configuration.
   */
  MT_STATUS_INVALID_INPUT = 2,
  /**
   * A numerical method did not converge.
   */
  MT_STATUS_NUMERICAL = 3,
  /**
   * An enumeration or memory budget was exceeded.
   */
  MT_STATUS_BUDGET = 4,
  MT_STATUS_NULL_POINTER = 5,
  /**
   * Internal panic; the handle arguments should be considered suspect.
   */
  MT_STATUS_PANIC = 6,
} MtStatus;

/**
 * A potential on a shift.
 */
typedef struct MtPotential MtPotential;

/**
 * A truncated Markov shift together with the full shift it came from.
 */
typedef struct MtShift MtShift;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Full shift on letters `0..n`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MtStatus mt_shift_full(uint32_t n, struct MtShift **out);

/**
 * Finite shift given by an `n x n` 0/1 transition matrix in row-major order.
 *
 * # Safety
 * `entries` must point to `n * n` readable bytes and `out` must be valid
 * for writes.
 */
enum MtStatus mt_shift_matrix(const uint8_t *entries, uint32_t n, struct MtShift **out);

/**
 * Full shift on the letters `first, first + 1, ...`, truncated to the first
 * `letters` of them.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MtStatus mt_shift_countable(uint32_t first, size_t letters, struct MtShift **out);

/**
 * Number of letters kept by the truncation.
 *
 * # Safety
 * `shift` must be a live handle or null.
 */
size_t mt_shift_letters(const struct MtShift *shift);

/**
 * # Safety
 * `shift` must come from an `mt_shift_*` constructor and not be used again.
 */
void mt_shift_free(struct MtShift *shift);

/**
 * Potential that is constant everywhere.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MtStatus mt_potential_constant(double value, struct MtPotential **out);

/**
 * Potential depending on the first letter: `values[i]` on letter `first + i`.
 *
 * # Safety
 * `values` must point to `n` readable doubles and `out` must be valid for
 * writes.
 */
enum MtStatus mt_potential_per_letter(const double *values,
                                      size_t n,
                                      uint32_t first,
                                      struct MtPotential **out);

/**
 * `f(x) = scale * log(x_0 + offset)`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum MtStatus mt_potential_log_letter(double scale, double offset, struct MtPotential **out);

/**
 * # Safety
 * `f` must come from an `mt_potential_*` constructor and not be used again.
 */
void mt_potential_free(struct MtPotential *f);

/**
 * Critical exponent `d(f)` and whether the series diverges there. Finite
 * alphabets report negative infinity.
 *
 * # Safety
 * Handles must be live; `d` and `diverges` must be valid for writes.
 */
enum MtStatus mt_critical_exponent(const struct MtShift *shift,
                                   const struct MtPotential *f,
                                   double *d,
                                   bool *diverges);

/**
 * Bowen root `delta` with `P(-delta f) = 0`, to tolerance `tol`.
 *
 * # Safety
 * Handles must be live; `delta` must be valid for writes.
 */
enum MtStatus mt_solve_delta(const struct MtShift *shift,
                             const struct MtPotential *f,
                             double tol,
                             double *delta);

/**
 * Closed-orbit counts at level `t`: `m` counts periodic points, `r` prime
 * orbits, both with `S_n f <= t`.
 *
 * # Safety
 * Handles must be live; `m` and `r` must be valid for writes.
 */
enum MtStatus mt_count_orbits(const struct MtShift *shift,
                              const struct MtPotential *f,
                              double delta,
                              double t,
                              double *m,
                              double *r);

/**
 * Copies the last error message of this thread into `buf` (nul-terminated,
 * truncated to `len`). Returns the full message length without the nul, or
 * 0 when there is no error.
 *
 * # Safety
 * `buf` must be valid for `len` byte writes, or null with `len == 0`.
 */
size_t mt_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOV_THERMO_H */
