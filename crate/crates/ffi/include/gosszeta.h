#ifndef GOSSZETA_H
#define GOSSZETA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The first four match the command-line exit codes.
 */
typedef enum GosszetaStatus {
  GOSSZETA_STATUS_OK = 0,
  /**
   * The computation ran but a check failed.
   */
  GOSSZETA_STATUS_MISMATCH = 1,
  GOSSZETA_STATUS_INVALID_ARGUMENT = 2,
  GOSSZETA_STATUS_RESOURCE_LIMIT = 3,
  GOSSZETA_STATUS_NULL_POINTER = 4,
  /**
   * A panic was caught at the boundary.
   */
  GOSSZETA_STATUS_INTERNAL = 5,
} GosszetaStatus;

/**
 * Opaque handle to a finite field F_q.
 */
typedef struct GosszetaField GosszetaField;

/**
 * Creates F_{p^n} with its default modulus.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle to free
 * with [`gosszeta_field_free`].
 */
enum GosszetaStatus gosszeta_field_new(uint32_t p, uint32_t n, struct GosszetaField **out);

/**
 * Releases a field handle. Null is ignored.
 *
 * # Safety
 * `field` must come from [`gosszeta_field_new`] and not be used afterwards.
 */
void gosszeta_field_free(struct GosszetaField *field);

/**
 * The field order q.
 *
 * # Safety
 * `field` must be a live handle or null (which yields 0).
 */
uint32_t gosszeta_field_order(const struct GosszetaField *field);

/**
 * The valuation `v_d` of the power sum for the exponent `(z, m)`, `m` in
 * decimal, by the combinatorial evaluator. `*is_zero` is set when the sum
 * vanishes identically, in which case `*valuation` is left at 0.
 *
 * # Safety
 * `field` must be a live handle, `m` a NUL-terminated string, and both
 * output pointers valid.
 */
enum GosszetaStatus gosszeta_valuation(const struct GosszetaField *field,
                                       int64_t z,
                                       const char *m,
                                       size_t d,
                                       size_t cap,
                                       int64_t *valuation,
                                       bool *is_zero);

/**
 * The greedy decomposition `{d, parts, weight, exists}` as JSON.
 *
 * # Safety
 * `field` must be a live handle, `m` a NUL-terminated string and `json`
 * a valid pointer; free the result with [`gosszeta_string_free`].
 */
enum GosszetaStatus gosszeta_greedy_json(const struct GosszetaField *field,
                                         int64_t z,
                                         const char *m,
                                         size_t d,
                                         char **json);

/**
 * Runs the full check for the finite exponent `(z, m)` and returns the
 * verdict document as JSON. `precision <= 0` selects the default. A false
 * verdict still returns [`GosszetaStatus::Ok`]; read `*verdict`.
 *
 * # Safety
 * As for [`gosszeta_greedy_json`]; `verdict` must be valid.
 */
enum GosszetaStatus gosszeta_verify_json(const struct GosszetaField *field,
                                         int64_t z,
                                         const char *m,
                                         int64_t precision,
                                         char **json,
                                         bool *verdict);

/**
 * As [`gosszeta_verify_json`] for a stream exponent: `spec` is
 * `repeat:DIGITS`, `PREFIX|PERIOD` or `-1`, read to `depth` digits, with
 * degrees up to `d_max`.
 *
 * # Safety
 * As for [`gosszeta_verify_json`], with `spec` NUL-terminated.
 */
enum GosszetaStatus gosszeta_verify_stream_json(const struct GosszetaField *field,
                                                int64_t z,
                                                const char *spec,
                                                size_t depth,
                                                size_t d_max,
                                                int64_t precision,
                                                char **json,
                                                bool *verdict);

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *gosszeta_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void gosszeta_string_free(char *s);

#endif  /* GOSSZETA_H */
