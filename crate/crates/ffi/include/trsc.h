#ifndef TRSC_H
#define TRSC_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TrscStatus {
  TRSC_STATUS_OK = 0,
  TRSC_STATUS_NULL_POINTER = 1,
  TRSC_STATUS_OUT_OF_RANGE = 2,
  TRSC_STATUS_CONFIG = 3,
  TRSC_STATUS_INPUT = 4,
  TRSC_STATUS_BUFFER_TOO_SMALL = 5,
  TRSC_STATUS_PANIC = 6,
} TrscStatus;

/**
 * Engine handle. Not safe to share between threads without locking.
 */
typedef struct TrscEngine TrscEngine;

/**
 * Cost summary of one operation.
 */
typedef struct TrscCost {
  uint64_t cycles;
  double energy_pj;
  /**
   * Output logic energy.
   */
  double e_c_pj;
  /**
   * Shift, write, TR and read energy.
   */
  double e_r_pj;
  /**
   * Adder energy.
   */
  double e_a_pj;
} TrscCost;

typedef struct TrscMulResult {
  uint64_t count;
  uint64_t segments;
  struct TrscCost cost;
} TrscMulResult;

typedef struct TrscDotResult {
  int64_t value;
  uint64_t positive;
  uint64_t negative;
  uint64_t segments;
  uint64_t rounds;
  struct TrscCost cost;
} TrscDotResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an engine with default accounting.
 *
 * `parallelism` must be a power of two in 4..=64 and below `2^width`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum TrscStatus trsc_engine_new(uint32_t width,
                                uint32_t parallelism,
                                bool seed_compressed,
                                bool signed_mode,
                                struct TrscEngine **out);

/**
 * Creates an engine from a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writing.
 */
enum TrscStatus trsc_engine_from_config(const char *path, struct TrscEngine **out);

/**
 * Releases an engine. Null is ignored.
 *
 * # Safety
 * `engine` must come from `trsc_engine_new*` and not be used afterwards.
 */
void trsc_engine_free(struct TrscEngine *engine);

/**
 * Multiplies `a` by `b` through the racetrack pipeline.
 *
 * # Safety
 * `engine` must be a live handle and `out` valid for writing.
 */
enum TrscStatus trsc_multiply(struct TrscEngine *engine,
                              uint32_t a,
                              uint32_t b,
                              struct TrscMulResult *out);

/**
 * Dot product of `len` pairs. `signs` may be null for all-positive terms;
 * otherwise each entry is `1` or `-1` and the engine must be signed.
 *
 * # Safety
 * `a` and `b` (and `signs` when non-null) must point to `len` elements.
 */
enum TrscStatus trsc_dot_product(struct TrscEngine *engine,
                                 const uint32_t *a,
                                 const uint32_t *b,
                                 const int8_t *signs,
                                 size_t len,
                                 struct TrscDotResult *out);

/**
 * Same as [`trsc_dot_product`] but on the bit-serial counter baseline.
 *
 * # Safety
 * As for [`trsc_dot_product`].
 */
enum TrscStatus trsc_baseline_dot(const struct TrscEngine *engine,
                                  const uint32_t *a,
                                  const uint32_t *b,
                                  size_t len,
                                  struct TrscDotResult *out);

/**
 * Writes the `2^width` bits of the SN (or UN when `unary`) of `value` as
 * 0/1 bytes. `buf_len` must be at least `2^width`.
 *
 * # Safety
 * `buf` must be valid for `buf_len` bytes.
 */
enum TrscStatus trsc_encode(uint32_t width,
                            uint32_t value,
                            bool unary,
                            uint8_t *buf,
                            size_t buf_len);

/**
 * Exact `popcount(SN(a) & UN(b))`.
 *
 * # Safety
 * `out` must be valid for writing.
 */
enum TrscStatus trsc_mul_reference(uint32_t width, uint32_t a, uint32_t b, uint64_t *out);

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *trsc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *trsc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRSC_H */
