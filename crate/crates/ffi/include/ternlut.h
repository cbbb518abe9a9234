#ifndef TERNLUT_H
#define TERNLUT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TlExecMode {
  TL_EXEC_MODE_TERNARY = 0,
  /**
   * Ternary weights split into a +1 plane and a -1 plane over a binary LUT.
   */
  TL_EXEC_MODE_BITSERIAL = 1,
} TlExecMode;

/**
 * LUT flavour for [`tl_path_generate`].
 */
typedef enum TlLutMode {
  TL_LUT_MODE_TERNARY = 0,
  TL_LUT_MODE_BINARY = 1,
} TlLutMode;

typedef enum TlStage {
  TL_STAGE_PREFILL = 0,
  TL_STAGE_DECODE = 1,
} TlStage;

typedef enum TlStatus {
  TL_STATUS_OK = 0,
  TL_STATUS_NULL_POINTER = 1,
  TL_STATUS_VALIDATION = 2,
  TL_STATUS_SCHEDULE = 3,
  TL_STATUS_MISMATCH = 4,
  TL_STATUS_INTERNAL = 5,
} TlStatus;

/**
 * Packed ternary weight matrix.
 */
typedef struct TlPacked TlPacked;

/**
 * Compiled build path.
 */
typedef struct TlPath TlPath;

/**
 * Heap bytes owned by the library; release with [`tl_bytes_free`].
 */
typedef struct TlBytes {
  uint8_t *data;
  size_t len;
} TlBytes;

/**
 * Operation counts of one GEMM call.
 */
typedef struct TlCensus {
  uint64_t construct_adds;
  uint64_t queries;
  uint64_t merge_adds;
  uint64_t reduce_adds;
} TlCensus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the next failing call.
 */
const char *tl_last_error(void);

/**
 * Compiles a build path for `c` inputs with reads at least `depth` steps behind writes.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum TlStatus tl_path_generate(enum TlLutMode mode,
                               uint32_t c,
                               uint32_t depth,
                               struct TlPath **out);

/**
 * Loads a path from PLTP bytes.
 *
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be valid for writes.
 */
enum TlStatus tl_path_from_bytes(const uint8_t *data, size_t len, struct TlPath **out);

/**
 * Serializes a path to PLTP bytes.
 *
 * # Safety
 * `path` must be a live handle and `out` valid for writes.
 */
enum TlStatus tl_path_to_bytes(const struct TlPath *path, struct TlBytes *out);

/**
 * Number of construction steps, or 0 for a null handle.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
size_t tl_path_steps(const struct TlPath *path);

/**
 * Smallest write-to-read distance in steps, or 0 if no step reads a written entry.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
size_t tl_path_min_raw_distance(const struct TlPath *path);

/**
 * Identity used to match packed weights with their path.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
uint64_t tl_path_hash(const struct TlPath *path);

/**
 * # Safety
 * `path` must be null or a handle not yet freed.
 */
void tl_path_free(struct TlPath *path);

/**
 * Packs a row-major `rows`×`cols` matrix of -1/0/1 values.
 *
 * # Safety
 * `weights` must point to `rows * cols` values; `path` must be live; `out` valid for writes.
 */
enum TlStatus tl_pack_ternary(const struct TlPath *path,
                              const int8_t *weights,
                              size_t rows,
                              size_t cols,
                              struct TlPacked **out);

/**
 * Loads packed weights from PLTW bytes.
 *
 * # Safety
 * `data` must point to `len` bytes; `out` valid for writes.
 */
enum TlStatus tl_packed_from_bytes(const uint8_t *data, size_t len, struct TlPacked **out);

/**
 * Serializes packed weights to PLTW bytes.
 *
 * # Safety
 * `packed` must be live and `out` valid for writes.
 */
enum TlStatus tl_packed_to_bytes(const struct TlPacked *packed, struct TlBytes *out);

/**
 * Writes the matrix dimensions of a packed stream.
 *
 * # Safety
 * All pointers must be valid.
 */
enum TlStatus tl_packed_shape(const struct TlPacked *packed, size_t *rows, size_t *cols);

/**
 * # Safety
 * `packed` must be null or a handle not yet freed.
 */
void tl_packed_free(struct TlPacked *packed);

/**
 * `y = W·x` with W the packed M×K matrix and x a row-major K×N matrix of signed 8-bit-range
 * values. `y` receives M×N row-major results. `census` may be null. With `check` set the
 * result is compared to a naive GEMM and `TL_STATUS_MISMATCH` returned on any difference.
 *
 * # Safety
 * `x` must hold `k * n` values, `y` room for `m * n`; handles must be live.
 */
enum TlStatus tl_gemm(const struct TlPacked *packed,
                      const struct TlPath *path,
                      enum TlExecMode mode,
                      const int32_t *x,
                      size_t k,
                      size_t n,
                      int32_t *y,
                      struct TlCensus *census,
                      bool check);

/**
 * Simulates every BitLinear kernel of one block of `model` and returns the report as a
 * JSON string (free with [`tl_string_free`]). `config_json` and `schedule_json` may be null
 * for the defaults.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` valid for writes.
 */
enum TlStatus tl_simulate(const char *config_json,
                          const char *schedule_json,
                          const char *model,
                          enum TlStage stage,
                          enum TlExecMode mode,
                          char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void tl_string_free(char *s);

/**
 * # Safety
 * `bytes` must have been filled by this library and not yet freed.
 */
void tl_bytes_free(struct TlBytes bytes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TERNLUT_H */
