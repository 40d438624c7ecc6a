#ifndef NONLOCAL_FEM_H
#define NONLOCAL_FEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NlfemStatus {
  NLFEM_STATUS_OK = 0,
  NLFEM_STATUS_NULL_POINTER = 1,
  NLFEM_STATUS_INVALID_ARGUMENT = 2,
  NLFEM_STATUS_CONFIG = 3,
  NLFEM_STATUS_NUMERIC = 4,
  NLFEM_STATUS_BRIDGING = 5,
  NLFEM_STATUS_ALIGNMENT = 6,
  NLFEM_STATUS_IO = 7,
  NLFEM_STATUS_BUFFER_TOO_SMALL = 8,
  NLFEM_STATUS_PANIC = 9,
} NlfemStatus;

/**
 * Parsed configuration.
 */
typedef struct NlfemConfig NlfemConfig;

/**
 * Solved field on the parent mesh nodes.
 */
typedef struct NlfemResult NlfemResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *nlfem_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nlfem_version(void);

/**
 * Parse a TOML configuration.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NlfemStatus nlfem_config_parse(const char *text, struct NlfemConfig **out);

/**
 * Override the worker count (0 = all cores).
 *
 * # Safety
 * `config` must come from `nlfem_config_parse` and not be freed.
 */
enum NlfemStatus nlfem_config_set_workers(struct NlfemConfig *config, size_t workers);

/**
 * # Safety
 * `config` must come from `nlfem_config_parse` or be null.
 */
void nlfem_config_free(struct NlfemConfig *config);

/**
 * Solve the configured single run. Writes nothing to disk.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum NlfemStatus nlfem_solve(const struct NlfemConfig *config, struct NlfemResult **out);

/**
 * Number of parent mesh nodes, or 0 for a null handle.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
size_t nlfem_result_node_count(const struct NlfemResult *result);

/**
 * Copy interleaved node coordinates (x0, y0, x1, y1, ...) into `buf`.
 *
 * # Safety
 * `buf` must point to at least `len` writable doubles.
 */
enum NlfemStatus nlfem_result_coordinates(const struct NlfemResult *result,
                                          double *buf,
                                          size_t len);

/**
 * Copy interleaved nodal displacements (ux0, uy0, ...) into `buf`.
 *
 * # Safety
 * `buf` must point to at least `len` writable doubles.
 */
enum NlfemStatus nlfem_result_displacements(const struct NlfemResult *result,
                                            double *buf,
                                            size_t len);

/**
 * Peak-error percentage of a validation case; NaN for other problems.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum NlfemStatus nlfem_result_error_percent(const struct NlfemResult *result, double *out);

/**
 * CSV report text; valid while the result lives.
 *
 * # Safety
 * `result` must be a live handle or null.
 */
const char *nlfem_result_report(const struct NlfemResult *result);

/**
 * # Safety
 * `result` must come from `nlfem_solve` or be null.
 */
void nlfem_result_free(struct NlfemResult *result);

/**
 * Manufactured displacement (g(x)g(y), 0) with g(s) = L s − s².
 *
 * # Safety
 * `out` must point to two writable doubles.
 */
enum NlfemStatus nlfem_reference_displacement(double x, double y, double side, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONLOCAL_FEM_H */
