#ifndef UAV_MCLP_H
#define UAV_MCLP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Altitude handling for [`um_solve_oracle`].
 */
#define UM_ALTITUDE_FREE -1

#define UM_ALTITUDE_BEST_LAYER -2

/**
 * Status codes returned by every function.
 */
typedef enum UmStatus {
  UM_STATUS_OK = 0,
  UM_STATUS_NULL_POINTER = 1,
  UM_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad configuration, instance data, or file.
   */
  UM_STATUS_CONFIG = 3,
  /**
   * The solver failed on valid input.
   */
  UM_STATUS_SOLVER = 4,
  /**
   * A memory or enumeration budget was exceeded.
   */
  UM_STATUS_BUDGET = 5,
  /**
   * Output buffer too small; the required length is still reported.
   */
  UM_STATUS_BUFFER_TOO_SMALL = 6,
  UM_STATUS_PANIC = 7,
} UmStatus;

/**
 * Opaque problem instance.
 */
typedef struct UmInstance UmInstance;

/**
 * Opaque solver report.
 */
typedef struct UmReport UmReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Free with
 * [`um_string_free`].
 */
char *um_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void um_string_free(char *s);

/**
 * Generates an instance. `settings_json` holds generator settings (`cells`,
 * `t_count`, `w_bar`, `d_bar`, `delta_*`, `trend_*`) and may be null.
 *
 * # Safety
 * `settings_json` is null or a valid C string; `out` is writable.
 */
enum UmStatus um_instance_generate(const char *settings_json,
                                   uint64_t seed,
                                   struct UmInstance **out);

/**
 * Reads an instance JSON file.
 *
 * # Safety
 * `path` is a valid C string; `out` is writable.
 */
enum UmStatus um_instance_load(const char *path, struct UmInstance **out);

/**
 * Parses an instance from JSON text.
 *
 * # Safety
 * `json` is a valid C string; `out` is writable.
 */
enum UmStatus um_instance_from_json(const char *json, struct UmInstance **out);

/**
 * Serializes an instance to JSON. Free the result with [`um_string_free`].
 *
 * # Safety
 * `inst` is a live handle; `out` is writable.
 */
enum UmStatus um_instance_to_json(const struct UmInstance *inst, char **out);

/**
 * Writes the user count and interval count.
 *
 * # Safety
 * `inst` is a live handle; `n` and `t_count` are writable.
 */
enum UmStatus um_instance_dims(const struct UmInstance *inst, size_t *n, size_t *t_count);

/**
 * # Safety
 * `inst` is null or a handle from this library, freed at most once.
 */
void um_instance_free(struct UmInstance *inst);

/**
 * True objective of a trajectory given as `len = 3·T` values
 * `x0, y0, h0, x1, ...`.
 *
 * # Safety
 * `inst` is a live handle; `xyz` points to `len` doubles; `value` is writable.
 */
enum UmStatus um_evaluate(const struct UmInstance *inst,
                          const double *xyz,
                          size_t len,
                          double *value);

/**
 * Runs the Lagrangean decomposition. `config_json` is an LDA config object
 * or null for defaults.
 *
 * # Safety
 * `inst` is a live handle; `config_json` is null or a valid C string; `out`
 * is writable.
 */
enum UmStatus um_solve_lda(const struct UmInstance *inst,
                           const char *config_json,
                           struct UmReport **out);

/**
 * Runs the continuum approximation. `config_json` is a CA config object or
 * null for defaults.
 *
 * # Safety
 * As [`um_solve_lda`].
 */
enum UmStatus um_solve_ca(const struct UmInstance *inst,
                          const char *config_json,
                          struct UmReport **out);

/**
 * Exact optimum over an `nx × ny × nh` lattice. `altitude` is
 * [`UM_ALTITUDE_FREE`], [`UM_ALTITUDE_BEST_LAYER`], or a layer index.
 *
 * # Safety
 * `inst` is a live handle; `out` is writable.
 */
enum UmStatus um_solve_oracle(const struct UmInstance *inst,
                              size_t nx,
                              size_t ny,
                              size_t nh,
                              int32_t altitude,
                              struct UmReport **out);

/**
 * True objective of the report's trajectory.
 *
 * # Safety
 * `report` is a live handle; `value` is writable.
 */
enum UmStatus um_report_objective(const struct UmReport *report, double *value);

/**
 * Copies the trajectory as `x0, y0, h0, ...` into `buf`. `len` receives the
 * required count `3·T`; with a null or short `buf` the call returns
 * [`UmStatus::BufferTooSmall`] after setting `len`.
 *
 * # Safety
 * `report` is a live handle; `buf` is null or holds `cap` doubles; `len` is
 * writable.
 */
enum UmStatus um_report_trajectory(const struct UmReport *report,
                                   double *buf,
                                   size_t cap,
                                   size_t *len);

/**
 * Full solver output as JSON. Free with [`um_string_free`].
 *
 * # Safety
 * `report` is a live handle; `out` is writable.
 */
enum UmStatus um_report_to_json(const struct UmReport *report, char **out);

/**
 * # Safety
 * `report` is null or a handle from this library, freed at most once.
 */
void um_report_free(struct UmReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UAV_MCLP_H */
