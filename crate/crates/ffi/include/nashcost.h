#ifndef NASHCOST_H
#define NASHCOST_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NcStatus {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  NC_STATUS_INVALID_ARGUMENT = 2,
  NC_STATUS_ASSUMPTION = 3,
  NC_STATUS_SYNTHESIS = 4,
  NC_STATUS_STALE_SOLUTION = 5,
  NC_STATUS_PARSE = 6,
  NC_STATUS_NUMERICAL = 7,
  NC_STATUS_PANIC = 8,
} NcStatus;

/**
 * Opaque model handle.
 */
typedef struct NcModel NcModel;

/**
 * Opaque solution handle.
 */
typedef struct NcSolution NcSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *nc_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void nc_string_free(char *s);

/**
 * Model with the default (estimated) coefficients.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum NcStatus nc_model_new_default(struct NcModel **out);

/**
 * Model from a JSON object of coefficients; missing keys take defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum NcStatus nc_model_from_json(const char *json, struct NcModel **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void nc_model_free(struct NcModel *model);

/**
 * Hex SHA-256 of the model; free with `nc_string_free`.
 *
 * # Safety
 * `model` must be a live handle.
 */
char *nc_model_hash(const struct NcModel *model);

/**
 * Coefficients as JSON; free with `nc_string_free`.
 *
 * # Safety
 * `model` must be a live handle.
 */
char *nc_model_params_json(const struct NcModel *model);

/**
 * `NC_STATUS_OK` if both design assumptions hold, `NC_STATUS_ASSUMPTION`
 * with the failing checks in the error message otherwise.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum NcStatus nc_check_assumptions(const struct NcModel *model);

/**
 * Synthesizes gains for the initial state `x0[0..n]` with default solver
 * options.
 *
 * # Safety
 * `model` must be a live handle, `x0` must point to `n` doubles and `out`
 * must be writable.
 */
enum NcStatus nc_synthesize(const struct NcModel *model,
                            const double *x0,
                            size_t n,
                            struct NcSolution **out);

/**
 * # Safety
 * `solution` must come from this library and not have been freed.
 */
void nc_solution_free(struct NcSolution *solution);

/**
 * Writes `[V1(x0), V2(x0)]` to `out[0..2]`.
 *
 * # Safety
 * `solution` must be a live handle and `out` must hold two doubles.
 */
enum NcStatus nc_solution_costs(const struct NcSolution *solution, double *out);

/**
 * Copies gain `player` (1 or 2) row-major into `out[0..len]`; `len` must
 * equal the gain's size, which `nc_solution_gain_len` reports.
 *
 * # Safety
 * `solution` must be a live handle and `out` must hold `len` doubles.
 */
enum NcStatus nc_solution_gain(const struct NcSolution *solution,
                               uint32_t player,
                               double *out,
                               size_t len);

/**
 * Number of entries of gain `player`, or 0 on error.
 *
 * # Safety
 * `solution` must be a live handle.
 */
size_t nc_solution_gain_len(const struct NcSolution *solution, uint32_t player);

/**
 * Closed-loop spectral radius, or NaN for a null handle.
 *
 * # Safety
 * `solution` must be a live handle.
 */
double nc_solution_spectral_radius(const struct NcSolution *solution);

/**
 * Re-checks the certificate against `model`; `*valid` is set to whether
 * every check passes with at least `margin`. A solution for a different
 * model gives `NC_STATUS_STALE_SOLUTION`.
 *
 * # Safety
 * Handles must be live and `valid` writable.
 */
enum NcStatus nc_solution_verify(const struct NcModel *model,
                                 const struct NcSolution *solution,
                                 double margin,
                                 bool *valid);

/**
 * Solution as JSON; free with `nc_string_free`.
 *
 * # Safety
 * `solution` must be a live handle.
 */
char *nc_solution_to_json(const struct NcSolution *solution);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum NcStatus nc_solution_from_json(const char *json, struct NcSolution **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NASHCOST_H */
