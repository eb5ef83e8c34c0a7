#ifndef SIMCUT_H
#define SIMCUT_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SimcutStatus {
  SIMCUT_STATUS_OK = 0,
  SIMCUT_STATUS_NULL_ARGUMENT = 1,
  SIMCUT_STATUS_INVALID_UTF8 = 2,
  SIMCUT_STATUS_INVALID_INPUT = 3,
  SIMCUT_STATUS_INFEASIBLE = 4,
  SIMCUT_STATUS_PROVER_FAILED = 5,
  SIMCUT_STATUS_INTERNAL = 6,
  SIMCUT_STATUS_PANIC = 7,
} SimcutStatus;

/**
 * Opaque instance handle.
 */
typedef struct SimcutInstance SimcutInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *simcut_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *simcut_version(void);

/**
 * Parses an instance from its JSON file layout (1-based vertices).
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum SimcutStatus simcut_instance_from_json(const char *json, struct SimcutInstance **out);

/**
 * Releases an instance handle. Null is ignored.
 *
 * # Safety
 * `inst` must be null or a handle returned by this library, not yet freed.
 */
void simcut_instance_free(struct SimcutInstance *inst);

/**
 * Vertex count, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t simcut_instance_n(const struct SimcutInstance *inst);

/**
 * Number of simultaneous instances, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t simcut_instance_k(const struct SimcutInstance *inst);

/**
 * Runs the full pipeline. `config_json` may be null or partial; missing
 * fields take their defaults. The run report is written to `out_json` also
 * when the status is `Infeasible`.
 *
 * # Safety
 * Pointers must be valid; `out_json` receives a string owned by the caller.
 */
enum SimcutStatus simcut_solve(const struct SimcutInstance *inst,
                               const char *config_json,
                               char **out_json);

/**
 * Exact simultaneous optimum by enumeration. `cap` bounds `n`; 0 uses the
 * default.
 *
 * # Safety
 * Pointers must be valid; `out_json` receives a string owned by the caller.
 */
enum SimcutStatus simcut_oracle(const struct SimcutInstance *inst, size_t cap, char **out_json);

/**
 * Runs the ratio prover. `config_json` may be null or partial. The
 * certificate is written to `out_json` for every verdict; the status is
 * `ProverFailed` unless the bound was proved.
 *
 * # Safety
 * Pointers must be valid; `out_json` receives a string owned by the caller.
 */
enum SimcutStatus simcut_prove(const char *config_json, char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void simcut_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMCUT_H */
