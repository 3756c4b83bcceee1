#ifndef CRSDNET_H
#define CRSDNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every FFI entry point.
 */
typedef enum CrsdStatus {
  CRSD_STATUS_OK = 0,
  CRSD_STATUS_NULL_POINTER = 1,
  CRSD_STATUS_INVALID_UTF8 = 2,
  CRSD_STATUS_INVALID_ARGUMENT = 3,
  CRSD_STATUS_IO = 4,
  CRSD_STATUS_RUNTIME_ERROR = 5,
} CrsdStatus;

/**
 * Opaque dataset handle.
 */
typedef struct CrsdDataset CrsdDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread; valid until the next FFI call on
 * the same thread. Never NULL. Do not free.
 */
const char *crsd_last_error(void);

/**
 * Library version as a malloc'd string; free with `crsd_string_free`.
 */
char *crsd_version(void);

/**
 * Free a string returned by this library. NULL is a no-op.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void crsd_string_free(char *s);

/**
 * Load a review TSV into a dataset handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CrsdStatus crsd_dataset_load_tsv(const char *path, struct CrsdDataset **out);

/**
 * Generate a synthetic dataset handle.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CrsdStatus crsd_dataset_synth(uintptr_t n_users,
                                   uintptr_t n_products,
                                   double spam_fraction,
                                   uint64_t seed,
                                   struct CrsdDataset **out);

/**
 * Number of users in the dataset.
 *
 * # Safety
 * `ds` must be a live handle and `out` a valid pointer.
 */
enum CrsdStatus crsd_dataset_n_users(const struct CrsdDataset *ds, uintptr_t *out);

/**
 * Release a dataset handle. NULL is a no-op.
 *
 * # Safety
 * `ds` must come from this library and not be freed twice.
 */
void crsd_dataset_free(struct CrsdDataset *ds);

/**
 * Run one pipeline setting over a single seed and return the report as a
 * malloc'd JSON string through `out_json` (free with `crsd_string_free`).
 *
 * # Safety
 * `ds` must be a live handle and `out_json` a valid pointer.
 */
enum CrsdStatus crsd_run(const struct CrsdDataset *ds,
                         uint8_t setting,
                         double budget_fraction,
                         uint64_t seed,
                         uintptr_t n_trees,
                         char **out_json);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CRSDNET_H */
