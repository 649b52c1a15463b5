/* C interface to the occsim occupation-similarity library. */

#ifndef OCCSIM_H
#define OCCSIM_H

/* Generated by cbindgen from occsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible entry point.
 */
typedef enum OccsimStatus {
  OCCSIM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  OCCSIM_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  OCCSIM_STATUS_INVALID_UTF8 = 2,
  /**
   * An argument was out of range or otherwise invalid.
   */
  OCCSIM_STATUS_INVALID_ARGUMENT = 3,
  /**
   * A named entity (measure, occupation id) does not exist.
   */
  OCCSIM_STATUS_NOT_FOUND = 4,
  /**
   * Input files failed to parse or validate.
   */
  OCCSIM_STATUS_PARSE_ERROR = 5,
  /**
   * The underlying file system operation failed.
   */
  OCCSIM_STATUS_IO_ERROR = 6,
} OccsimStatus;

/**
 * A computed similarity matrix with cached C strings.
 */
typedef struct OccsimMatrix OccsimMatrix;

/**
 * A loaded taxonomy plus its block weights and cached C strings.
 */
typedef struct OccsimTaxonomy OccsimTaxonomy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *occsim_version(void);

/**
 * Message for the most recent failure on this thread. Valid until the
 * next failing call on the same thread.
 */
const char *occsim_last_error(void);

/**
 * Load the four canonical taxonomy CSVs from `dir` and precompute block
 * weights. On success `*out` owns the new handle.
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum OccsimStatus occsim_taxonomy_load(const char *dir, struct OccsimTaxonomy **out);

/**
 * Free a taxonomy handle. Null is a no-op.
 *
 * # Safety
 * `taxonomy` must come from [`occsim_taxonomy_load`] and not be freed twice.
 */
void occsim_taxonomy_free(struct OccsimTaxonomy *taxonomy);

/**
 * Number of occupations; 0 when the handle is null.
 *
 * # Safety
 * `taxonomy` must be a live handle or null.
 */
size_t occsim_taxonomy_occupation_count(const struct OccsimTaxonomy *taxonomy);

/**
 * Number of skills; 0 when the handle is null.
 *
 * # Safety
 * `taxonomy` must be a live handle or null.
 */
size_t occsim_taxonomy_skill_count(const struct OccsimTaxonomy *taxonomy);

/**
 * Number of skill blocks; 0 when the handle is null.
 *
 * # Safety
 * `taxonomy` must be a live handle or null.
 */
size_t occsim_taxonomy_block_count(const struct OccsimTaxonomy *taxonomy);

/**
 * Occupation id at `index`, or null when out of range. The string lives
 * as long as the taxonomy handle.
 *
 * # Safety
 * `taxonomy` must be a live handle or null.
 */
const char *occsim_taxonomy_occupation_id(const struct OccsimTaxonomy *taxonomy, size_t index);

/**
 * Project the taxonomy under a measure named as in the CLI (`jacc_sym`,
 * `jacc_multi_sym`, `jacc_asym`, `jacc`, `coll_sym`, `coll`, `gjacc_sym`,
 * `gjacc`, `colf_sym`, `colf`). On success `*out` owns the matrix.
 *
 * # Safety
 * `taxonomy` must be a live handle; `measure` a valid string; `out` valid.
 */
enum OccsimStatus occsim_project(const struct OccsimTaxonomy *taxonomy,
                                 const char *measure,
                                 struct OccsimMatrix **out);

/**
 * Free a matrix handle. Null is a no-op.
 *
 * # Safety
 * `matrix` must come from this library and not be freed twice.
 */
void occsim_matrix_free(struct OccsimMatrix *matrix);

/**
 * Number of occupations the matrix covers; 0 when the handle is null.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
size_t occsim_matrix_size(const struct OccsimMatrix *matrix);

/**
 * Name of the measure that produced the matrix, or null.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
const char *occsim_matrix_measure(const struct OccsimMatrix *matrix);

/**
 * Occupation id at `index`, or null when out of range.
 *
 * # Safety
 * `matrix` must be a live handle or null.
 */
const char *occsim_matrix_id(const struct OccsimMatrix *matrix, size_t index);

/**
 * Similarity value at (source, target) written to `*out`.
 *
 * # Safety
 * `matrix` must be a live handle; `out` a valid pointer.
 */
enum OccsimStatus occsim_matrix_value(const struct OccsimMatrix *matrix,
                                      size_t source,
                                      size_t target,
                                      double *out);

/**
 * Top-k most similar occupations for `source_id`, as indices into the
 * matrix (resolve them with [`occsim_matrix_id`]). `out_indices` must have
 * room for `k` entries; `*out_len` receives how many were written (k is
 * clamped to the candidate count).
 *
 * # Safety
 * `matrix` must be a live handle; `source_id` a valid string;
 * `out_indices` must point to at least `k` writable entries.
 */
enum OccsimStatus occsim_matrix_rank(const struct OccsimMatrix *matrix,
                                     const char *source_id,
                                     size_t k,
                                     size_t *out_indices,
                                     size_t *out_len);

/**
 * Write the matrix as `source_id,target_id,value` CSV (diagonal omitted).
 *
 * # Safety
 * `matrix` must be a live handle; `path` a valid string.
 */
enum OccsimStatus occsim_matrix_write_csv(const struct OccsimMatrix *matrix, const char *path);

/**
 * Write the matrix in the binary cache format.
 *
 * # Safety
 * `matrix` must be a live handle; `path` a valid string.
 */
enum OccsimStatus occsim_matrix_write_binary(const struct OccsimMatrix *matrix, const char *path);

/**
 * Read a matrix from the binary cache format.
 *
 * # Safety
 * `path` must be a valid string; `out` a valid pointer.
 */
enum OccsimStatus occsim_matrix_read_binary(const char *path, struct OccsimMatrix **out);

/**
 * Rank-biased overlap of two duplicate-free ranked lists of strings.
 * `max_depth` of 0 means no truncation cap. Writes the value and the
 * residual tail mass.
 *
 * # Safety
 * The list pointers must reference `len_a`/`len_b` valid strings;
 * `out_value` and `out_residual` must be valid pointers.
 */
enum OccsimStatus occsim_rbo(const char *const *list_a,
                             size_t len_a,
                             const char *const *list_b,
                             size_t len_b,
                             double p,
                             size_t max_depth,
                             double *out_value,
                             double *out_residual);

/**
 * Contribution of the first `depth` ranks to the full RBO value.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum OccsimStatus occsim_rbo_weight(double p, size_t depth, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OCCSIM_H */
