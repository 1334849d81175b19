#ifndef DEBATETREE_H
#define DEBATETREE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TodStatus {
  TOD_STATUS_OK = 0,
  TOD_STATUS_NULL_ARGUMENT = 1,
  TOD_STATUS_INVALID_UTF8 = 2,
  TOD_STATUS_INVALID_ARGUMENT = 3,
  TOD_STATUS_PARSE = 4,
  TOD_STATUS_NOT_FOUND = 5,
  TOD_STATUS_IO = 6,
  TOD_STATUS_CONFIG = 7,
  TOD_STATUS_PROVIDER = 8,
  TOD_STATUS_INTERNAL = 9,
  TOD_STATUS_PANIC = 10,
} TodStatus;

/**
 * Opaque handle to a parsed tree document.
 */
typedef struct TodTree TodTree;

/**
 * Result of [`tod_dataset_validate`].
 */
typedef struct TodDatasetCounts {
  size_t rows;
  size_t invalid_rows;
  size_t cited_method;
  size_t cited_task;
  size_t not_cited_method;
  size_t not_cited_task;
} TodDatasetCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next call on the same thread.
 */
const char *tod_last_error(void);

/**
 * Library version, static storage.
 */
const char *tod_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void tod_string_free(char *s);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum TodStatus tod_tree_from_json(const char *json, struct TodTree **out);

/**
 * # Safety
 * `tree` must be NULL or a handle from [`tod_tree_from_json`], freed once.
 */
void tod_tree_free(struct TodTree *tree);

/**
 * # Safety
 * `tree` must be a live handle; `out` a valid pointer.
 */
enum TodStatus tod_tree_node_count(const struct TodTree *tree, size_t *out);

/**
 * # Safety
 * `tree` must be a live handle; `out` a valid pointer.
 */
enum TodStatus tod_tree_max_depth(const struct TodTree *tree, size_t *out);

/**
 * Indented text of the whole tree, or of one node when `node_id` is not
 * NULL.
 *
 * # Safety
 * `tree` must be a live handle; `node_id` NULL or NUL-terminated; `out` valid.
 */
enum TodStatus tod_tree_render(const struct TodTree *tree, const char *node_id, char **out);

/**
 * # Safety
 * `tree` must be a live handle; `out` a valid pointer.
 */
enum TodStatus tod_tree_to_json(const struct TodTree *tree, char **out);

/**
 * The expansion gate.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum TodStatus tod_should_expand(bool progression_of_arguments,
                                 bool meaningful_questions,
                                 bool clear_winner,
                                 size_t depth,
                                 size_t max_depth,
                                 bool *out);

/**
 * Checks a dataset file. Returns `Ok` even when rows are invalid; see
 * `invalid_rows`.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` a valid pointer.
 */
enum TodStatus tod_dataset_validate(const char *path, struct TodDatasetCounts *out);

/**
 * Runs one variant on a dataset row with a mock script and default
 * settings. Artifacts go under `out_dir/row-<row>/<variant>/` when
 * `out_dir` is not NULL; the summary is returned through `out_summary`.
 *
 * # Safety
 * String arguments must be NUL-terminated (`out_dir` may be NULL);
 * `out_summary` must be valid.
 */
enum TodStatus tod_run_mock(const char *dataset_path,
                            size_t row,
                            const char *variant,
                            const char *mock_script_path,
                            const char *out_dir,
                            char **out_summary);

/**
 * Renders one of the eight debate templates. `bindings_json` is a JSON
 * object of string values.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be valid.
 */
enum TodStatus tod_render_prompt(const char *template_id, const char *bindings_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEBATETREE_H */
