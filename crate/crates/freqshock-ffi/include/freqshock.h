#ifndef FREQSHOCK_H
#define FREQSHOCK_H

/* This header is generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define FS_OK 0

/**
 * Runtime or data error; see fs_last_error_message.
 */
#define FS_ERR_RUNTIME 1

/**
 * Invalid argument or validation failure.
 */
#define FS_ERR_INVALID 2

/**
 * A required pointer argument was NULL.
 */
#define FS_ERR_NULL 3

/**
 * A string argument was not valid UTF-8.
 */
#define FS_ERR_UTF8 4

/**
 * The provided output buffer is too small.
 */
#define FS_ERR_BUFFER 5

/**
 * An internal panic was caught at the boundary.
 */
#define FS_ERR_PANIC 6

/**
 * Opaque simulated language model handle.
 */
typedef struct FsSim FsSim;

/**
 * Opaque synthetic world handle.
 */
typedef struct FsWorld FsWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the most recent error message on this thread into `buf`.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes.
 */
int fs_last_error_message(char *buf, size_t cap);

/**
 * Library version as a static string.
 */
const char *fs_version(void);

/**
 * Generates a synthetic world. On success stores a new handle in `out`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
int fs_world_generate(size_t relations,
                      size_t entities,
                      size_t facts,
                      double zipf_exponent,
                      uint64_t seed,
                      struct FsWorld **out);

/**
 * Loads a world previously written with fs_world_save.
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string and `out` a valid pointer.
 */
int fs_world_load(const char *dir, struct FsWorld **out);

/**
 * Writes the world's fact, prior, knowledge, and manifest files into `dir`.
 *
 * # Safety
 * `world` must be a live handle and `dir` a valid NUL-terminated string.
 */
int fs_world_save(const struct FsWorld *world, const char *dir);

/**
 * Number of facts in the world's knowledge base.
 *
 * # Safety
 * `world` must be a live handle.
 */
size_t fs_world_fact_count(const struct FsWorld *world);

/**
 * Releases a world handle. NULL is a no-op.
 *
 * # Safety
 * `world` must be NULL or a handle not freed before.
 */
void fs_world_free(struct FsWorld *world);

/**
 * Builds a simulated model over the world's priors and knowledge table.
 *
 * # Safety
 * `world` must be a live handle and `out` a valid pointer.
 */
int fs_sim_new(const struct FsWorld *world, struct FsSim **out);

/**
 * Ranks the top `top_k` candidate answers for (subject, relation) under a
 * predictor variant ("zs" or "rr" on a pretrained handle) and writes them
 * as a JSON array of {"entity", "score"} objects.
 *
 * # Safety
 * `sim` must be a live handle, string arguments valid NUL-terminated
 * strings, and `buf` must point to `cap` writable bytes.
 */
int fs_sim_predict_json(const struct FsSim *sim,
                        const char *variant,
                        const char *subject,
                        const char *relation,
                        size_t top_k,
                        char *buf,
                        size_t cap);

/**
 * Releases a simulated-model handle. NULL is a no-op.
 *
 * # Safety
 * `sim` must be NULL or a handle not freed before.
 */
void fs_sim_free(struct FsSim *sim);

/**
 * Runs the full default pipeline at `seed`, writes all artifacts under
 * `out_dir`, and copies the rendered strategy table into `buf`.
 *
 * # Safety
 * `out_dir` must be a valid NUL-terminated string and `buf` must point to
 * `cap` writable bytes.
 */
int fs_recipe_run(uint64_t seed, const char *out_dir, char *buf, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREQSHOCK_H */
