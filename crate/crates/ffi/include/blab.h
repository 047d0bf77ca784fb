#ifndef BLAB_H
#define BLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BlabStatus {
  BLAB_STATUS_OK = 0,
  BLAB_STATUS_NULL_POINTER = 1,
  BLAB_STATUS_INVALID_UTF8 = 2,
  BLAB_STATUS_CONFIG = 3,
  BLAB_STATUS_IO = 4,
  BLAB_STATUS_NUMERICAL = 5,
  BLAB_STATUS_PANIC = 6,
} BlabStatus;

typedef enum BlabCommand {
  BLAB_COMMAND_VERIFY_IDENTITIES = 0,
  BLAB_COMMAND_FIT_EXPANSION = 1,
  BLAB_COMMAND_REDUCE = 2,
  BLAB_COMMAND_CONTINUATION = 3,
} BlabCommand;

/**
 * A validated run configuration.
 */
typedef struct BlabConfig BlabConfig;

/**
 * The checks and artifacts of one run, with the config and seed that produced them.
 */
typedef struct BlabOutcome BlabOutcome;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *blab_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *blab_last_error_message(void);

/**
 * Parse and validate a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum BlabStatus blab_config_parse(const char *toml, struct BlabConfig **out);

/**
 * Read, parse and validate a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum BlabStatus blab_config_load(const char *path, struct BlabConfig **out);

/**
 * # Safety
 * `cfg` must come from `blab_config_parse`/`blab_config_load` or be NULL.
 */
void blab_config_free(struct BlabConfig *cfg);

/**
 * Run one command. A run whose checks fail still returns `Ok`; query
 * `blab_outcome_passed` for the verdict.
 *
 * # Safety
 * `cfg` must be a live config handle and `out` a writable pointer.
 */
enum BlabStatus blab_run(const struct BlabConfig *cfg,
                         enum BlabCommand command,
                         uint64_t seed,
                         struct BlabOutcome **out);

/**
 * # Safety
 * `outcome` must be a live outcome handle and `passed` writable.
 */
enum BlabStatus blab_outcome_passed(const struct BlabOutcome *outcome, bool *passed);

/**
 * Number of checks and how many of them failed.
 *
 * # Safety
 * `outcome` must be a live outcome handle; `total` and `failed` writable.
 */
enum BlabStatus blab_outcome_counts(const struct BlabOutcome *outcome,
                                    size_t *total,
                                    size_t *failed);

/**
 * The JSON summary as a new string; release it with `blab_string_free`.
 *
 * # Safety
 * `outcome` must be a live outcome handle and `json` writable.
 */
enum BlabStatus blab_outcome_summary_json(const struct BlabOutcome *outcome, char **json);

/**
 * Write summary.json, CSV tables and SVG plots into `dir`.
 *
 * # Safety
 * `outcome` must be a live outcome handle and `dir` a NUL-terminated string.
 */
enum BlabStatus blab_outcome_write(const struct BlabOutcome *outcome, const char *dir);

/**
 * # Safety
 * `outcome` must come from `blab_run` or be NULL.
 */
void blab_outcome_free(struct BlabOutcome *outcome);

/**
 * # Safety
 * `s` must come from this library or be NULL.
 */
void blab_string_free(char *s);

/**
 * The standard bubble U(z) in dimension m, with z of length m.
 *
 * # Safety
 * `z` must point to `len` doubles and `value` must be writable.
 */
enum BlabStatus blab_bubble_eval(size_t m, const double *z, size_t len, double *value);

/**
 * I^q_p = int_0^inf r^q (1 + r)^(-p) dr in closed form.
 *
 * # Safety
 * `value` must be writable.
 */
enum BlabStatus blab_moment(double p, double q, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLAB_H */
