/* C API for the symmfg library: opaque handles, status codes, and
 * heap-allocated JSON strings. Every function is safe to call from C;
 * failures set a thread-local message retrievable via smfg_last_error().
 *
 * Status codes double as CLI exit codes: 0 success, 1 runtime failure,
 * 2 configuration/usage error. */
#ifndef SYMMFG_SYMMFG_H
#define SYMMFG_SYMMFG_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SMFG_OK = 0,
  SMFG_ERR_RUNTIME = 1,
  SMFG_ERR_CONFIG = 2
} smfg_status;

/* Library version string, e.g. "0.1.0". Static storage; do not free. */
const char* smfg_version(void);

/* Message for the most recent failure on this thread. Valid until the next
 * failing call on the same thread. */
const char* smfg_last_error(void);

/* Frees strings returned through char** out-parameters. */
void smfg_string_free(char* s);

/* An environment handle bundles the N-player game and its mean-field
 * companion. */
typedef struct smfg_env smfg_env;

/* Builds an environment from a JSON description (see docs/FORMATS.md). */
smfg_status smfg_env_build(const char* json_text, smfg_env** out);

/* Loads an environment description file. */
smfg_status smfg_env_load(const char* path, smfg_env** out);

/* Writes the canonical description (config plus all parameter draws); the
 * file reloads bit-identically. */
smfg_status smfg_env_dump(const smfg_env* env, const char* path);

/* Shape and metadata as a JSON object. */
smfg_status smfg_env_info(const smfg_env* env, char** json_out);

void smfg_env_free(smfg_env* env);

/* Runs an experiment from a config file. Optional overrides: pass NULL /
 * negative values to keep the config's settings. On success *summary_json_out
 * receives the summary report (also written to the output directory). */
smfg_status smfg_run_experiment(const char* config_path, const char* output_dir_or_null,
                                int64_t root_seed_or_negative, int workers_or_zero,
                                int64_t dump_trajectories_or_negative, char** summary_json_out);

/* Diagnostic checks over an environment. checks_csv is a comma-separated
 * subset of: alpha-beta, monotonicity, kappa-sparsity, lipschitz. */
smfg_status smfg_inspect(const smfg_env* env, const char* checks_csv, uint64_t seed,
                         int64_t budget_or_negative, int workers_or_zero, char** report_json_out);

/* Round-trips a policy (or per-agent policy profile) file and reports its
 * shape as JSON. */
smfg_status smfg_policy_validate(const char* path, char** info_json_out);

#ifdef __cplusplus
}
#endif

#endif /* SYMMFG_SYMMFG_H */
