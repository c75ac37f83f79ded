/* diffrl.h - C API for the diffrl policy verification toolkit.
 *
 * All objects are opaque handles created and destroyed by this library.
 * Functions return DIFFRL_OK on success; on failure they return an
 * error code and the message is available via diffrl_last_error()
 * (thread-local). Strings returned through char** must be released
 * with diffrl_string_free().
 */
#ifndef DIFFRL_H
#define DIFFRL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum diffrl_status {
    DIFFRL_OK = 0,
    DIFFRL_ERR_IO = 1,
    DIFFRL_ERR_PARSE = 2,
    DIFFRL_ERR_VALIDATION = 3,
    DIFFRL_ERR_INVALID_ARG = 4,
    DIFFRL_ERR_CONFLICT = 5,
    DIFFRL_ERR_INTERNAL = 6
} diffrl_status;

typedef struct diffrl_network diffrl_network;
typedef struct diffrl_config diffrl_config;

const char *diffrl_version(void);
const char *diffrl_last_error(void);
void diffrl_string_free(char *s);

/* ---- networks ---------------------------------------------------- */

diffrl_status diffrl_network_load(const char *path, diffrl_network **out);
diffrl_status diffrl_network_save(const diffrl_network *net, const char *path);
void diffrl_network_free(diffrl_network *net);

int diffrl_network_input_width(const diffrl_network *net);
int diffrl_network_output_width(const diffrl_network *net);
long long diffrl_network_parameter_count(const diffrl_network *net);
const char *diffrl_network_name(const diffrl_network *net);

/* Raw logits for one input vector; `logits` must hold output-width
 * doubles. */
diffrl_status diffrl_network_forward(const diffrl_network *net, const double *x, size_t n,
                                     double *logits, size_t m);
/* Deployed action for one input vector. */
diffrl_status diffrl_network_act(const diffrl_network *net, const double *x, size_t n,
                                 double *action);

/* Zoo builders: family is "pensieve" (p1 = hidden width), "cmars"
 * (p1 = depth, p2 = action count), or "aurora" (p1 = history length k,
 * p2 = hidden width). */
diffrl_status diffrl_zoo_build(const char *family, int p1, int p2, uint64_t seed,
                               diffrl_network **out);

/* ---- run configuration ------------------------------------------- */

diffrl_config *diffrl_config_new(void);
void diffrl_config_free(diffrl_config *cfg);

diffrl_status diffrl_config_set_model(diffrl_config *cfg, const char *path);
diffrl_status diffrl_config_set_preset(diffrl_config *cfg, const char *family);
diffrl_status diffrl_config_add_property_file(diffrl_config *cfg, const char *path);
diffrl_status diffrl_config_clear_coverages(diffrl_config *cfg);
diffrl_status diffrl_config_add_coverage(diffrl_config *cfg, double pct);
diffrl_status diffrl_config_set_engines(diffrl_config *cfg, const char *csv);
diffrl_status diffrl_config_set_timeout(diffrl_config *cfg, double seconds);
diffrl_status diffrl_config_set_max_subdomains(diffrl_config *cfg, long long count);
diffrl_status diffrl_config_set_seed(diffrl_config *cfg, uint64_t seed);
diffrl_status diffrl_config_set_out(diffrl_config *cfg, const char *path);
diffrl_status diffrl_config_set_csv(diffrl_config *cfg, const char *path);
diffrl_status diffrl_config_set_export_dir(diffrl_config *cfg, const char *path);
diffrl_status diffrl_config_set_results_dir(diffrl_config *cfg, const char *path);
diffrl_status diffrl_config_set_clamp_perturbed(diffrl_config *cfg, int enabled);
/* rule: "at-least" | "strict" */
diffrl_status diffrl_config_set_violation_rule(diffrl_config *cfg, const char *rule);
diffrl_status diffrl_config_set_include_timing(diffrl_config *cfg, int enabled);

/* ---- commands ----------------------------------------------------- */

/* Solves every query and writes the configured reports. sweep_mode
 * writes one report file per coverage level. exit_code: 0 all safe,
 * 1 any violated, 2 any unknown (none violated). A soundness conflict
 * between engines aborts with DIFFRL_ERR_CONFLICT. */
diffrl_status diffrl_cmd_verify(const diffrl_config *cfg, int sweep_mode, int *exit_code);

/* Query listing without solving (and bundle export when an export dir
 * is configured). The returned text must be freed. */
diffrl_status diffrl_cmd_decompose(const diffrl_config *cfg, char **text);

/* Replays a counterexample claim (result file) against an exported
 * query bundle and the original model. accepted: 1/0; diagnostics
 * (optional) names the first failed check. */
diffrl_status diffrl_cmd_certify(const char *model_path, const char *query_path,
                                 const char *result_path, int *accepted, char **diagnostics);

#ifdef __cplusplus
}
#endif

#endif /* DIFFRL_H */
