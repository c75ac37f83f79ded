#include "diffrl/diffrl.h"

#include "diffrl/network.hpp"
#include "diffrl/pipeline.hpp"
#include "diffrl/zoo.hpp"

#include <cstring>
#include <sstream>
#include <string>

namespace {

thread_local std::string g_last_error;

diffrl_status fail(diffrl_status code, const std::string &msg) {
    g_last_error = msg;
    return code;
}

template <typename Fn> diffrl_status guarded(Fn &&fn) {
    try {
        return fn();
    } catch (const diffrl::ParseError &e) {
        return fail(DIFFRL_ERR_PARSE, e.what());
    } catch (const diffrl::ConflictError &e) {
        return fail(DIFFRL_ERR_CONFLICT, e.what());
    } catch (const diffrl::ValidationError &e) {
        return fail(DIFFRL_ERR_VALIDATION, e.what());
    } catch (const std::exception &e) {
        return fail(DIFFRL_ERR_INTERNAL, e.what());
    }
}

char *dup_string(const std::string &s) {
    char *out = static_cast<char *>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::vector<std::string> split_csv(const std::string &csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

} // namespace

struct diffrl_network {
    diffrl::Network net;
};

struct diffrl_config {
    diffrl::RunConfig cfg;
};

extern "C" {

const char *diffrl_version(void) { return "0.1.0"; }

const char *diffrl_last_error(void) { return g_last_error.c_str(); }

void diffrl_string_free(char *s) { std::free(s); }

diffrl_status diffrl_network_load(const char *path, diffrl_network **out) {
    if (!path || !out)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        auto handle = new diffrl_network{diffrl::load_network(path)};
        *out = handle;
        return DIFFRL_OK;
    });
}

diffrl_status diffrl_network_save(const diffrl_network *net, const char *path) {
    if (!net || !path)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        diffrl::save_network(net->net, path);
        return DIFFRL_OK;
    });
}

void diffrl_network_free(diffrl_network *net) { delete net; }

int diffrl_network_input_width(const diffrl_network *net) {
    return net ? static_cast<int>(net->net.input_width) : -1;
}

int diffrl_network_output_width(const diffrl_network *net) {
    return net ? static_cast<int>(net->net.output_width()) : -1;
}

long long diffrl_network_parameter_count(const diffrl_network *net) {
    return net ? static_cast<long long>(diffrl::parameter_count(net->net)) : -1;
}

const char *diffrl_network_name(const diffrl_network *net) {
    return net ? net->net.name.c_str() : "";
}

diffrl_status diffrl_network_forward(const diffrl_network *net, const double *x, size_t n,
                                     double *logits, size_t m) {
    if (!net || !x || !logits)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        if (n != net->net.input_width)
            throw diffrl::ValidationError("forward: wrong input width");
        if (m != net->net.output_width())
            throw diffrl::ValidationError("forward: wrong output buffer width");
        const diffrl::Vec out = diffrl::forward(net->net, std::span<const double>(x, n));
        std::memcpy(logits, out.data(), m * sizeof(double));
        return DIFFRL_OK;
    });
}

diffrl_status diffrl_network_act(const diffrl_network *net, const double *x, size_t n,
                                 double *action) {
    if (!net || !x || !action)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        const diffrl::Vec logits = diffrl::forward(net->net, std::span<const double>(x, n));
        *action = diffrl::decode_action(net->net, logits);
        return DIFFRL_OK;
    });
}

diffrl_status diffrl_zoo_build(const char *family, int p1, int p2, uint64_t seed,
                               diffrl_network **out) {
    if (!family || !out)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        const auto fam = diffrl::zoo_family_from_name(family);
        diffrl::ZooSpec spec;
        switch (fam) {
        case diffrl::ZooSpec::Family::Pensieve:
            spec = diffrl::ZooSpec::pensieve(p1, seed);
            break;
        case diffrl::ZooSpec::Family::Cmars:
            spec = diffrl::ZooSpec::cmars(p1, p2, seed);
            break;
        case diffrl::ZooSpec::Family::Aurora:
            spec = diffrl::ZooSpec::aurora(p1, p2, seed);
            break;
        }
        *out = new diffrl_network{diffrl::zoo_build(spec)};
        return DIFFRL_OK;
    });
}

diffrl_config *diffrl_config_new(void) { return new diffrl_config{}; }

void diffrl_config_free(diffrl_config *cfg) { delete cfg; }

#define DIFFRL_CFG_SETTER(body)                                                                    \
    if (!cfg)                                                                                      \
        return fail(DIFFRL_ERR_INVALID_ARG, "null config");                                        \
    return guarded([&] {                                                                           \
        body;                                                                                      \
        return DIFFRL_OK;                                                                          \
    });

diffrl_status diffrl_config_set_model(diffrl_config *cfg, const char *path) {
    DIFFRL_CFG_SETTER(cfg->cfg.model_path = path ? path : "")
}
diffrl_status diffrl_config_set_preset(diffrl_config *cfg, const char *family) {
    DIFFRL_CFG_SETTER(cfg->cfg.preset_family = family ? family : "")
}
diffrl_status diffrl_config_add_property_file(diffrl_config *cfg, const char *path) {
    DIFFRL_CFG_SETTER(if (path) cfg->cfg.property_paths.emplace_back(path))
}
diffrl_status diffrl_config_clear_coverages(diffrl_config *cfg) {
    DIFFRL_CFG_SETTER(cfg->cfg.coverages.clear())
}
diffrl_status diffrl_config_add_coverage(diffrl_config *cfg, double pct) {
    DIFFRL_CFG_SETTER(cfg->cfg.coverages.push_back(pct))
}
diffrl_status diffrl_config_set_engines(diffrl_config *cfg, const char *csv) {
    DIFFRL_CFG_SETTER(cfg->cfg.engines = split_csv(csv ? csv : ""))
}
diffrl_status diffrl_config_set_timeout(diffrl_config *cfg, double seconds) {
    DIFFRL_CFG_SETTER(cfg->cfg.timeout_s = seconds)
}
diffrl_status diffrl_config_set_max_subdomains(diffrl_config *cfg, long long count) {
    DIFFRL_CFG_SETTER(cfg->cfg.max_subdomains = count < 0 ? 0 : static_cast<std::size_t>(count))
}
diffrl_status diffrl_config_set_seed(diffrl_config *cfg, uint64_t seed) {
    DIFFRL_CFG_SETTER(cfg->cfg.seed = seed)
}
diffrl_status diffrl_config_set_out(diffrl_config *cfg, const char *path) {
    DIFFRL_CFG_SETTER(cfg->cfg.out_path = path ? path : "")
}
diffrl_status diffrl_config_set_csv(diffrl_config *cfg, const char *path) {
    DIFFRL_CFG_SETTER(cfg->cfg.csv_path = path ? path : "")
}
diffrl_status diffrl_config_set_export_dir(diffrl_config *cfg, const char *path) {
    DIFFRL_CFG_SETTER(cfg->cfg.export_dir = path ? path : "")
}
diffrl_status diffrl_config_set_results_dir(diffrl_config *cfg, const char *path) {
    DIFFRL_CFG_SETTER(cfg->cfg.results_dir = path ? path : "")
}
diffrl_status diffrl_config_set_clamp_perturbed(diffrl_config *cfg, int enabled) {
    DIFFRL_CFG_SETTER(cfg->cfg.clamp_perturbed = enabled != 0)
}
diffrl_status diffrl_config_set_violation_rule(diffrl_config *cfg, const char *rule) {
    if (!cfg)
        return fail(DIFFRL_ERR_INVALID_ARG, "null config");
    return guarded([&] {
        const std::string r = rule ? rule : "";
        if (r == "at-least")
            cfg->cfg.strict_violation_rule = false;
        else if (r == "strict")
            cfg->cfg.strict_violation_rule = true;
        else
            throw diffrl::ValidationError("violation rule must be 'at-least' or 'strict'");
        return DIFFRL_OK;
    });
}
diffrl_status diffrl_config_set_include_timing(diffrl_config *cfg, int enabled) {
    DIFFRL_CFG_SETTER(cfg->cfg.include_timing = enabled != 0)
}

diffrl_status diffrl_cmd_verify(const diffrl_config *cfg, int sweep_mode, int *exit_code) {
    if (!cfg || !exit_code)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        const diffrl::RunOutput out = diffrl::run_verify(cfg->cfg, sweep_mode != 0);
        if (out.exit_code > 2)
            return fail(out.conflict ? DIFFRL_ERR_CONFLICT : DIFFRL_ERR_INTERNAL, out.error);
        *exit_code = out.exit_code;
        return DIFFRL_OK;
    });
}

diffrl_status diffrl_cmd_decompose(const diffrl_config *cfg, char **text) {
    if (!cfg || !text)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        *text = dup_string(diffrl::run_decompose(cfg->cfg));
        return DIFFRL_OK;
    });
}

diffrl_status diffrl_cmd_certify(const char *model_path, const char *query_path,
                                 const char *result_path, int *accepted, char **diagnostics) {
    if (!model_path || !query_path || !result_path || !accepted)
        return fail(DIFFRL_ERR_INVALID_ARG, "null argument");
    return guarded([&] {
        const diffrl::CertifyResult res =
            diffrl::run_certify(model_path, query_path, result_path);
        *accepted = res.accepted ? 1 : 0;
        if (diagnostics)
            *diagnostics = dup_string(res.diagnostics);
        return DIFFRL_OK;
    });
}

} // extern "C"
