// diffrl command-line driver. Thin wrapper over the diffrl C API; all
// verification work happens inside libdiffrl.
#include "diffrl/diffrl.h"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

int report_api_error(diffrl_status status) {
    std::fprintf(stderr, "error: %s\n", diffrl_last_error());
    return status == DIFFRL_ERR_CONFLICT ? 4 : 3;
}

struct CommonOpts {
    std::string model;
    std::vector<std::string> properties;
    std::string preset;
    std::vector<double> coverages;
    std::string engines = "native";
    double timeout = 600.0;
    long long max_subdomains = -1;
    std::uint64_t seed = 0;
    std::string out;
    std::string csv;
    std::string export_dir;
    std::string results_dir;
    bool clamp_perturbed = false;
    std::string violation_rule = "at-least";
};

void add_common(CLI::App *cmd, CommonOpts &o, bool needs_model = true) {
    auto *m = cmd->add_option("--model", o.model, "network file (JSON)");
    if (needs_model)
        m->required();
    cmd->add_option("--property", o.properties, "property file(s) (JSON)");
    cmd->add_option("--preset", o.preset, "property preset family: pensieve|cmars|aurora");
    cmd->add_option("--coverage", o.coverages, "coverage percentage(s), default 100");
    cmd->add_option("--engines", o.engines, "comma-separated engines (native, external)");
    cmd->add_option("--timeout", o.timeout, "per-query timeout in seconds (default 600)");
    cmd->add_option("--max-subdomains", o.max_subdomains, "per-query subdomain budget");
    cmd->add_option("--seed", o.seed, "random seed for the falsification search");
    cmd->add_option("--out", o.out, "report JSON path");
    cmd->add_option("--csv", o.csv, "report CSV path");
    cmd->add_option("--export-dir", o.export_dir, "query bundle export directory");
    cmd->add_option("--results-dir", o.results_dir, "external engine result directory");
    cmd->add_flag("--clamp-perturbed", o.clamp_perturbed, "constrain x+s to the input domain");
    cmd->add_option("--violation-rule", o.violation_rule, "at-least (default) or strict")
        ->check(CLI::IsMember({"at-least", "strict"}));
}

struct ConfigHandle {
    diffrl_config *cfg;
    explicit ConfigHandle(const CommonOpts &o) : cfg(diffrl_config_new()) {
        diffrl_config_set_model(cfg, o.model.c_str());
        if (!o.preset.empty())
            diffrl_config_set_preset(cfg, o.preset.c_str());
        for (const auto &p : o.properties)
            diffrl_config_add_property_file(cfg, p.c_str());
        if (!o.coverages.empty()) {
            diffrl_config_clear_coverages(cfg);
            for (double c : o.coverages)
                diffrl_config_add_coverage(cfg, c);
        }
        diffrl_config_set_engines(cfg, o.engines.c_str());
        diffrl_config_set_timeout(cfg, o.timeout);
        if (o.max_subdomains >= 0)
            diffrl_config_set_max_subdomains(cfg, o.max_subdomains);
        diffrl_config_set_seed(cfg, o.seed);
        if (!o.out.empty())
            diffrl_config_set_out(cfg, o.out.c_str());
        if (!o.csv.empty())
            diffrl_config_set_csv(cfg, o.csv.c_str());
        if (!o.export_dir.empty())
            diffrl_config_set_export_dir(cfg, o.export_dir.c_str());
        if (!o.results_dir.empty())
            diffrl_config_set_results_dir(cfg, o.results_dir.c_str());
        diffrl_config_set_clamp_perturbed(cfg, o.clamp_perturbed ? 1 : 0);
        diffrl_config_set_violation_rule(cfg, o.violation_rule.c_str());
    }
    ~ConfigHandle() { diffrl_config_free(cfg); }
};

int run_verify_cmd(const CommonOpts &o, bool sweep) {
    ConfigHandle h(o);
    int exit_code = 0;
    const diffrl_status st = diffrl_cmd_verify(h.cfg, sweep ? 1 : 0, &exit_code);
    if (st != DIFFRL_OK)
        return report_api_error(st);
    return exit_code;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"diffrl: symbolic robustness/monotonicity verification for DRL policies"};
    app.require_subcommand(1);

    CommonOpts vo, so, dco;
    auto *verify = app.add_subcommand("verify", "solve all queries and write a report");
    add_common(verify, vo);
    auto *sweep = app.add_subcommand("sweep", "verify across coverage levels, one report each");
    add_common(sweep, so);
    auto *decompose = app.add_subcommand("decompose", "list queries without solving");
    add_common(decompose, dco);

    std::string zoo_family, zoo_out;
    int zoo_p1 = 128, zoo_p2 = 0;
    std::uint64_t zoo_seed = 0;
    auto *zoo = app.add_subcommand("zoo", "emit a seeded case-study network file");
    zoo->add_option("--family", zoo_family, "pensieve|cmars|aurora")->required();
    zoo->add_option("--p1", zoo_p1, "pensieve: hidden width; cmars: depth; aurora: history k");
    zoo->add_option("--p2", zoo_p2, "cmars: action count; aurora: hidden width");
    zoo->add_option("--seed", zoo_seed, "weight seed");
    zoo->add_option("--out", zoo_out, "output network file")->required();

    std::string cert_model, cert_query, cert_result;
    auto *certify = app.add_subcommand("certify", "replay an external counterexample claim");
    certify->add_option("--model", cert_model, "original network file")->required();
    certify->add_option("--query", cert_query, "exported .diffq query file")->required();
    certify->add_option("--result", cert_result, "result file with a sat assignment")->required();

    CLI11_PARSE(app, argc, argv);

    if (verify->parsed())
        return run_verify_cmd(vo, false);
    if (sweep->parsed())
        return run_verify_cmd(so, true);

    if (decompose->parsed()) {
        ConfigHandle h(dco);
        char *text = nullptr;
        const diffrl_status st = diffrl_cmd_decompose(h.cfg, &text);
        if (st != DIFFRL_OK)
            return report_api_error(st);
        std::fputs(text, stdout);
        diffrl_string_free(text);
        return 0;
    }

    if (zoo->parsed()) {
        diffrl_network *net = nullptr;
        diffrl_status st = diffrl_zoo_build(zoo_family.c_str(), zoo_p1, zoo_p2, zoo_seed, &net);
        if (st != DIFFRL_OK)
            return report_api_error(st);
        st = diffrl_network_save(net, zoo_out.c_str());
        if (st != DIFFRL_OK) {
            diffrl_network_free(net);
            return report_api_error(st);
        }
        std::printf("wrote %s (%s: %d inputs, %d outputs, %lld parameters)\n", zoo_out.c_str(),
                    diffrl_network_name(net), diffrl_network_input_width(net),
                    diffrl_network_output_width(net), diffrl_network_parameter_count(net));
        diffrl_network_free(net);
        return 0;
    }

    if (certify->parsed()) {
        int accepted = 0;
        char *diag = nullptr;
        const diffrl_status st = diffrl_cmd_certify(cert_model.c_str(), cert_query.c_str(),
                                                    cert_result.c_str(), &accepted, &diag);
        if (st != DIFFRL_OK)
            return report_api_error(st);
        if (accepted) {
            std::printf("accepted: counterexample replays\n");
        } else {
            std::printf("rejected: %s\n", diag ? diag : "");
        }
        diffrl_string_free(diag);
        return accepted ? 0 : 1;
    }

    return 3;
}
