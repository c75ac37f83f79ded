#include "diffrl/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace diffrl {

namespace fs = std::filesystem;

namespace {

std::vector<PropertySpec> load_properties(const RunConfig &config, const Network &net) {
    std::vector<PropertySpec> props;
    if (!config.preset_family.empty()) {
        props = zoo_preset_properties(zoo_family_from_name(config.preset_family), net);
    }
    for (const auto &path : config.property_paths)
        props.push_back(load_property(path));
    if (props.empty())
        throw ValidationError("no properties given (use a preset or property files)");
    for (auto &p : props) {
        if (config.clamp_perturbed)
            p.clamp_perturbed = true;
        if (p.comparison)
            p.comparison->rule = config.strict_violation_rule ? ViolationRule::StrictlyGreater
                                                              : ViolationRule::AtLeast;
    }
    return props;
}

std::vector<EngineContract> build_engines(const RunConfig &config) {
    std::vector<EngineContract> engines;
    for (const auto &name : config.engines) {
        if (name == "native") {
            engines.push_back(make_native_engine());
        } else if (name == "external") {
            if (config.export_dir.empty())
                throw ValidationError("external engine requires an export directory");
            const fs::path results =
                config.results_dir.empty() ? fs::path(config.export_dir) : fs::path(config.results_dir);
            engines.push_back(make_external_engine("external", config.export_dir, results));
        } else {
            throw ValidationError("unknown engine '" + name + "' (expected native|external)");
        }
    }
    if (engines.empty())
        throw ValidationError("at least one engine is required");
    return engines;
}

Budget build_budget(const RunConfig &config) {
    Budget b;
    b.timeout_s = config.timeout_s;
    b.max_subdomains = config.max_subdomains;
    b.seed = config.seed;
    b.threads = config.bab_threads;
    return b;
}

std::string action_label(const Network &net, std::size_t index) {
    if (net.decoder.mode == ActionDecoder::Mode::Discrete) {
        std::ostringstream ss;
        ss << net.decoder.action_values[index];
        return ss.str();
    }
    return "out" + std::to_string(index);
}

} // namespace

int exit_code_for(const std::vector<PropertyResult> &results) {
    bool any_violated = false, any_unknown = false;
    for (const auto &r : results) {
        if (r.aggregate == PropertyResult::Aggregate::Violated)
            any_violated = true;
        else if (r.aggregate == PropertyResult::Aggregate::Unknown)
            any_unknown = true;
    }
    if (any_violated)
        return 1;
    if (any_unknown)
        return 2;
    return 0;
}

RunOutput run_verify(const RunConfig &config, bool per_coverage_files) {
    RunOutput out;
    try {
        auto net = std::make_shared<const Network>(load_network(config.model_path));
        out.model_name = net->name;
        const auto props = load_properties(config, *net);
        const auto engines = build_engines(config);
        const Budget budget = build_budget(config);

        for (double coverage : config.coverages) {
            for (const auto &prop : props) {
                PropertySpec p = prop;
                p.coverage_pct = coverage;
                const auto queries = generate_queries(net, p);
                const auto verdicts = dispatch(queries, engines, budget);

                std::vector<QueryOutcome> outcomes;
                outcomes.reserve(queries.size());
                for (std::size_t qi = 0; qi < queries.size(); ++qi) {
                    QueryOutcome o;
                    o.query_id = queries[qi].id;
                    o.engine_verdicts = verdicts[qi];
                    try {
                        o.merged = merge_engine_verdicts(queries[qi].id, verdicts[qi]);
                    } catch (const ConflictError &) {
                        // Dump both artifacts before aborting the property.
                        const fs::path artifact =
                            config.out_path.empty()
                                ? fs::temp_directory_path() / "diffrl_conflict.json"
                                : fs::path(config.out_path + ".conflict.json");
                        write_text_file_atomic(
                            artifact,
                            conflict_artifact_json(queries[qi].id, verdicts[qi]) + "\n");
                        throw;
                    }
                    outcomes.push_back(std::move(o));
                }
                out.results.push_back(aggregate_property(p.name, coverage, std::move(outcomes)));
            }
        }

        // Report files.
        if (!config.out_path.empty()) {
            if (per_coverage_files) {
                for (double coverage : config.coverages) {
                    nlohmann::json arr = nlohmann::json::array();
                    for (const auto &r : out.results)
                        if (r.coverage_pct == coverage)
                            arr.push_back(nlohmann::json::parse(
                                report_to_json(r, out.model_name, config.include_timing)));
                    fs::path p(config.out_path);
                    const std::string stem = p.stem().string();
                    const std::string ext = p.has_extension() ? p.extension().string() : ".json";
                    fs::path file = p.parent_path() /
                                    (stem + "-cov" + std::to_string(int(std::lround(coverage))) + ext);
                    write_text_file_atomic(file, arr.dump(2) + "\n");
                }
            } else {
                nlohmann::json arr = nlohmann::json::array();
                for (const auto &r : out.results)
                    arr.push_back(nlohmann::json::parse(
                        report_to_json(r, out.model_name, config.include_timing)));
                write_text_file_atomic(config.out_path, arr.dump(2) + "\n");
            }
        }
        if (!config.csv_path.empty())
            write_text_file_atomic(config.csv_path,
                                   report_to_csv(out.results, out.model_name,
                                                 config.include_timing));

        out.exit_code = exit_code_for(out.results);
    } catch (const ConflictError &e) {
        out.error = e.what();
        out.conflict = true;
        out.exit_code = 3;
    } catch (const std::exception &e) {
        out.error = e.what();
        out.exit_code = 3;
    }
    return out;
}

std::string run_decompose(const RunConfig &config) {
    auto net = std::make_shared<const Network>(load_network(config.model_path));
    const auto props = load_properties(config, *net);
    std::ostringstream ss;

    for (double coverage : config.coverages) {
        for (const auto &prop : props) {
            PropertySpec p = prop;
            p.coverage_pct = coverage;
            const auto queries = generate_queries(net, p);
            ss << "property " << p.name << " @ coverage " << coverage << "%: " << queries.size()
               << " queries\n";
            if (queries.empty()) {
                ss << "  property holds vacuously (no invalid pairs)\n";
                continue;
            }
            for (const auto &q : queries) {
                ss << "  " << q.id;
                if (q.pair)
                    ss << "  pair (" << action_label(*net, q.pair->i1) << " -> "
                       << action_label(*net, q.pair->i2) << ")";
                ss << "\n";
                if (!config.export_dir.empty())
                    export_query(q, config.export_dir);
            }
        }
    }
    return ss.str();
}

Query parse_query_bundle(std::shared_ptr<const Network> net, const std::string &query_path) {
    std::ifstream in(query_path);
    if (!in)
        throw ParseError("cannot open query file '" + query_path + "'");

    const std::size_t n = net->input_width;
    const std::size_t m2 = 2 * net->output_width();

    Query q;
    q.system.net = std::move(net);
    q.x_bounds.per_feature.assign(n, Interval{0.0, 0.0});
    q.s_bounds.per_feature.assign(n, Interval{0.0, 0.0});
    std::vector<bool> seen(2 * n, false);

    std::string line;
    bool header_ok = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "diffq") {
            int version = 0;
            ls >> version;
            if (version != 1)
                throw ParseError(query_path + ": unsupported diffq version");
            header_ok = true;
        } else if (tag == "input") {
            std::size_t k;
            double lo, hi;
            if (!(ls >> k >> lo >> hi) || k >= 2 * n)
                throw ParseError(query_path + ": malformed input line '" + line + "'");
            if (k < n)
                q.x_bounds.per_feature[k] = {lo, hi};
            else
                q.s_bounds.per_feature[k - n] = {lo, hi};
            seen[k] = true;
        } else if (tag == "net") {
            // The bundle's flattened network is informative here; the
            // caller supplies the original network for replay.
        } else if (tag == "lin") {
            std::vector<std::string> tok;
            std::string t;
            while (ls >> t)
                tok.push_back(t);
            if (tok.size() != m2 + 2)
                throw ParseError(query_path + ": lin row has " + std::to_string(tok.size()) +
                                 " fields, expected " + std::to_string(m2 + 2));
            LinearOutputConstraint c;
            for (std::size_t i = 0; i < m2; ++i)
                c.coeffs.push_back(std::stod(tok[i]));
            if (tok[m2] != "<=")
                throw ParseError(query_path + ": lin rows must use <=");
            c.rhs = std::stod(tok[m2 + 1]);
            q.output_constraints.push_back(std::move(c));
        } else if (tag == "linin") {
            std::vector<std::string> tok;
            std::string t;
            while (ls >> t)
                tok.push_back(t);
            if (tok.size() != 2 * n + 2)
                throw ParseError(query_path + ": linin row has " + std::to_string(tok.size()) +
                                 " fields, expected " + std::to_string(2 * n + 2));
            LinearInputConstraint c;
            for (std::size_t i = 0; i < n; ++i)
                c.coeffs_x.push_back(std::stod(tok[i]));
            for (std::size_t i = 0; i < n; ++i)
                c.coeffs_s.push_back(std::stod(tok[n + i]));
            if (tok[2 * n] == "<=")
                c.relation = LinearInputConstraint::Rel::Le;
            else if (tok[2 * n] == ">=")
                c.relation = LinearInputConstraint::Rel::Ge;
            else
                throw ParseError(query_path + ": linin relation must be <= or >=");
            c.rhs = std::stod(tok[2 * n + 1]);
            q.extra.push_back(std::move(c));
        } else {
            throw ParseError(query_path + ": unknown line tag '" + tag + "'");
        }
    }
    if (!header_ok)
        throw ParseError(query_path + ": missing 'diffq 1' header");
    for (std::size_t k = 0; k < 2 * n; ++k)
        if (!seen[k])
            throw ParseError(query_path + ": missing bounds for input " + std::to_string(k));

    q.id = fs::path(query_path).stem().string();
    return q;
}

CertifyResult run_certify(const std::string &model_path, const std::string &query_path,
                          const std::string &result_path) {
    auto net = std::make_shared<const Network>(load_network(model_path));
    const Query query = parse_query_bundle(net, query_path);

    std::ifstream in(result_path);
    if (!in)
        throw ParseError("cannot open result file '" + result_path + "'");
    std::string first;
    if (!std::getline(in, first))
        throw ParseError(result_path + ": empty result file");
    if (first != "sat") {
        CertifyResult res;
        res.diagnostics = "result file is '" + first + "', only sat claims carry a counterexample";
        return res;
    }

    const std::size_t n = net->input_width;
    Vec assignment(2 * n, 0.0);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string tag;
        std::size_t k;
        double value;
        if (!(ls >> tag >> k >> value) || tag != "x" || k >= 2 * n)
            throw ParseError(result_path + ": malformed assignment line '" + line + "'");
        assignment[k] = value;
    }
    Counterexample cex;
    cex.x.assign(assignment.begin(), assignment.begin() + n);
    cex.s.assign(assignment.begin() + n, assignment.end());
    cex.query_id = query.id;
    return certify_counterexample(*query.system.net, query, cex);
}

} // namespace diffrl
