#pragma once

#include "diffrl/orchestrator.hpp"
#include "diffrl/zoo.hpp"

#include <string>
#include <vector>

namespace diffrl {

/// Batch run configuration shared by the CLI and the C API.
struct RunConfig {
    std::string model_path;
    std::vector<std::string> property_paths;
    std::string preset_family; // pensieve|cmars|aurora; empty = use files
    std::vector<double> coverages = {100.0};
    std::vector<std::string> engines = {"native"};
    double timeout_s = 600.0;
    std::size_t max_subdomains = 4'000'000;
    std::uint64_t seed = 0;
    int bab_threads = 1;
    std::string out_path;
    std::string csv_path;
    std::string export_dir;  // external engine: where bundles are written
    std::string results_dir; // external engine: where results are read
    bool clamp_perturbed = false;
    bool strict_violation_rule = false; // default at-least
    bool include_timing = true;
};

struct RunOutput {
    std::vector<PropertyResult> results; // one per (property, coverage)
    std::string model_name;
    int exit_code = 0; // 0 all safe, 1 any violated, 2 any unknown, >2 tool error
    std::string error;
    bool conflict = false; // engines contradicted each other; artifacts dumped
};

/// Loads the model and properties, generates and solves all queries,
/// and writes report files. With per_coverage_files (the sweep mode),
/// one report file is written per coverage level.
RunOutput run_verify(const RunConfig &config, bool per_coverage_files = false);

/// Query listing without solving; returns the printable text.
std::string run_decompose(const RunConfig &config);

/// Replays an external counterexample (result file) against an exported
/// query bundle and the original model.
CertifyResult run_certify(const std::string &model_path, const std::string &query_path,
                          const std::string &result_path);

/// Reconstructs a Query from an exported constraint file, bound to the
/// given original (unflattened) network.
Query parse_query_bundle(std::shared_ptr<const Network> net, const std::string &query_path);

int exit_code_for(const std::vector<PropertyResult> &results);

} // namespace diffrl
