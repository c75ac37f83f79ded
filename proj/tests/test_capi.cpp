#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffrl/diffrl.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "diffrl_capi_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("version string is present") {
    CHECK(std::string(diffrl_version()) == "0.1.0");
}

TEST_CASE("error codes and last_error") {
    diffrl_network *net = nullptr;
    CHECK(diffrl_network_load("/nonexistent/whatever.json", &net) == DIFFRL_ERR_PARSE);
    CHECK(std::string(diffrl_last_error()).find("cannot open") != std::string::npos);
    CHECK(diffrl_network_load(nullptr, &net) == DIFFRL_ERR_INVALID_ARG);
}

TEST_CASE("zoo build, save, load, forward, decode through the C API") {
    TempDir dir;
    diffrl_network *net = nullptr;
    REQUIRE(diffrl_zoo_build("pensieve", 8, 0, 1, &net) == DIFFRL_OK);
    CHECK(diffrl_network_input_width(net) == 25);
    CHECK(diffrl_network_output_width(net) == 6);
    CHECK(diffrl_network_parameter_count(net) == 6 * 8 * 8 + 38 * 8 + 6);
    CHECK(std::string(diffrl_network_name(net)).find("pensieve") != std::string::npos);

    const std::string path = (dir.path / "net.json").string();
    REQUIRE(diffrl_network_save(net, path.c_str()) == DIFFRL_OK);

    diffrl_network *back = nullptr;
    REQUIRE(diffrl_network_load(path.c_str(), &back) == DIFFRL_OK);

    double x[25];
    for (int i = 0; i < 25; ++i)
        x[i] = 0.5;
    double l1[6], l2[6];
    REQUIRE(diffrl_network_forward(net, x, 25, l1, 6) == DIFFRL_OK);
    REQUIRE(diffrl_network_forward(back, x, 25, l2, 6) == DIFFRL_OK);
    for (int i = 0; i < 6; ++i)
        CHECK(l1[i] == l2[i]);

    double action = 0.0;
    REQUIRE(diffrl_network_act(net, x, 25, &action) == DIFFRL_OK);
    bool known = false;
    for (double v : {300.0, 750.0, 1200.0, 1850.0, 2850.0, 4300.0})
        known = known || action == v;
    CHECK(known);

    // wrong widths are validation errors, not crashes
    CHECK(diffrl_network_forward(net, x, 7, l1, 6) == DIFFRL_ERR_VALIDATION);

    diffrl_network_free(net);
    diffrl_network_free(back);
}

TEST_CASE("zoo rejects off-menu parameters") {
    diffrl_network *net = nullptr;
    CHECK(diffrl_zoo_build("cmars", 5, 15, 0, &net) == DIFFRL_ERR_VALIDATION);
    CHECK(diffrl_zoo_build("unknown-family", 1, 1, 0, &net) == DIFFRL_ERR_VALIDATION);
}

TEST_CASE("decompose and verify through the config object") {
    TempDir dir;
    diffrl_network *net = nullptr;
    REQUIRE(diffrl_zoo_build("pensieve", 4, 0, 7, &net) == DIFFRL_OK);
    const std::string model = (dir.path / "model.json").string();
    REQUIRE(diffrl_network_save(net, model.c_str()) == DIFFRL_OK);
    diffrl_network_free(net);

    diffrl_config *cfg = diffrl_config_new();
    REQUIRE(diffrl_config_set_model(cfg, model.c_str()) == DIFFRL_OK);
    REQUIRE(diffrl_config_set_preset(cfg, "pensieve") == DIFFRL_OK);
    REQUIRE(diffrl_config_clear_coverages(cfg) == DIFFRL_OK);
    REQUIRE(diffrl_config_add_coverage(cfg, 60.0) == DIFFRL_OK);
    REQUIRE(diffrl_config_set_engines(cfg, "native") == DIFFRL_OK);
    REQUIRE(diffrl_config_set_timeout(cfg, 60.0) == DIFFRL_OK);
    REQUIRE(diffrl_config_set_max_subdomains(cfg, 20000) == DIFFRL_OK);
    REQUIRE(diffrl_config_set_seed(cfg, 5) == DIFFRL_OK);

    char *text = nullptr;
    REQUIRE(diffrl_cmd_decompose(cfg, &text) == DIFFRL_OK);
    std::string listing(text);
    diffrl_string_free(text);
    CHECK(listing.find("pensieve-capacity-utilization/pair3-0/v0") != std::string::npos);
    CHECK(listing.find("12 queries") != std::string::npos); // robustness

    const std::string out = (dir.path / "report.json").string();
    const std::string csv = (dir.path / "report.csv").string();
    REQUIRE(diffrl_config_set_out(cfg, out.c_str()) == DIFFRL_OK);
    REQUIRE(diffrl_config_set_csv(cfg, csv.c_str()) == DIFFRL_OK);

    int exit_code = -1;
    REQUIRE(diffrl_cmd_verify(cfg, 0, &exit_code) == DIFFRL_OK);
    CHECK((exit_code >= 0 && exit_code <= 2));
    CHECK(fs::exists(out));
    CHECK(fs::exists(csv));

    // violation rule knob validates its input
    CHECK(diffrl_config_set_violation_rule(cfg, "sometimes") == DIFFRL_ERR_VALIDATION);
    CHECK(diffrl_config_set_violation_rule(cfg, "strict") == DIFFRL_OK);

    diffrl_config_free(cfg);
}

TEST_CASE("certify through the C API") {
    TempDir dir;
    diffrl_network *net = nullptr;
    REQUIRE(diffrl_zoo_build("pensieve", 4, 0, 7, &net) == DIFFRL_OK);
    const std::string model = (dir.path / "model.json").string();
    REQUIRE(diffrl_network_save(net, model.c_str()) == DIFFRL_OK);
    diffrl_network_free(net);

    // export bundles via decompose
    diffrl_config *cfg = diffrl_config_new();
    diffrl_config_set_model(cfg, model.c_str());
    diffrl_config_set_preset(cfg, "pensieve");
    const std::string qdir = (dir.path / "queries").string();
    diffrl_config_set_export_dir(cfg, qdir.c_str());
    char *text = nullptr;
    REQUIRE(diffrl_cmd_decompose(cfg, &text) == DIFFRL_OK);
    diffrl_string_free(text);
    diffrl_config_free(cfg);

    const std::string qfile =
        (fs::path(qdir) / "pensieve-capacity-utilization_pair3-0_v0.diffq").string();
    REQUIRE(fs::exists(qfile));

    // a deliberately wrong claim is rejected with diagnostics
    const std::string rfile = (dir.path / "claim.result").string();
    std::ofstream out(rfile);
    out << "sat\n";
    for (int i = 0; i < 50; ++i)
        out << "x " << i << " " << (i < 25 ? 0.5 : 0.0) << "\n";
    out.close();

    int accepted = -1;
    char *diag = nullptr;
    REQUIRE(diffrl_cmd_certify(model.c_str(), qfile.c_str(), rfile.c_str(), &accepted, &diag) ==
            DIFFRL_OK);
    CHECK(accepted == 0);
    CHECK(diag != nullptr);
    diffrl_string_free(diag);
}
