#include "diffrl/orchestrator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace diffrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int env_thread_cap() {
    if (const char *env = std::getenv("DIFFRL_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

} // namespace

EngineContract make_native_engine() {
    EngineContract e;
    e.name = "native";
    e.capability = EngineContract::Capability::Native;
    e.invoke = [](const Query &q, const Budget &b) { return verify_query(q, b); };
    return e;
}

EngineContract make_external_engine(const std::string &name, const fs::path &export_dir,
                                    const fs::path &results_dir) {
    EngineContract e;
    e.name = name;
    e.capability = EngineContract::Capability::ExternalExport;
    e.invoke = [name, export_dir, results_dir](const Query &q, const Budget &) {
        export_query(q, export_dir);
        const fs::path result = results_dir / (sanitize_query_id(q.id) + ".result");
        if (!fs::exists(result)) {
            Verdict v;
            v.engine = name;
            v.status = VerdictStatus::Unknown;
            v.reason = UnknownReason::NoResult;
            v.reason_text = "no result file at " + result.string();
            return v;
        }
        return import_result(q, result, name);
    };
    return e;
}

std::vector<std::vector<Verdict>> dispatch(const std::vector<Query> &queries,
                                           const std::vector<EngineContract> &engines,
                                           const Budget &budget) {
    if (engines.empty())
        throw ValidationError("dispatch: at least one engine is required");

    struct Job {
        std::size_t qi, ei;
    };
    std::vector<Job> jobs;
    for (std::size_t qi = 0; qi < queries.size(); ++qi)
        for (std::size_t ei = 0; ei < engines.size(); ++ei)
            jobs.push_back({qi, ei});

    std::vector<std::vector<Verdict>> results(queries.size(),
                                              std::vector<Verdict>(engines.size()));

    auto run_job = [&](const Job &job) {
        Verdict v;
        try {
            v = engines[job.ei].invoke(queries[job.qi], budget);
            v.engine = engines[job.ei].name;
        } catch (const std::exception &e) {
            v = Verdict{};
            v.engine = engines[job.ei].name;
            v.status = VerdictStatus::Unknown;
            v.reason = UnknownReason::EngineFailure;
            v.reason_text = e.what();
        }
        results[job.qi][job.ei] = std::move(v);
    };

    const int workers = std::min<int>(env_thread_cap(), static_cast<int>(jobs.size()));
    if (workers <= 1) {
        for (const auto &job : jobs)
            run_job(job);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= jobs.size())
                    return;
                run_job(jobs[i]);
            }
        };
        std::vector<std::future<void>> futs;
        for (int t = 0; t < workers; ++t)
            futs.push_back(std::async(std::launch::async, worker));
        for (auto &f : futs)
            f.get();
    }
    return results;
}

CertifyResult certify_counterexample(const Network &net, const Query &query,
                                     const Counterexample &cex, double tol) {
    CertifyResult res;
    if (query.system.net.get() != &net && network_to_json(*query.system.net) != network_to_json(net)) {
        res.diagnostics = "counterexample network does not match the query's network";
        return res;
    }
    const PointCheck pc = check_point(query, cex.x, cex.s, tol);
    if (!pc.satisfied) {
        res.diagnostics = pc.first_failure;
        return res;
    }
    res.accepted = true;
    res.achieved_pair = InvalidPair{pc.achieved1, pc.achieved2};
    return res;
}

Verdict merge_engine_verdicts(const std::string &query_id, const std::vector<Verdict> &verdicts) {
    if (verdicts.empty())
        throw ValidationError("merge_engine_verdicts: no verdicts for query '" + query_id + "'");

    const Verdict *first_unsafe = nullptr;
    const Verdict *first_safe = nullptr;
    for (const auto &v : verdicts) {
        if (v.status == VerdictStatus::Unsafe && v.cex && !first_unsafe)
            first_unsafe = &v;
        if (v.status == VerdictStatus::Safe && !first_safe)
            first_safe = &v;
    }
    if (first_unsafe && first_safe)
        throw ConflictError(query_id, first_safe->engine, first_unsafe->engine);
    if (first_unsafe)
        return *first_unsafe;
    if (first_safe)
        return *first_safe;

    Verdict merged = verdicts.front();
    merged.status = VerdictStatus::Unknown;
    return merged;
}

PropertyResult aggregate_property(const std::string &property, double coverage_pct,
                                  std::vector<QueryOutcome> outcomes) {
    PropertyResult res;
    res.property = property;
    res.coverage_pct = coverage_pct;
    for (const auto &o : outcomes) {
        switch (o.merged.status) {
        case VerdictStatus::Safe:
            ++res.n_safe;
            break;
        case VerdictStatus::Unsafe:
            ++res.n_unsafe;
            break;
        case VerdictStatus::Unknown:
            ++res.n_unknown;
            break;
        }
    }
    if (res.n_unsafe > 0)
        res.aggregate = PropertyResult::Aggregate::Violated;
    else if (res.n_unknown == 0)
        res.aggregate = PropertyResult::Aggregate::Safe;
    else
        res.aggregate = PropertyResult::Aggregate::Unknown;
    res.per_query = std::move(outcomes);
    return res;
}

std::string sanitize_query_id(const std::string &id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id)
        out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
                       c == '.')
                          ? c
                          : '_');
    return out;
}

void write_text_file_atomic(const fs::path &path, const std::string &content) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw ParseError("cannot write '" + path.string() + "'");
        out << content;
    }
    fs::rename(tmp, path);
}

fs::path export_query(const Query &query, const fs::path &dir) {
    fs::create_directories(dir);
    const std::string stem = sanitize_query_id(query.id);
    const std::string net_name = stem + ".net.json";

    const Network flat = flatten_coupled(query.system);
    write_text_file_atomic(dir / net_name, network_to_json(flat) + "\n");

    const std::size_t n = query.system.input_width();
    std::ostringstream ss;
    ss << "diffq 1\n";
    for (std::size_t i = 0; i < n; ++i)
        ss << "input " << i << " " << format_double(query.x_bounds.per_feature[i].lo) << " "
           << format_double(query.x_bounds.per_feature[i].hi) << "\n";
    for (std::size_t i = 0; i < n; ++i)
        ss << "input " << (n + i) << " " << format_double(query.s_bounds.per_feature[i].lo) << " "
           << format_double(query.s_bounds.per_feature[i].hi) << "\n";
    ss << "net " << net_name << "\n";
    for (const auto &c : query.output_constraints) {
        ss << "lin";
        for (double v : c.coeffs)
            ss << " " << format_double(v);
        ss << " <= " << format_double(c.rhs) << "\n";
    }
    // Input-side conjuncts (clamped perturbation, temporal-trend
    // refinements). Coefficients run over the flattened inputs (x, s).
    for (const auto &c : query.extra) {
        ss << "linin";
        for (double v : c.coeffs_x)
            ss << " " << format_double(v);
        for (double v : c.coeffs_s)
            ss << " " << format_double(v);
        ss << (c.relation == LinearInputConstraint::Rel::Le ? " <= " : " >= ")
           << format_double(c.rhs) << "\n";
    }

    const fs::path qpath = dir / (stem + ".diffq");
    write_text_file_atomic(qpath, ss.str());
    return qpath;
}

Verdict import_result(const Query &query, const fs::path &result_file,
                      const std::string &engine_name) {
    Verdict v;
    v.engine = engine_name;

    std::ifstream in(result_file);
    if (!in)
        throw ParseError("cannot open result file '" + result_file.string() + "'");
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(result_file.string() + ": empty result file");

    if (line == "unsat") {
        v.status = VerdictStatus::Safe;
        return v;
    }
    if (line == "timeout") {
        v.status = VerdictStatus::Unknown;
        v.reason = UnknownReason::Timeout;
        return v;
    }
    if (line != "sat")
        throw ParseError(result_file.string() + ": first line must be sat|unsat|timeout, got '" +
                         line + "'");

    const std::size_t n = query.system.input_width();
    Vec assignment(2 * n, 0.0);
    std::vector<bool> seen(2 * n, false);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string tag;
        std::size_t k;
        double value;
        if (!(ls >> tag >> k >> value) || tag != "x")
            throw ParseError(result_file.string() + ": malformed assignment line '" + line + "'");
        if (k >= 2 * n)
            throw ParseError(result_file.string() + ": input index " + std::to_string(k) +
                             " out of range");
        assignment[k] = value;
        seen[k] = true;
    }
    for (std::size_t k = 0; k < 2 * n; ++k)
        if (!seen[k])
            throw ParseError(result_file.string() + ": missing assignment for input " +
                             std::to_string(k));

    Counterexample cex;
    cex.x.assign(assignment.begin(), assignment.begin() + n);
    cex.s.assign(assignment.begin() + n, assignment.end());
    cex.query_id = query.id;

    const CertifyResult cert = certify_counterexample(*query.system.net, query, cex);
    if (!cert.accepted) {
        v.status = VerdictStatus::Unknown;
        v.reason = UnknownReason::Uncertified;
        v.reason_text = "uncertified: " + cert.diagnostics;
        return v;
    }
    const PointCheck pc = check_point(query, cex.x, cex.s, 1e-9);
    cex.logits1 = pc.logits1;
    cex.logits2 = pc.logits2;
    if (query.pair)
        cex.achieved_pair = cert.achieved_pair;
    v.status = VerdictStatus::Unsafe;
    v.cex = std::move(cex);
    return v;
}

void write_result_file(const Verdict &verdict, const Query &query, const fs::path &path) {
    std::ostringstream ss;
    switch (verdict.status) {
    case VerdictStatus::Safe:
        ss << "unsat\n";
        break;
    case VerdictStatus::Unknown:
        ss << "timeout\n";
        break;
    case VerdictStatus::Unsafe: {
        if (!verdict.cex)
            throw ValidationError("write_result_file: Unsafe verdict without counterexample");
        ss << "sat\n";
        const auto &cex = *verdict.cex;
        for (std::size_t i = 0; i < cex.x.size(); ++i)
            ss << "x " << i << " " << format_double(cex.x[i]) << "\n";
        for (std::size_t i = 0; i < cex.s.size(); ++i)
            ss << "x " << (cex.x.size() + i) << " " << format_double(cex.s[i]) << "\n";
        break;
    }
    }
    (void)query;
    write_text_file_atomic(path, ss.str());
}

namespace {

const char *status_name(VerdictStatus s) {
    switch (s) {
    case VerdictStatus::Safe:
        return "safe";
    case VerdictStatus::Unsafe:
        return "unsafe";
    default:
        return "unknown";
    }
}

const char *reason_name(UnknownReason r) {
    switch (r) {
    case UnknownReason::Timeout:
        return "timeout";
    case UnknownReason::BudgetExhausted:
        return "budget-exhausted";
    case UnknownReason::EngineFailure:
        return "engine-failure";
    case UnknownReason::Uncertified:
        return "uncertified";
    default:
        return "no-result";
    }
}

json cex_to_json(const Counterexample &cex) {
    json j;
    j["x"] = cex.x;
    j["s"] = cex.s;
    j["logits1"] = cex.logits1;
    j["logits2"] = cex.logits2;
    if (cex.achieved_pair)
        j["achieved_pair"] = {cex.achieved_pair->i1, cex.achieved_pair->i2};
    j["query_id"] = cex.query_id;
    return j;
}

json verdict_to_json(const Verdict &v, bool include_timing) {
    json j;
    j["engine"] = v.engine;
    j["status"] = status_name(v.status);
    if (v.reason)
        j["reason"] = reason_name(*v.reason);
    if (!v.reason_text.empty())
        j["reason_text"] = v.reason_text;
    if (v.tolerance_closures > 0)
        j["tolerance_closures"] = v.tolerance_closures;
    if (v.cex)
        j["counterexample"] = cex_to_json(*v.cex);
    if (include_timing) {
        j["time_s"] = v.wall_time_s;
        j["subdomains"] = v.subdomains_explored;
    }
    return j;
}

const char *aggregate_name(PropertyResult::Aggregate a) {
    switch (a) {
    case PropertyResult::Aggregate::Safe:
        return "safe";
    case PropertyResult::Aggregate::Violated:
        return "violated";
    default:
        return "unknown";
    }
}

} // namespace

std::string conflict_artifact_json(const std::string &query_id,
                                   const std::vector<Verdict> &verdicts) {
    json j;
    j["conflict"] = true;
    j["query"] = query_id;
    json evs = json::array();
    for (const auto &v : verdicts)
        evs.push_back(verdict_to_json(v, true));
    j["engine_verdicts"] = std::move(evs);
    return j.dump(2);
}

std::string report_to_json(const PropertyResult &result, const std::string &model_name,
                           bool include_timing) {
    json j;
    j["report_version"] = 1;
    j["tool_version"] = "0.1.0";
    j["model"] = model_name;
    j["property"] = result.property;
    j["coverage"] = result.coverage_pct;
    json queries = json::array();
    for (const auto &q : result.per_query) {
        json qj;
        qj["id"] = q.query_id;
        json evs = json::array();
        for (const auto &v : q.engine_verdicts)
            evs.push_back(verdict_to_json(v, include_timing));
        qj["engine_verdicts"] = std::move(evs);
        qj["merged"] = status_name(q.merged.status);
        if (include_timing)
            qj["time_s"] = q.merged.wall_time_s;
        if (q.merged.status == VerdictStatus::Unsafe && q.merged.cex)
            qj["counterexample"] = cex_to_json(*q.merged.cex);
        queries.push_back(std::move(qj));
    }
    j["queries"] = std::move(queries);
    j["counts"] = {{"safe", result.n_safe}, {"unsafe", result.n_unsafe},
                   {"unknown", result.n_unknown}};
    j["aggregate"] = aggregate_name(result.aggregate);
    return j.dump(2);
}

std::string report_to_csv(const std::vector<PropertyResult> &results,
                          const std::string &model_name, bool include_timing) {
    std::ostringstream ss;
    ss << "model,property,coverage,query_id,merged";
    if (include_timing)
        ss << ",time_s";
    ss << ",engines,has_counterexample\n";
    for (const auto &r : results) {
        for (const auto &q : r.per_query) {
            ss << model_name << "," << r.property << "," << r.coverage_pct << "," << q.query_id
               << "," << status_name(q.merged.status);
            if (include_timing)
                ss << "," << q.merged.wall_time_s;
            ss << ",";
            for (std::size_t i = 0; i < q.engine_verdicts.size(); ++i) {
                if (i)
                    ss << ";";
                ss << q.engine_verdicts[i].engine << ":"
                   << status_name(q.engine_verdicts[i].status);
            }
            ss << "," << (q.merged.cex ? "yes" : "no") << "\n";
        }
    }
    return ss.str();
}

} // namespace diffrl
