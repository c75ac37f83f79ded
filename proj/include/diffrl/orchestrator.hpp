#pragma once

#include "diffrl/babverify.hpp"
#include "diffrl/encoder.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace diffrl {

/// A verification backend. Native engines run in-process; external
/// engines only communicate through exported query bundles and imported
/// result files.
struct EngineContract {
    std::string name;
    enum class Capability { Native, ExternalExport } capability = Capability::Native;
    std::function<Verdict(const Query &, const Budget &)> invoke;
};

EngineContract make_native_engine();

/// External adapter: exports the query bundle under export_dir and
/// imports `<query-id>.result` from results_dir when present; a missing
/// result file yields Unknown(NoResult).
EngineContract make_external_engine(const std::string &name,
                                    const std::filesystem::path &export_dir,
                                    const std::filesystem::path &results_dir);

/// Raised when one engine proves a query Safe while another holds a
/// certified counterexample for it: a soundness contradiction.
struct ConflictError : std::runtime_error {
    std::string query_id;
    std::string safe_engine;
    std::string unsafe_engine;

    ConflictError(std::string qid, std::string se, std::string ue)
        : std::runtime_error("engine conflict on query '" + qid + "': '" + se +
                             "' reports Safe while '" + ue + "' holds a certified counterexample"),
          query_id(std::move(qid)), safe_engine(std::move(se)), unsafe_engine(std::move(ue)) {}
};

struct QueryOutcome {
    std::string query_id;
    std::vector<Verdict> engine_verdicts;
    Verdict merged;
};

struct PropertyResult {
    std::string property;
    double coverage_pct = 100.0;
    std::vector<QueryOutcome> per_query;
    enum class Aggregate { Safe, Violated, Unknown } aggregate = Aggregate::Unknown;
    std::size_t n_safe = 0, n_unsafe = 0, n_unknown = 0;
};

/// Runs every (query, engine) pair; queries run independently and in
/// parallel (worker count from DIFFRL_THREADS, clamped to hardware).
/// An engine crash folds into Unknown for that pair, never aborting the
/// batch. Result order matches the input order.
std::vector<std::vector<Verdict>> dispatch(const std::vector<Query> &queries,
                                           const std::vector<EngineContract> &engines,
                                           const Budget &budget);

struct CertifyResult {
    bool accepted = false;
    std::string diagnostics; // names the first failed check on rejection
    std::optional<InvalidPair> achieved_pair;
};

/// Independent concrete replay of a claimed counterexample through both
/// policy copies. Accepts iff the point is inside all bounds and extra
/// constraints within tol and every query constraint holds within tol
/// (for discrete queries: the target indices attain the max within the
/// tie tolerance).
CertifyResult certify_counterexample(const Network &net, const Query &query,
                                     const Counterexample &cex, double tol = 1e-9);

/// Soundness-preserving merge: any certified Unsafe wins (first kept),
/// else any Safe, else Unknown. Throws ConflictError on simultaneous
/// Safe and certified Unsafe.
Verdict merge_engine_verdicts(const std::string &query_id, const std::vector<Verdict> &verdicts);

PropertyResult aggregate_property(const std::string &property, double coverage_pct,
                                  std::vector<QueryOutcome> outcomes);

/// Writes the query bundle: `<id>.net.json` (flattened coupled network)
/// and `<id>.diffq` (line-oriented constraint file). Returns the
/// constraint file path.
std::filesystem::path export_query(const Query &query, const std::filesystem::path &dir);

/// Parses `sat` (+assignment) | `unsat` | `timeout`; sat claims are
/// routed through certify_counterexample and demote to Unknown when
/// uncertified.
Verdict import_result(const Query &query, const std::filesystem::path &result_file,
                      const std::string &engine_name = "external");

/// Adapter-side helper: writes the result file an external engine would
/// produce for this verdict.
void write_result_file(const Verdict &verdict, const Query &query,
                       const std::filesystem::path &path);

std::string sanitize_query_id(const std::string &id);

/// Serialized record of a Safe/Unsafe engine disagreement, written out
/// before a conflict aborts the property.
std::string conflict_artifact_json(const std::string &query_id,
                                   const std::vector<Verdict> &verdicts);

/// Report generation. One document per (property, coverage) pair.
std::string report_to_json(const PropertyResult &result, const std::string &model_name,
                           bool include_timing = true);
std::string report_to_csv(const std::vector<PropertyResult> &results,
                          const std::string &model_name, bool include_timing = true);
void write_text_file_atomic(const std::filesystem::path &path, const std::string &content);

} // namespace diffrl
