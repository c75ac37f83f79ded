#pragma once

#include "diffrl/bounds.hpp"
#include "diffrl/encoder.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace diffrl {

/// One sub-box of a query's (x, s) domain in the branch-and-bound tree.
struct SubDomain {
    std::vector<Interval> x_box;
    std::vector<Interval> s_box;
    int depth = 0;
    double score = 0.0; // upper bound on the feasibility margin
};

struct Counterexample {
    Vec x;
    Vec s;
    Vec logits1;
    Vec logits2;
    std::optional<InvalidPair> achieved_pair; // discrete mode
    std::string query_id;
};

enum class VerdictStatus { Safe, Unsafe, Unknown };
enum class UnknownReason { Timeout, BudgetExhausted, EngineFailure, Uncertified, NoResult };

struct Verdict {
    VerdictStatus status = VerdictStatus::Unknown;
    std::optional<Counterexample> cex;
    std::optional<UnknownReason> reason;
    std::string reason_text;
    double wall_time_s = 0.0;
    std::size_t subdomains_explored = 0;
    /// Undecided subdomains closed at the 1e-9 width floor after an
    /// exact center evaluation; nonzero means Safe holds up to
    /// measure-zero tie sets.
    std::size_t tolerance_closures = 0;
    std::string engine;
};

struct Budget {
    double timeout_s = 600.0;
    std::size_t max_subdomains = 4'000'000;
    std::uint64_t seed = 0;
    int threads = 1;                 // concurrent subdomain evaluations per wave
    std::size_t falsify_samples = 4096;
    std::size_t falsify_descent_steps = 48;
};

/// Complete input-domain branch-and-bound on one query.
///
/// Safe is returned only when every leaf subdomain carries a sound
/// infeasibility certificate (some argmax/mean constraint provably
/// cannot hold, with strictness margin >= 1e-9). Unsafe always carries
/// a counterexample that replays exactly. Budget exhaustion folds into
/// Unknown. Deterministic for a fixed (query, budget) including seed
/// and thread count.
Verdict verify_query(const Query &query, const Budget &budget);

/// Sampling plus coordinate-descent search for a feasible point of the
/// query. Returns a point satisfying every constraint (checked by
/// concrete replay) or nothing; absence is not a verdict.
std::optional<Counterexample> falsify(const Query &query, std::size_t samples,
                                      std::size_t descent_steps, std::uint64_t seed);

/// Splits the widest interval (ties toward the lowest index) at its
/// midpoint, x dimensions first; s dimensions are split only once every
/// x width has shrunk below 1e-4 of its original width. Children tile
/// the parent exactly. Throws ValidationError on a fully degenerate
/// subdomain.
std::pair<SubDomain, SubDomain> branch(const SubDomain &sub);
std::pair<SubDomain, SubDomain> branch(const SubDomain &sub,
                                       const std::vector<double> &original_x_widths);

} // namespace diffrl
