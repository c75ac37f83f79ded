#include "diffrl/babverify.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <future>
#include <queue>

namespace diffrl {

namespace {

constexpr double kPruneMargin = 1e-9;   // certified strictness for infeasibility
constexpr double kClosureWidth = 1e-9;  // near-degenerate remainder
constexpr double kSlackPhaseRatio = 1e-4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Precomputed per-query state shared across subdomains.
struct QueryRuntime {
    const Query *query;
    Network flat;
    BoundsContext ctx;
    std::size_t n;  // per-copy input width
    std::size_t m2; // flattened output width
    // Extra input constraints normalized to  c . (x, s) <= rhs.
    std::vector<std::pair<Vec, double>> input_rows;
    std::vector<double> original_x_widths;

    explicit QueryRuntime(const Query &q)
        : query(&q), flat(flatten_coupled(q.system)), ctx(flat), n(q.system.input_width()),
          m2(2 * q.system.output_width()) {
        for (const auto &c : q.extra) {
            Vec row(2 * n, 0.0);
            double rhs = c.rhs;
            const double sign = c.relation == LinearInputConstraint::Rel::Le ? 1.0 : -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                row[i] = sign * c.coeffs_x[i];
                row[n + i] = sign * c.coeffs_s[i];
            }
            input_rows.emplace_back(std::move(row), sign * rhs);
        }
        for (const auto &iv : q.x_bounds.per_feature)
            original_x_widths.push_back(iv.width());
    }

    std::vector<Interval> joint_box(const SubDomain &sub) const {
        std::vector<Interval> box;
        box.reserve(2 * n);
        box.insert(box.end(), sub.x_box.begin(), sub.x_box.end());
        box.insert(box.end(), sub.s_box.begin(), sub.s_box.end());
        return box;
    }
};

double linear_min_over_box(const Vec &row, const std::vector<Interval> &box) {
    double v = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i)
        v += std::min(row[i] * box[i].lo, row[i] * box[i].hi);
    return v;
}

struct Probe {
    // Feasibility margin upper bound; negative beyond kPruneMargin means
    // the subdomain is certified infeasible.
    double score = std::numeric_limits<double>::infinity();
    bool pruned = false;
};

Probe probe_subdomain(const QueryRuntime &rt, const SubDomain &sub) {
    Probe p;
    const auto box = rt.joint_box(sub);

    // Input-side constraints first: linear over the box, exact endpoints.
    for (const auto &[row, rhs] : rt.input_rows) {
        const double margin = rhs - linear_min_over_box(row, box);
        p.score = std::min(p.score, margin);
        if (margin < -kPruneMargin) {
            p.pruned = true;
            return p;
        }
    }

    const auto stages = rt.ctx.interval_bounds(box);

    // Joint propagation of the conjunctive output constraints over the
    // interval output box; an emptied interval certifies infeasibility.
    const auto tight = tighten_with_output_constraints(stages.back().per_neuron,
                                                       rt.query->output_constraints);
    if (tight.infeasible) {
        p.pruned = true;
        p.score = -std::numeric_limits<double>::infinity();
        return p;
    }

    for (const auto &c : rt.query->output_constraints) {
        const double lb = rt.ctx.lower_bound(box, stages, c.coeffs, 0.0);
        const double margin = c.rhs - lb;
        p.score = std::min(p.score, margin);
        if (margin < -kPruneMargin) {
            p.pruned = true;
            return p;
        }
    }
    return p;
}

Vec box_center(const std::vector<Interval> &box) {
    Vec c(box.size());
    for (std::size_t i = 0; i < box.size(); ++i)
        c[i] = 0.5 * (box[i].lo + box[i].hi);
    return c;
}

std::optional<Counterexample> try_point(const Query &query, std::span<const double> x,
                                        std::span<const double> s) {
    const PointCheck pc = check_point(query, x, s, 0.0);
    if (!pc.satisfied)
        return std::nullopt;
    Counterexample cex;
    cex.x.assign(x.begin(), x.end());
    cex.s.assign(s.begin(), s.end());
    cex.logits1 = pc.logits1;
    cex.logits2 = pc.logits2;
    if (query.pair)
        cex.achieved_pair = InvalidPair{pc.achieved1, pc.achieved2};
    cex.query_id = query.id;
    return cex;
}

double point_margin(const QueryRuntime &rt, const Vec &v, const Vec &logits) {
    // min over all constraints of (rhs - lhs); >= 0 means feasible.
    double margin = std::numeric_limits<double>::infinity();
    for (const auto &[row, rhs] : rt.input_rows) {
        double lhs = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i)
            lhs += row[i] * v[i];
        margin = std::min(margin, rhs - lhs);
    }
    for (const auto &c : rt.query->output_constraints) {
        double lhs = 0.0;
        for (std::size_t t = 0; t < logits.size(); ++t)
            lhs += c.coeffs[t] * logits[t];
        margin = std::min(margin, c.rhs - lhs);
    }
    return margin;
}

bool all_widths_below(const std::vector<Interval> &box, double limit) {
    for (const auto &iv : box)
        if (iv.width() > limit)
            return false;
    return true;
}

} // namespace

std::pair<SubDomain, SubDomain> branch(const SubDomain &sub,
                                       const std::vector<double> &original_x_widths) {
    bool x_phase_done = true;
    for (std::size_t i = 0; i < sub.x_box.size(); ++i) {
        const double orig = i < original_x_widths.size() ? original_x_widths[i]
                                                         : sub.x_box[i].width();
        if (sub.x_box[i].width() > kSlackPhaseRatio * orig) {
            x_phase_done = false;
            break;
        }
    }

    auto widest = [](const std::vector<Interval> &box) -> std::pair<std::size_t, double> {
        std::size_t idx = box.size();
        double w = 0.0;
        for (std::size_t i = 0; i < box.size(); ++i)
            if (box[i].width() > w) {
                w = box[i].width();
                idx = i;
            }
        return {idx, w};
    };

    bool split_x = true;
    std::size_t dim = sub.x_box.size();
    if (!x_phase_done) {
        dim = widest(sub.x_box).first;
    } else {
        auto [sdim, sw] = widest(sub.s_box);
        if (sdim < sub.s_box.size()) {
            split_x = false;
            dim = sdim;
        } else {
            dim = widest(sub.x_box).first; // slack exhausted, keep refining x
        }
    }
    if (dim >= (split_x ? sub.x_box.size() : sub.s_box.size()))
        throw ValidationError("branch: fully degenerate subdomain");

    SubDomain lo = sub, hi = sub;
    lo.depth = hi.depth = sub.depth + 1;
    auto &lo_iv = split_x ? lo.x_box[dim] : lo.s_box[dim];
    auto &hi_iv = split_x ? hi.x_box[dim] : hi.s_box[dim];
    const double mid = 0.5 * (lo_iv.lo + lo_iv.hi);
    lo_iv.hi = mid;
    hi_iv.lo = mid;
    return {std::move(lo), std::move(hi)};
}

std::pair<SubDomain, SubDomain> branch(const SubDomain &sub) {
    std::vector<double> orig;
    for (const auto &iv : sub.x_box)
        orig.push_back(iv.width());
    return branch(sub, orig);
}

std::optional<Counterexample> falsify(const Query &query, std::size_t samples,
                                      std::size_t descent_steps, std::uint64_t seed) {
    QueryRuntime rt(query);
    const std::size_t dims = 2 * rt.n;
    std::vector<Interval> box;
    box.insert(box.end(), query.x_bounds.per_feature.begin(), query.x_bounds.per_feature.end());
    box.insert(box.end(), query.s_bounds.per_feature.begin(), query.s_bounds.per_feature.end());

    SeededUniform rng(seed ^ 0xD1FFB10CULL);

    auto eval_margin = [&](const Vec &v) {
        Vec logits = forward(rt.flat, v);
        return point_margin(rt, v, logits);
    };

    Vec best;
    double best_margin = -std::numeric_limits<double>::infinity();
    Vec v(dims);
    for (std::size_t k = 0; k < samples; ++k) {
        for (std::size_t i = 0; i < dims; ++i)
            v[i] = rng.range(box[i].lo, box[i].hi);
        const double m = eval_margin(v);
        if (m > best_margin) {
            best_margin = m;
            best = v;
        }
        if (m >= 0.0) {
            auto cex = try_point(query, std::span(v).first(rt.n), std::span(v).subspan(rt.n));
            if (cex)
                return cex;
        }
    }
    if (best.empty())
        return std::nullopt;

    // Coordinate descent on the violation margin from the best sample.
    Vec cur = best;
    double cur_margin = best_margin;
    double scale = 0.25;
    for (std::size_t step = 0; step < descent_steps; ++step) {
        bool improved = false;
        for (std::size_t i = 0; i < dims; ++i) {
            const double w = box[i].width();
            if (w <= 0.0)
                continue;
            const double delta = w * scale;
            for (const double dir : {+1.0, -1.0}) {
                Vec cand = cur;
                cand[i] = std::clamp(cur[i] + dir * delta, box[i].lo, box[i].hi);
                if (cand[i] == cur[i])
                    continue;
                const double m = eval_margin(cand);
                if (m > cur_margin) {
                    cur = std::move(cand);
                    cur_margin = m;
                    improved = true;
                    break;
                }
            }
        }
        if (cur_margin >= 0.0) {
            auto cex = try_point(query, std::span(cur).first(rt.n), std::span(cur).subspan(rt.n));
            if (cex)
                return cex;
        }
        if (!improved) {
            scale *= 0.5;
            if (scale < 1e-12)
                break;
        }
    }
    return std::nullopt;
}

namespace {

struct QueueItem {
    double score;
    std::uint64_t seq;
    SubDomain sub;
};

struct QueueCmp {
    bool operator()(const QueueItem &a, const QueueItem &b) const {
        if (a.score != b.score)
            return a.score < b.score; // max-heap on score
        return a.seq > b.seq;         // FIFO on ties
    }
};

struct NodeOutcome {
    bool pruned = false;
    bool closure = false; // pruned by the near-degenerate remainder rule
    std::optional<Counterexample> cex;
    double score = 0.0;
    SubDomain sub;
};

NodeOutcome evaluate_node(const QueryRuntime &rt, SubDomain sub) {
    NodeOutcome out;
    const Probe p = probe_subdomain(rt, sub);
    if (p.pruned) {
        out.pruned = true;
        return out;
    }

    const auto box = rt.joint_box(sub);
    const Vec center = box_center(box);
    auto cex = try_point(*rt.query, std::span(center).first(rt.n),
                         std::span(center).subspan(rt.n));
    if (cex) {
        out.cex = std::move(cex);
        return out;
    }

    // Near-degenerate remainder: undecided but below resolution. The
    // center was just evaluated exactly and does not satisfy the
    // constraints, so close the subdomain (tolerance-closure).
    if (all_widths_below(box, kClosureWidth)) {
        out.pruned = true;
        out.closure = true;
        return out;
    }

    out.score = p.score;
    out.sub = std::move(sub);
    return out;
}

} // namespace

Verdict verify_query(const Query &query, const Budget &budget) {
    const auto t0 = Clock::now();
    Verdict verdict;
    verdict.engine = "native";

    auto finish = [&](VerdictStatus st) {
        verdict.status = st;
        verdict.wall_time_s = seconds_since(t0);
        return verdict;
    };
    auto unknown = [&](UnknownReason r, const std::string &text) {
        verdict.reason = r;
        verdict.reason_text = text;
        return finish(VerdictStatus::Unknown);
    };

    try {
        if (budget.timeout_s <= 0.0)
            return unknown(UnknownReason::Timeout, "timeout budget exhausted before start");

        QueryRuntime rt(query);

        // Quick falsification pass: counterexamples are common on early
        // checkpoints, so look for one before spending bound effort.
        if (budget.falsify_samples > 0) {
            auto cex = falsify(query, budget.falsify_samples, budget.falsify_descent_steps,
                               budget.seed);
            if (cex) {
                verdict.cex = std::move(cex);
                return finish(VerdictStatus::Unsafe);
            }
        }

        std::priority_queue<QueueItem, std::vector<QueueItem>, QueueCmp> queue;
        std::uint64_t seq = 0;

        SubDomain root;
        root.x_box = query.x_bounds.per_feature;
        root.s_box = query.s_bounds.per_feature;

        if (budget.max_subdomains == 0)
            return unknown(UnknownReason::BudgetExhausted, "max_subdomains budget is zero");
        verdict.subdomains_explored = 1;
        NodeOutcome root_out = evaluate_node(rt, std::move(root));
        if (root_out.cex) {
            verdict.cex = std::move(root_out.cex);
            return finish(VerdictStatus::Unsafe);
        }
        if (root_out.closure)
            ++verdict.tolerance_closures;
        if (!root_out.pruned)
            queue.push({root_out.score, seq++, std::move(root_out.sub)});

        const int threads = std::max(1, budget.threads);

        while (!queue.empty()) {
            if (seconds_since(t0) > budget.timeout_s)
                return unknown(UnknownReason::Timeout, "per-query timeout reached");

            // Pop a wave of the most promising subdomains and evaluate
            // their children concurrently; merge in deterministic order.
            std::vector<SubDomain> wave;
            const std::size_t wave_target = static_cast<std::size_t>(threads);
            while (!queue.empty() && wave.size() < wave_target) {
                wave.push_back(std::move(const_cast<QueueItem &>(queue.top()).sub));
                queue.pop();
            }

            std::vector<SubDomain> children;
            children.reserve(2 * wave.size());
            for (auto &parent : wave) {
                try {
                    auto [a, b] = branch(parent, rt.original_x_widths);
                    children.push_back(std::move(a));
                    children.push_back(std::move(b));
                } catch (const ValidationError &) {
                    // Fully degenerate: the center (the point itself) was
                    // already evaluated when this node was created.
                }
            }

            if (verdict.subdomains_explored + children.size() > budget.max_subdomains)
                return unknown(UnknownReason::BudgetExhausted,
                               "max_subdomains budget reached (" +
                                   std::to_string(budget.max_subdomains) + ")");
            verdict.subdomains_explored += children.size();

            std::vector<NodeOutcome> outcomes(children.size());
            if (threads == 1 || children.size() <= 1) {
                for (std::size_t i = 0; i < children.size(); ++i)
                    outcomes[i] = evaluate_node(rt, std::move(children[i]));
            } else {
                std::atomic<std::size_t> next{0};
                auto worker = [&]() {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= children.size())
                            return;
                        outcomes[i] = evaluate_node(rt, std::move(children[i]));
                    }
                };
                std::vector<std::future<void>> futs;
                for (int t = 0; t < threads; ++t)
                    futs.push_back(std::async(std::launch::async, worker));
                for (auto &f : futs)
                    f.get();
            }

            for (auto &out : outcomes) {
                if (out.cex) {
                    verdict.cex = std::move(out.cex);
                    return finish(VerdictStatus::Unsafe);
                }
            }
            for (auto &out : outcomes) {
                if (out.closure)
                    ++verdict.tolerance_closures;
                if (!out.pruned)
                    queue.push({out.score, seq++, std::move(out.sub)});
            }
        }

        return finish(VerdictStatus::Safe);
    } catch (const std::exception &e) {
        return unknown(UnknownReason::EngineFailure, e.what());
    }
}

} // namespace diffrl
