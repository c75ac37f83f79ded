#include "diffrl/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace diffrl {

namespace {

double pair_distance(const ActionDecoder &decoder, ActionMetric metric, std::size_t i,
                     std::size_t j) {
    if (metric == ActionMetric::Levels)
        return double(i) - double(j);
    return decoder.action_values[i] - decoder.action_values[j];
}

bool violates(double value, double d, ViolationRule rule) {
    return rule == ViolationRule::AtLeast ? value >= d : value > d;
}

} // namespace

std::vector<InvalidPair> enumerate_invalid_pairs(const ActionDecoder &decoder,
                                                 const ComparisonSpec &comparison) {
    if (decoder.mode != ActionDecoder::Mode::Discrete)
        throw ValidationError("enumerate_invalid_pairs: decoder is not discrete");
    const std::size_t m = decoder.action_values.size();
    std::vector<InvalidPair> pairs;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            // i: copy-1 (base) action index, j: copy-2 (perturbed) index.
            const double dist = pair_distance(decoder, comparison.metric, i, j);
            double f;
            if (comparison.kind == ComparisonSpec::Kind::AbsDiff)
                f = std::abs(dist);
            else
                f = comparison.direction > 0 ? dist : -dist;
            if (violates(f, comparison.threshold_d, comparison.rule))
                pairs.push_back({i, j});
        }
    }
    return pairs;
}

Network flatten_coupled(const CoupledSystem &system) {
    const Network &net = *system.net;
    const std::size_t n = net.input_width;

    Network flat;
    flat.name = net.name + "#coupled";
    flat.input_width = 2 * n;

    // Coupling layer: (x, s) -> (x, x + s). Keeping x + s as a single
    // addition preserves bit-exact agreement with a separate forward
    // pass on x + s.
    AffineLayer couple;
    couple.weights = Matrix(2 * n, 2 * n);
    couple.bias.assign(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        couple.weights.at(i, i) = 1.0;
        couple.weights.at(n + i, i) = 1.0;
        couple.weights.at(n + i, n + i) = 1.0;
    }
    flat.layers.emplace_back(std::move(couple));

    std::size_t width = n; // per-copy width entering the next original layer
    for (const auto &l : net.layers) {
        if (const auto *a = std::get_if<AffineLayer>(&l)) {
            AffineLayer dup;
            const std::size_t o = a->out_width(), i_w = a->in_width();
            dup.weights = Matrix(2 * o, 2 * i_w);
            dup.bias.resize(2 * o);
            for (std::size_t r = 0; r < o; ++r) {
                for (std::size_t c = 0; c < i_w; ++c) {
                    dup.weights.at(r, c) = a->weights.at(r, c);
                    dup.weights.at(o + r, i_w + c) = a->weights.at(r, c);
                }
                dup.bias[r] = a->bias[r];
                dup.bias[o + r] = a->bias[r];
            }
            flat.layers.emplace_back(std::move(dup));
            width = o;
        } else if (const auto *s = std::get_if<SplitEmbedConcat>(&l)) {
            SplitEmbedConcat dup;
            for (const auto &seg : s->segments)
                dup.segments.push_back(seg);
            for (const auto &seg : s->segments) {
                SegmentEmbed shifted = seg;
                shifted.offset += width;
                dup.segments.push_back(std::move(shifted));
            }
            width = s->out_width();
            flat.layers.emplace_back(std::move(dup));
        } else {
            flat.layers.emplace_back(ReluLayer{});
        }
    }

    // The flattened outputs are raw logit pairs; the decoder slot is a
    // placeholder so the result is still a valid Network.
    flat.decoder = ActionDecoder::continuous_mean(0, 1.0);
    validate_network(flat);
    return flat;
}

namespace {

LinearOutputConstraint argmax_constraint(std::size_t m_total, std::size_t t, std::size_t winner,
                                         std::size_t offset) {
    // L[offset + t] - L[offset + winner] <= 0
    LinearOutputConstraint c;
    c.coeffs.assign(m_total, 0.0);
    c.coeffs[offset + t] = 1.0;
    c.coeffs[offset + winner] = -1.0;
    c.rhs = 0.0;
    return c;
}

std::vector<LinearInputConstraint> clamp_constraints(const InputDomain &covered) {
    // x + s within the covered operational box, one pair per feature.
    std::vector<LinearInputConstraint> out;
    const std::size_t n = covered.width();
    for (std::size_t i = 0; i < n; ++i) {
        LinearInputConstraint up;
        up.coeffs_x.assign(n, 0.0);
        up.coeffs_s.assign(n, 0.0);
        up.coeffs_x[i] = 1.0;
        up.coeffs_s[i] = 1.0;
        up.relation = LinearInputConstraint::Rel::Le;
        up.rhs = covered.per_feature[i].hi;
        LinearInputConstraint down = up;
        down.relation = LinearInputConstraint::Rel::Ge;
        down.rhs = covered.per_feature[i].lo;
        out.push_back(std::move(up));
        out.push_back(std::move(down));
    }
    return out;
}

} // namespace

std::vector<Query> generate_queries(std::shared_ptr<const Network> net_ptr,
                                    const PropertySpec &prop) {
    const Network &net = *net_ptr;
    validate_property(prop);
    if (prop.domain.width() != net.input_width)
        throw ValidationError("generate_queries: property width " +
                              std::to_string(prop.domain.width()) + " != network input width " +
                              std::to_string(net.input_width));
    const bool discrete = net.decoder.mode == ActionDecoder::Mode::Discrete;
    if (discrete != prop.comparison.has_value())
        throw ValidationError("generate_queries: property mode does not match decoder mode");

    const std::size_t m = net.output_width();
    CoupledSystem system{net_ptr};

    Query base;
    base.system = system;
    base.x_bounds = apply_coverage(prop.domain, prop.coverage_pct);
    base.s_bounds = prop.slack;
    base.extra = prop.extra_constraints;
    if (prop.clamp_perturbed) {
        auto clamps = clamp_constraints(base.x_bounds);
        base.extra.insert(base.extra.end(), clamps.begin(), clamps.end());
    }

    // Disjunctive refinements expand into one purely conjunctive variant
    // per alternative.
    std::vector<std::vector<LinearInputConstraint>> variants;
    if (prop.disjunctive_variants.empty())
        variants.push_back({});
    else
        for (const auto &c : prop.disjunctive_variants)
            variants.push_back({c});

    const bool zero_slack = prop.slack.all_zero();
    std::vector<Query> queries;

    auto emit = [&](Query q, const std::string &tag) {
        for (std::size_t v = 0; v < variants.size(); ++v) {
            Query qq = q;
            qq.extra.insert(qq.extra.end(), variants[v].begin(), variants[v].end());
            qq.id = prop.name + "/" + tag + "/v" + std::to_string(v);
            queries.push_back(std::move(qq));
        }
    };

    if (discrete) {
        std::vector<InvalidPair> pairs;
        if (zero_slack) {
            // With s pinned to zero both copies read the same input, so the
            // deployed actions are always identical; only diagonal pairs are
            // reachable and they are invalid exactly when f(a,a) = 0 violates.
            if (violates(0.0, prop.comparison->threshold_d, prop.comparison->rule))
                for (std::size_t i = 0; i < m; ++i)
                    pairs.push_back({i, i});
        } else {
            pairs = enumerate_invalid_pairs(net.decoder, *prop.comparison);
        }
        for (const auto &p : pairs) {
            Query q = base;
            q.pair = p;
            q.metric = prop.comparison->metric;
            for (std::size_t t = 0; t < m; ++t) {
                if (t != p.i1)
                    q.output_constraints.push_back(argmax_constraint(2 * m, t, p.i1, 0));
                if (t != p.i2)
                    q.output_constraints.push_back(argmax_constraint(2 * m, t, p.i2, m));
            }
            emit(std::move(q), "pair" + std::to_string(p.i1) + "-" + std::to_string(p.i2));
        }
    } else {
        const auto &a = *prop.anchor;
        const std::size_t mi = net.decoder.mean_index;
        // With zero slack the two means coincide and the anchored region
        // [lo, hi] /\ (-inf, lo - sep] is empty since sep > 0.
        if (!zero_slack) {
            auto make_dir = [&](bool mirrored) {
                Query q = base;
                LinearOutputConstraint anchor_lo, sep;
                anchor_lo.coeffs.assign(2 * m, 0.0);
                sep.coeffs.assign(2 * m, 0.0);
                if (!mirrored) {
                    // L1_mi >= lo  and  L2_mi <= lo - sep
                    anchor_lo.coeffs[mi] = -1.0;
                    anchor_lo.rhs = -a.mean_bound.lo;
                    sep.coeffs[m + mi] = 1.0;
                    sep.rhs = a.mean_bound.lo - a.separation_d;
                } else {
                    // L1_mi <= -lo  and  L2_mi >= -(lo - sep)
                    anchor_lo.coeffs[mi] = 1.0;
                    anchor_lo.rhs = -a.mean_bound.lo;
                    sep.coeffs[m + mi] = -1.0;
                    sep.rhs = a.mean_bound.lo - a.separation_d;
                }
                q.output_constraints.push_back(std::move(anchor_lo));
                if (std::isfinite(a.mean_bound.hi)) {
                    LinearOutputConstraint anchor_hi;
                    anchor_hi.coeffs.assign(2 * m, 0.0);
                    anchor_hi.coeffs[mi] = mirrored ? -1.0 : 1.0;
                    anchor_hi.rhs = a.mean_bound.hi;
                    q.output_constraints.push_back(std::move(anchor_hi));
                }
                q.output_constraints.push_back(std::move(sep));
                emit(std::move(q), mirrored ? "mean-rise" : "mean-drop");
            };
            make_dir(false);
            if (a.both_directions)
                make_dir(true);
        }
    }
    return queries;
}

std::vector<Query> generate_queries(const Network &net, const PropertySpec &prop) {
    return generate_queries(std::make_shared<Network>(net), prop);
}

PointCheck check_point(const Query &query, std::span<const double> x, std::span<const double> s,
                       double tol) {
    PointCheck res;
    const std::size_t n = query.system.input_width();
    if (x.size() != n || s.size() != n) {
        res.first_failure = "dimension mismatch";
        return res;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!query.x_bounds.per_feature[i].contains(x[i], tol)) {
            res.first_failure = "x[" + std::to_string(i) + "]=" + std::to_string(x[i]) +
                                " outside [" + std::to_string(query.x_bounds.per_feature[i].lo) +
                                ", " + std::to_string(query.x_bounds.per_feature[i].hi) + "]";
            return res;
        }
        if (!query.s_bounds.per_feature[i].contains(s[i], tol)) {
            res.first_failure = "s[" + std::to_string(i) + "]=" + std::to_string(s[i]) +
                                " outside [" + std::to_string(query.s_bounds.per_feature[i].lo) +
                                ", " + std::to_string(query.s_bounds.per_feature[i].hi) + "]";
            return res;
        }
    }
    for (std::size_t k = 0; k < query.extra.size(); ++k) {
        const auto &c = query.extra[k];
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            v += c.coeffs_x[i] * x[i] + c.coeffs_s[i] * s[i];
        const bool ok = c.relation == LinearInputConstraint::Rel::Le ? v <= c.rhs + tol
                                                                     : v >= c.rhs - tol;
        if (!ok) {
            res.first_failure = "input constraint " + std::to_string(k) + " violated (lhs=" +
                                std::to_string(v) + ", rhs=" + std::to_string(c.rhs) + ")";
            return res;
        }
    }

    Vec xp(n);
    for (std::size_t i = 0; i < n; ++i)
        xp[i] = x[i] + s[i];
    res.logits1 = forward(*query.system.net, x);
    res.logits2 = forward(*query.system.net, xp);
    res.achieved1 = argmax_lowest_tie(res.logits1);
    res.achieved2 = argmax_lowest_tie(res.logits2);

    const std::size_t m = res.logits1.size();
    for (std::size_t k = 0; k < query.output_constraints.size(); ++k) {
        const auto &c = query.output_constraints[k];
        double v = 0.0;
        for (std::size_t t = 0; t < m; ++t)
            v += c.coeffs[t] * res.logits1[t] + c.coeffs[m + t] * res.logits2[t];
        if (!(v <= c.rhs + tol)) {
            res.first_failure = "output constraint " + std::to_string(k) + " violated (lhs=" +
                                std::to_string(v) + ", rhs=" + std::to_string(c.rhs) + ")";
            return res;
        }
    }
    res.satisfied = true;
    return res;
}

} // namespace diffrl
