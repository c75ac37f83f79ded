#include "diffrl/property.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace diffrl {

using nlohmann::json;

bool SlackSpec::all_zero() const {
    for (const auto &iv : per_feature)
        if (iv.lo != 0.0 || iv.hi != 0.0)
            return false;
    return true;
}

namespace {

void validate_intervals(const std::vector<Interval> &ivs, const std::string &what) {
    for (std::size_t i = 0; i < ivs.size(); ++i) {
        const auto &iv = ivs[i];
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi))
            throw ValidationError(what + "[" + std::to_string(i) + "]: non-finite bound");
        if (!(iv.lo <= iv.hi))
            throw ValidationError(what + "[" + std::to_string(i) + "]: lo " +
                                  std::to_string(iv.lo) + " > hi " + std::to_string(iv.hi));
    }
}

void validate_constraint(const LinearInputConstraint &c, std::size_t width,
                         const std::string &what) {
    if (c.coeffs_x.size() != width || c.coeffs_s.size() != width)
        throw ValidationError(what + ": coefficient lengths (" + std::to_string(c.coeffs_x.size()) +
                              ", " + std::to_string(c.coeffs_s.size()) +
                              ") do not match input width " + std::to_string(width));
    if (!all_finite(c.coeffs_x) || !all_finite(c.coeffs_s) || !std::isfinite(c.rhs))
        throw ValidationError(what + ": non-finite coefficient");
}

} // namespace

void validate_property(const PropertySpec &prop) {
    const std::size_t n = prop.domain.width();
    if (n == 0)
        throw ValidationError("property '" + prop.name + "': empty input domain");
    validate_intervals(prop.domain.per_feature, "domain");
    if (prop.slack.width() != n)
        throw ValidationError("property '" + prop.name + "': slack width " +
                              std::to_string(prop.slack.width()) + " != domain width " +
                              std::to_string(n));
    validate_intervals(prop.slack.per_feature, "slack");
    for (std::size_t i = 0; i < prop.extra_constraints.size(); ++i)
        validate_constraint(prop.extra_constraints[i], n,
                            "extra_constraints[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < prop.disjunctive_variants.size(); ++i)
        validate_constraint(prop.disjunctive_variants[i], n,
                            "disjunctive_variants[" + std::to_string(i) + "]");

    if (prop.comparison.has_value() == prop.anchor.has_value())
        throw ValidationError("property '" + prop.name +
                              "': exactly one of comparison/anchor must be present");
    if (prop.comparison) {
        if (!(prop.comparison->threshold_d >= 0.0))
            throw ValidationError("property '" + prop.name + "': threshold_d must be >= 0");
        if (prop.comparison->kind == ComparisonSpec::Kind::Directional &&
            prop.comparison->direction != +1 && prop.comparison->direction != -1)
            throw ValidationError("property '" + prop.name + "': direction must be +1 or -1");
    }
    if (prop.anchor) {
        const auto &a = *prop.anchor;
        if (!std::isfinite(a.mean_bound.lo))
            throw ValidationError("property '" + prop.name + "': anchor lower bound must be finite");
        if (!(a.mean_bound.lo <= a.mean_bound.hi))
            throw ValidationError("property '" + prop.name + "': anchor interval inverted");
        if (!(a.separation_d > 0.0))
            throw ValidationError("property '" + prop.name + "': separation_d must be > 0");
    }
    if (!(prop.coverage_pct > 0.0 && prop.coverage_pct <= 100.0))
        throw ValidationError("property '" + prop.name + "': coverage_pct outside (0, 100]");
}

PropertySpec make_robustness(const InputDomain &domain, double epsilon, double d) {
    if (!(epsilon > 0.0))
        throw ValidationError("make_robustness: epsilon must be positive");
    if (!(d >= 0.0))
        throw ValidationError("make_robustness: d must be >= 0");
    PropertySpec p;
    p.name = "robustness";
    p.domain = domain;
    p.slack.per_feature.assign(domain.width(), Interval{-epsilon, epsilon});
    ComparisonSpec c;
    c.kind = ComparisonSpec::Kind::AbsDiff;
    c.threshold_d = d;
    p.comparison = c;
    validate_property(p);
    return p;
}

PropertySpec make_monotonicity(const InputDomain &domain, const std::vector<std::size_t> &features,
                               int direction, double epsilon, double d) {
    if (!(epsilon > 0.0))
        throw ValidationError("make_monotonicity: epsilon must be positive");
    if (features.empty())
        throw ValidationError("make_monotonicity: empty feature index set");
    if (direction != +1 && direction != -1)
        throw ValidationError("make_monotonicity: direction must be +1 or -1");
    PropertySpec p;
    p.name = "monotonicity";
    p.domain = domain;
    p.slack.per_feature.assign(domain.width(), Interval{0.0, 0.0});
    for (std::size_t f : features) {
        if (f >= domain.width())
            throw ValidationError("make_monotonicity: feature index " + std::to_string(f) +
                                  " out of range");
        p.slack.per_feature[f] =
            direction > 0 ? Interval{0.0, epsilon} : Interval{-epsilon, 0.0};
    }
    ComparisonSpec c;
    c.kind = ComparisonSpec::Kind::Directional;
    c.direction = direction;
    c.threshold_d = d;
    p.comparison = c;
    validate_property(p);
    return p;
}

InputDomain apply_coverage(const InputDomain &domain, double coverage_pct) {
    if (!(coverage_pct > 0.0 && coverage_pct <= 100.0))
        throw ValidationError("apply_coverage: coverage_pct " + std::to_string(coverage_pct) +
                              " outside (0, 100]");
    const double m = (100.0 - coverage_pct) / 200.0;
    InputDomain out;
    out.per_feature.reserve(domain.width());
    for (const auto &iv : domain.per_feature) {
        const double margin = m * (iv.hi - iv.lo);
        out.per_feature.push_back({iv.lo + margin, iv.hi - margin});
    }
    return out;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double std_normal_icdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ValidationError("std_normal_icdf: p outside (0, 1)");
    // Bisection on the CDF; the interval [-40, 40] covers all doubles in (0,1).
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (std_normal_cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15)
            break;
    }
    return 0.5 * (lo + hi);
}

double sign_flip_probability(double mu, double sigma) {
    if (!(sigma > 0.0))
        throw ValidationError("sign_flip_probability: sigma must be positive");
    const double phi = std_normal_cdf(mu / sigma);
    return phi * phi;
}

double mu_for_confidence(double q, double sigma) {
    if (!(q > 0.0 && q < 1.0))
        throw ValidationError("mu_for_confidence: q outside (0, 1)");
    if (!(sigma > 0.0))
        throw ValidationError("mu_for_confidence: sigma must be positive");
    return sigma * std_normal_icdf(std::sqrt(q));
}

namespace {

json interval_to_json(const Interval &iv) {
    json j = json::array();
    j.push_back(iv.lo);
    if (std::isfinite(iv.hi))
        j.push_back(iv.hi);
    else
        j.push_back(nullptr); // unbounded above
    return j;
}

Interval interval_from_json(const json &j, const std::string &where) {
    if (!j.is_array() || j.size() != 2)
        throw ParseError(where + ": interval must be a [lo, hi] pair");
    Interval iv;
    iv.lo = j[0].get<double>();
    iv.hi = j[1].is_null() ? std::numeric_limits<double>::infinity() : j[1].get<double>();
    return iv;
}

std::vector<Interval> intervals_from_json(const json &j, const std::string &where) {
    std::vector<Interval> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(interval_from_json(j[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

json constraint_to_json(const LinearInputConstraint &c) {
    return {{"coeffs_x", c.coeffs_x},
            {"coeffs_s", c.coeffs_s},
            {"relation", c.relation == LinearInputConstraint::Rel::Le ? "<=" : ">="},
            {"rhs", c.rhs}};
}

LinearInputConstraint constraint_from_json(const json &j, const std::string &where) {
    LinearInputConstraint c;
    c.coeffs_x = j.at("coeffs_x").get<Vec>();
    c.coeffs_s = j.at("coeffs_s").get<Vec>();
    const std::string rel = j.at("relation").get<std::string>();
    if (rel == "<=")
        c.relation = LinearInputConstraint::Rel::Le;
    else if (rel == ">=")
        c.relation = LinearInputConstraint::Rel::Ge;
    else
        throw ParseError(where + ": relation must be '<=' or '>='");
    c.rhs = j.at("rhs").get<double>();
    return c;
}

} // namespace

std::string property_to_json(const PropertySpec &prop) {
    json j;
    j["name"] = prop.name;
    std::string kind = "custom";
    if (prop.anchor)
        kind = "continuous_anchor";
    else if (prop.comparison->kind == ComparisonSpec::Kind::AbsDiff)
        kind = "robustness";
    else
        kind = "monotonicity";
    j["kind"] = kind;
    json dom = json::array();
    for (const auto &iv : prop.domain.per_feature)
        dom.push_back(interval_to_json(iv));
    j["domain"] = std::move(dom);
    json slack = json::array();
    for (const auto &iv : prop.slack.per_feature)
        slack.push_back(interval_to_json(iv));
    j["slack"] = std::move(slack);
    if (!prop.extra_constraints.empty()) {
        json cs = json::array();
        for (const auto &c : prop.extra_constraints)
            cs.push_back(constraint_to_json(c));
        j["extra_constraints"] = std::move(cs);
    }
    if (!prop.disjunctive_variants.empty()) {
        json cs = json::array();
        for (const auto &c : prop.disjunctive_variants)
            cs.push_back(constraint_to_json(c));
        j["disjunctive_variants"] = std::move(cs);
    }
    if (prop.comparison) {
        const auto &c = *prop.comparison;
        j["comparison"] = {
            {"kind", c.kind == ComparisonSpec::Kind::AbsDiff ? "abs_diff" : "directional"},
            {"direction", c.direction},
            {"threshold_d", c.threshold_d},
            {"violation_rule", c.rule == ViolationRule::AtLeast ? "at-least" : "strict"},
            {"metric", c.metric == ActionMetric::Levels ? "levels" : "values"}};
    }
    if (prop.anchor) {
        const auto &a = *prop.anchor;
        j["anchor"] = {{"mean_bound", interval_to_json(a.mean_bound)},
                       {"separation_d", a.separation_d},
                       {"both_directions", a.both_directions}};
    }
    j["coverage_pct"] = prop.coverage_pct;
    j["clamp_perturbed"] = prop.clamp_perturbed;
    return j.dump(2);
}

PropertySpec parse_property(const std::string &text, const std::string &origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw ParseError(origin + ": " + e.what());
    }

    PropertySpec p;
    try {
        p.name = j.at("name").get<std::string>();
        p.domain.per_feature = intervals_from_json(j.at("domain"), origin + ": domain");
        p.slack.per_feature = intervals_from_json(j.at("slack"), origin + ": slack");
        if (j.contains("extra_constraints"))
            for (std::size_t i = 0; i < j["extra_constraints"].size(); ++i)
                p.extra_constraints.push_back(constraint_from_json(
                    j["extra_constraints"][i], origin + ": extra_constraints"));
        if (j.contains("disjunctive_variants"))
            for (std::size_t i = 0; i < j["disjunctive_variants"].size(); ++i)
                p.disjunctive_variants.push_back(constraint_from_json(
                    j["disjunctive_variants"][i], origin + ": disjunctive_variants"));
        if (j.contains("comparison")) {
            const json &cj = j["comparison"];
            ComparisonSpec c;
            const std::string kind = cj.at("kind").get<std::string>();
            if (kind == "abs_diff")
                c.kind = ComparisonSpec::Kind::AbsDiff;
            else if (kind == "directional")
                c.kind = ComparisonSpec::Kind::Directional;
            else
                throw ParseError(origin + ": unknown comparison kind '" + kind + "'");
            c.direction = cj.value("direction", +1);
            c.threshold_d = cj.at("threshold_d").get<double>();
            const std::string rule = cj.value("violation_rule", "at-least");
            if (rule == "at-least")
                c.rule = ViolationRule::AtLeast;
            else if (rule == "strict")
                c.rule = ViolationRule::StrictlyGreater;
            else
                throw ParseError(origin + ": unknown violation_rule '" + rule + "'");
            const std::string metric = cj.value("metric", "levels");
            if (metric == "levels")
                c.metric = ActionMetric::Levels;
            else if (metric == "values")
                c.metric = ActionMetric::Values;
            else
                throw ParseError(origin + ": unknown metric '" + metric + "'");
            p.comparison = c;
        }
        if (j.contains("anchor")) {
            const json &aj = j["anchor"];
            ContinuousAnchor a;
            a.mean_bound = interval_from_json(aj.at("mean_bound"), origin + ": anchor.mean_bound");
            a.separation_d = aj.at("separation_d").get<double>();
            a.both_directions = aj.value("both_directions", false);
            p.anchor = a;
        }
        p.coverage_pct = j.value("coverage_pct", 100.0);
        p.clamp_perturbed = j.value("clamp_perturbed", false);
    } catch (const json::exception &e) {
        throw ParseError(origin + ": " + e.what());
    }

    validate_property(p);
    return p;
}

PropertySpec load_property(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open property file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_property(ss.str(), path);
}

void save_property(const PropertySpec &prop, const std::string &path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw ParseError("cannot write property file '" + path + "'");
        out << property_to_json(prop) << "\n";
    }
    std::rename(tmp.c_str(), path.c_str());
}

} // namespace diffrl
