#pragma once

#include "diffrl/numeric.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace diffrl {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
    bool degenerate() const { return lo == hi; }
};

/// Per-feature operational range of the base input x.
struct InputDomain {
    std::vector<Interval> per_feature;

    std::size_t width() const { return per_feature.size(); }
};

/// Per-feature bounds on the slack vector s; [0,0] pins a feature.
struct SlackSpec {
    std::vector<Interval> per_feature;

    std::size_t width() const { return per_feature.size(); }
    bool all_zero() const;
};

/// coeffs_x . x + coeffs_s . s  (<= | >=)  rhs
struct LinearInputConstraint {
    Vec coeffs_x;
    Vec coeffs_s;
    enum class Rel { Le, Ge } relation = Rel::Le;
    double rhs = 0.0;
};

enum class ViolationRule { AtLeast, StrictlyGreater };

/// Whether action distance is measured in index levels or in the
/// physical action values.
enum class ActionMetric { Levels, Values };

/// Comparison rule for discrete-action properties. A pair of deployed
/// actions (base a1, perturbed a2) is a violation when:
///   AbsDiff:            |a2 - a1| >= d   (or > d under StrictlyGreater)
///   Directional(+1):     a1 - a2  >= d   (perturbed action dropped)
///   Directional(-1):     a2 - a1  >= d   (perturbed action rose)
struct ComparisonSpec {
    enum class Kind { AbsDiff, Directional };

    Kind kind = Kind::AbsDiff;
    int direction = +1; // used by Directional only
    double threshold_d = 0.0;
    ViolationRule rule = ViolationRule::AtLeast;
    ActionMetric metric = ActionMetric::Levels;
};

/// Continuous-action invalid region: the base copy's mean is anchored
/// inside mean_bound and the perturbed copy's mean sits at least
/// separation_d below the anchor's lower edge. With both_directions,
/// the mirrored case (base low, perturbed high) is checked as well.
struct ContinuousAnchor {
    Interval mean_bound{0.0, std::numeric_limits<double>::infinity()};
    double separation_d = 0.0;
    bool both_directions = false;
};

struct PropertySpec {
    std::string name;
    InputDomain domain;
    SlackSpec slack;
    std::vector<LinearInputConstraint> extra_constraints;
    /// Disjunctive input refinement: if non-empty, each alternative
    /// spawns one query variant carrying that single extra constraint.
    std::vector<LinearInputConstraint> disjunctive_variants;
    std::optional<ComparisonSpec> comparison; // discrete decoders
    std::optional<ContinuousAnchor> anchor;   // continuous decoders
    double coverage_pct = 100.0;
    bool clamp_perturbed = false;
};

void validate_property(const PropertySpec &prop);

/// All slack intervals [-epsilon, +epsilon]; comparison AbsDiff with
/// threshold d.
PropertySpec make_robustness(const InputDomain &domain, double epsilon, double d);

/// Slack [0, epsilon] (direction +1) or [-epsilon, 0] (direction -1) on
/// the listed features and [0,0] elsewhere; comparison Directional with
/// the same sign and threshold d.
PropertySpec make_monotonicity(const InputDomain &domain, const std::vector<std::size_t> &features,
                               int direction, double epsilon, double d);

/// Centered shrinkage of each feature interval: [a,b] becomes
/// [a + m(b-a), b - m(b-a)] with m = (100 - coverage_pct) / 200.
/// Applies to x bounds only, never to slack bounds.
InputDomain apply_coverage(const InputDomain &domain, double coverage_pct);

double std_normal_cdf(double x);
double std_normal_icdf(double p);

/// Probability that two anchored action samples flip sign:
/// Phi(mu/sigma)^2.
double sign_flip_probability(double mu, double sigma);

/// Anchor offset giving sign-flip probability q: sigma * Phi^-1(sqrt(q)).
double mu_for_confidence(double q, double sigma);

PropertySpec load_property(const std::string &path);
PropertySpec parse_property(const std::string &json_text, const std::string &origin = "<string>");
void save_property(const PropertySpec &prop, const std::string &path);
std::string property_to_json(const PropertySpec &prop);

} // namespace diffrl
