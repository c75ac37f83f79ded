#pragma once

#include "diffrl/network.hpp"
#include "diffrl/property.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace diffrl {

/// Two weight-shared copies of one policy over a shared input x and a
/// slack vector s; copy 1 reads x, copy 2 reads x + s.
struct CoupledSystem {
    std::shared_ptr<const Network> net;

    std::size_t input_width() const { return net->input_width; }
    std::size_t output_width() const { return net->output_width(); }
};

/// Output-index pair (copy 1, copy 2) whose joint selection violates
/// the property's comparison rule.
struct InvalidPair {
    std::size_t i1 = 0;
    std::size_t i2 = 0;

    bool operator==(const InvalidPair &) const = default;
};

/// coeffs . [L1; L2] <= rhs over the flattened outputs.
struct LinearOutputConstraint {
    Vec coeffs;
    double rhs = 0.0;
};

/// One decomposed feasibility problem. Feasible iff some (x, s) within
/// the boxes satisfies every output constraint and every extra input
/// constraint.
struct Query {
    std::string id;
    CoupledSystem system;
    std::optional<InvalidPair> pair;                     // discrete mode
    std::vector<LinearOutputConstraint> output_constraints;
    InputDomain x_bounds;                                // after coverage
    SlackSpec s_bounds;
    std::vector<LinearInputConstraint> extra;
    ActionMetric metric = ActionMetric::Levels;
};

/// Pairs (i, j) whose action values violate the comparison under its
/// violation rule. Enumeration order: i ascending, then j ascending.
std::vector<InvalidPair> enumerate_invalid_pairs(const ActionDecoder &decoder,
                                                 const ComparisonSpec &comparison);

std::vector<Query> generate_queries(const Network &net, const PropertySpec &prop);
std::vector<Query> generate_queries(std::shared_ptr<const Network> net, const PropertySpec &prop);

/// Materializes the two copies as one network over inputs (x, s) with
/// doubled outputs [L1; L2]. Forward of the result on (x, s) equals the
/// concatenation of forward(net, x) and forward(net, x+s) exactly.
Network flatten_coupled(const CoupledSystem &system);

/// True when (x, s) satisfies every box bound, extra input constraint,
/// and output constraint of the query, each within tol. Output
/// constraints are evaluated on concrete forward passes of both copies,
/// so for discrete queries this is exactly "the target indices attain
/// the max within tol".
struct PointCheck {
    bool satisfied = false;
    std::string first_failure;              // empty when satisfied
    Vec logits1, logits2;
    std::size_t achieved1 = 0, achieved2 = 0; // argmax per copy
};
PointCheck check_point(const Query &query, std::span<const double> x, std::span<const double> s,
                       double tol);

} // namespace diffrl
