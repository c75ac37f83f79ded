#pragma once

#include "diffrl/encoder.hpp"
#include "diffrl/network.hpp"
#include "diffrl/property.hpp"

#include <vector>

namespace diffrl {

/// Sound per-neuron value intervals at one network stage. Stage 0 is
/// the input box; stage i+1 is the output of layer i.
struct BoxBounds {
    std::vector<Interval> per_neuron;
    std::size_t layer_index = 0;
};

/// Affine function over the network inputs.
struct AffineForm {
    Vec coeffs;
    double offset = 0.0;

    double eval(std::span<const double> x) const {
        double v = offset;
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            v += coeffs[i] * x[i];
        return v;
    }
};

/// Sound affine envelopes: lower(x) <= neuron value <= upper(x) for
/// every x in the box the bounds were computed for.
struct LinearBound {
    AffineForm lower;
    AffineForm upper;
};

enum class ReluStatus { AlwaysActive, AlwaysInactive, Unstable };

/// Dense evaluation context: split/embed/concat layers materialized as
/// sparse affine maps so bound propagation only sees affine and ReLU
/// stages. Build once per network, reuse across subdomains.
class BoundsContext {
  public:
    explicit BoundsContext(const Network &net);

    const Network &net() const { return *net_; }
    std::size_t input_width() const { return net_->input_width; }
    std::size_t output_width() const { return out_width_; }

    /// Interval propagation through every stage. Degenerate boxes
    /// (all lo == hi) short-circuit to an exact forward evaluation.
    std::vector<BoxBounds> interval_bounds(const std::vector<Interval> &box) const;

    /// Sound lower bound of c . outputs + c0 over the box, given the
    /// per-stage interval bounds. Uses backward propagation with the
    /// triangle ReLU relaxation, intersected with the plain interval
    /// bound so the result is never looser than interval arithmetic.
    double lower_bound(const std::vector<Interval> &box, const std::vector<BoxBounds> &stages,
                       std::span<const double> c, double c0) const;

    /// Backward affine envelopes for one objective; lower of c.y + c0.
    AffineForm lower_form(const std::vector<BoxBounds> &stages, std::span<const double> c,
                          double c0) const;

  private:
    struct Stage {
        bool relu = false;
        Matrix w; // affine stages only
        Vec b;
        std::size_t width = 0; // output width of this stage
    };

    const Network *net_;
    std::vector<Stage> stages_;
    std::size_t out_width_ = 0;
};

std::vector<BoxBounds> interval_bounds(const Network &net, const InputDomain &box);

/// Affine lower/upper envelopes per output neuron, sound over the box.
std::vector<LinearBound> backward_linear_bounds(const Network &net, const InputDomain &box);

/// Concretized scalar output bounds: backward envelopes evaluated over
/// the box, intersected with interval propagation.
std::vector<Interval> concrete_output_bounds(const Network &net, const InputDomain &box);

/// Per-layer ReLU stability mask; entries are empty for non-ReLU layers.
std::vector<std::vector<ReluStatus>> stable_relu_mask(const Network &net, const InputDomain &box);

/// Iterated interval constraint propagation of conjunctive linear
/// output constraints over scalar output bounds. Never widens a bound;
/// `infeasible` is set when some interval empties, certifying that no
/// point in the box satisfies all constraints.
struct TightenResult {
    std::vector<Interval> outputs;
    bool infeasible = false;
};
TightenResult tighten_with_output_constraints(const std::vector<Interval> &output_bounds,
                                              std::span<const LinearOutputConstraint> constraints);

/// Convenience overload matching the bound-set + query shape.
TightenResult tighten_with_output_constraints(const std::vector<LinearBound> &bounds,
                                              const InputDomain &box, const Query &query);

} // namespace diffrl
