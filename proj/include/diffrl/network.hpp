#pragma once

#include "diffrl/numeric.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace diffrl {

/// Fully connected map y = W x + b with W of shape out x in.
struct AffineLayer {
    Matrix weights;
    Vec bias;

    std::size_t in_width() const { return weights.cols; }
    std::size_t out_width() const { return weights.rows; }
};

struct ReluLayer {};

/// One embedded slice of a split/embed/concat layer. Consumes
/// `length` inputs starting at `offset` and emits `map.out_width()` values.
struct SegmentEmbed {
    std::size_t offset = 0;
    std::size_t length = 0;
    AffineLayer map;
};

/// Applies a separate affine embedding to each input segment and
/// concatenates the results in segment order. Segments must tile the
/// incoming vector exactly, in order, with no gaps or overlaps.
struct SplitEmbedConcat {
    std::vector<SegmentEmbed> segments;

    std::size_t in_width() const;
    std::size_t out_width() const;
};

using Layer = std::variant<AffineLayer, ReluLayer, SplitEmbedConcat>;

/// Maps raw output logits to the deployed action.
struct ActionDecoder {
    enum class Mode { Discrete, ContinuousMean };

    Mode mode = Mode::Discrete;
    /// Discrete: one action magnitude per output neuron, strictly increasing.
    Vec action_values;
    /// ContinuousMean: which output neuron carries the distribution mean.
    std::size_t mean_index = 0;
    double sigma = 1.0;

    static ActionDecoder discrete(Vec values) {
        ActionDecoder d;
        d.mode = Mode::Discrete;
        d.action_values = std::move(values);
        return d;
    }
    static ActionDecoder continuous_mean(std::size_t index, double sigma) {
        ActionDecoder d;
        d.mode = Mode::ContinuousMean;
        d.mean_index = index;
        d.sigma = sigma;
        return d;
    }
};

/// A feedforward piecewise-linear policy network. Immutable after
/// construction/load; forward evaluation is pure and thread-safe.
struct Network {
    std::string name;
    std::size_t input_width = 0;
    std::vector<Layer> layers;
    ActionDecoder decoder;

    std::size_t output_width() const;
};

std::size_t layer_in_width(const Layer &l);
std::size_t layer_out_width(const Layer &l, std::size_t in_width);
const char *layer_kind_name(const Layer &l);

/// Checks all structural invariants; throws ValidationError naming the
/// offending layer/field.
void validate_network(const Network &net);

std::size_t parameter_count(const Network &net);

/// Exact forward evaluation (64-bit floats), returns raw output logits.
Vec forward(const Network &net, std::span<const double> x);

/// Index of the largest logit; ties break toward the lowest index.
std::size_t argmax_lowest_tie(std::span<const double> logits);

/// Deployed action for the given logits: Discrete picks
/// action_values[argmax], ContinuousMean returns logits[mean_index].
double decode_action(const Network &net, std::span<const double> logits);

Network load_network(const std::string &path);
Network parse_network(const std::string &json_text, const std::string &origin = "<string>");
void save_network(const Network &net, const std::string &path);
std::string network_to_json(const Network &net);

} // namespace diffrl
