#include "diffrl/zoo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace diffrl {

namespace {

// Pensieve input layout: [0] last bitrate, [1..8] throughput history,
// [9..16] download-time history, [17] buffer level, [18] remaining
// segments, [19..24] bitrate availability flags (pinned to 1).
constexpr std::size_t kPensieveInputs = 25;
constexpr std::size_t kPensieveSegments[6] = {1, 8, 8, 1, 1, 6};
constexpr std::size_t kPensieveThroughputFirst = 1;
constexpr std::size_t kPensieveBufferIndex = 17;
constexpr std::size_t kPensieveAvailFirst = 19;
const Vec kPensieveBitrates = {300.0, 750.0, 1200.0, 1850.0, 2850.0, 4300.0};

// CMARS input layout: [0] SLA violation ratio, [1] average SNR,
// [2] available resources, [3..18] aggregated cross-slice demand.
constexpr std::size_t kCmarsInputs = 19;
constexpr std::size_t kCmarsSnrIndex = 1;
constexpr std::size_t kCmarsDemandFirst = 3;

constexpr double kPresetEpsilon = 0.01;
constexpr double kAuroraSigma = 0.5;

AffineLayer random_affine(std::size_t out, std::size_t in, SeededUniform &rng) {
    AffineLayer a;
    a.weights = Matrix(out, in);
    a.bias.resize(out);
    const double bound = 1.0 / std::sqrt(double(in));
    for (std::size_t r = 0; r < out; ++r)
        for (std::size_t c = 0; c < in; ++c)
            a.weights.at(r, c) = rng.range(-bound, bound);
    for (std::size_t r = 0; r < out; ++r)
        a.bias[r] = rng.range(-bound, bound);
    return a;
}

Network build_pensieve(int hidden, std::uint64_t seed) {
    if (hidden < 1)
        throw ValidationError("zoo: Pensieve hidden width must be positive");
    SeededUniform rng(seed);
    const std::size_t H = static_cast<std::size_t>(hidden);

    Network net;
    net.name = "pensieve-h" + std::to_string(hidden) + "-s" + std::to_string(seed);
    net.input_width = kPensieveInputs;

    SplitEmbedConcat sec;
    std::size_t offset = 0;
    for (std::size_t len : kPensieveSegments) {
        SegmentEmbed seg;
        seg.offset = offset;
        seg.length = len;
        seg.map = random_affine(H, len, rng);
        sec.segments.push_back(std::move(seg));
        offset += len;
    }
    net.layers.emplace_back(std::move(sec));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(random_affine(H, 6 * H, rng));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(random_affine(6, H, rng));
    net.decoder = ActionDecoder::discrete(kPensieveBitrates);
    validate_network(net);
    return net;
}

Network build_cmars(int depth, int actions, std::uint64_t seed) {
    if (depth != 2 && depth != 3)
        throw ValidationError("zoo: CMARS depth must be 2 or 3");
    if (actions != 15 && actions != 30)
        throw ValidationError("zoo: CMARS action count must be 15 or 30");
    SeededUniform rng(seed);

    Network net;
    net.name = "cmars-d" + std::to_string(depth) + "-m" + std::to_string(actions) + "-s" +
               std::to_string(seed);
    net.input_width = kCmarsInputs;
    std::size_t width = kCmarsInputs;
    for (int i = 0; i < depth; ++i) {
        net.layers.emplace_back(random_affine(32, width, rng));
        net.layers.emplace_back(ReluLayer{});
        width = 32;
    }
    net.layers.emplace_back(random_affine(static_cast<std::size_t>(actions), width, rng));
    Vec values(actions);
    for (int i = 0; i < actions; ++i)
        values[i] = double(i);
    net.decoder = ActionDecoder::discrete(std::move(values));
    validate_network(net);
    return net;
}

Network build_aurora(int history, int hidden, std::uint64_t seed) {
    if (history < 1)
        throw ValidationError("zoo: Aurora history length must be positive");
    if (hidden < 1)
        throw ValidationError("zoo: Aurora hidden width must be positive");
    SeededUniform rng(seed);
    const std::size_t H = static_cast<std::size_t>(hidden);
    const std::size_t n = 3 * static_cast<std::size_t>(history);

    Network net;
    net.name = "aurora-k" + std::to_string(history) + "-h" + std::to_string(hidden) + "-s" +
               std::to_string(seed);
    net.input_width = n;
    net.layers.emplace_back(random_affine(H, n, rng));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(random_affine(H, H, rng));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(random_affine(1, H, rng));
    net.decoder = ActionDecoder::continuous_mean(0, kAuroraSigma);
    validate_network(net);
    return net;
}

InputDomain unit_domain(std::size_t width) {
    InputDomain d;
    d.per_feature.assign(width, Interval{0.0, 1.0});
    return d;
}

std::vector<PropertySpec> pensieve_presets(const Network &net) {
    if (net.input_width != kPensieveInputs || net.output_width() != 6)
        throw ValidationError("zoo presets: network is not Pensieve-shaped (25 in, 6 out)");
    const double d = 3.0; // bitrate levels

    InputDomain domain = unit_domain(kPensieveInputs);
    for (std::size_t i = kPensieveAvailFirst; i < kPensieveInputs; ++i)
        domain.per_feature[i] = {1.0, 1.0}; // all bitrates available

    std::vector<std::size_t> throughput;
    for (std::size_t i = 0; i < 8; ++i)
        throughput.push_back(kPensieveThroughputFirst + i);

    auto caputil = make_monotonicity(domain, throughput, +1, kPresetEpsilon, d);
    caputil.name = "pensieve-capacity-utilization";

    auto rebuf = make_monotonicity(domain, {kPensieveBufferIndex}, +1, kPresetEpsilon, d);
    rebuf.name = "pensieve-rebuffering-avoidance";

    auto robust = make_robustness(domain, kPresetEpsilon, d);
    robust.name = "pensieve-robustness";
    for (std::size_t i = kPensieveAvailFirst; i < kPensieveInputs; ++i)
        robust.slack.per_feature[i] = {0.0, 0.0}; // availability never perturbed

    return {std::move(caputil), std::move(rebuf), std::move(robust)};
}

std::vector<PropertySpec> cmars_presets(const Network &net) {
    if (net.input_width != kCmarsInputs)
        throw ValidationError("zoo presets: network is not CMARS-shaped (19 inputs)");
    const std::size_t m = net.output_width();
    double d;
    if (m == 15)
        d = 8.0;
    else if (m == 30)
        d = 16.0;
    else
        throw ValidationError("zoo presets: CMARS action count must be 15 or 30, got " +
                              std::to_string(m));

    InputDomain domain = unit_domain(kCmarsInputs);
    std::vector<std::size_t> demand;
    for (std::size_t i = kCmarsDemandFirst; i < kCmarsInputs; ++i)
        demand.push_back(i);

    // Rising cross-slice demand must not raise this slice's allocation:
    // positive slack on the demand features, violation on a rise.
    auto contention = make_monotonicity(domain, demand, +1, kPresetEpsilon, d);
    contention.name = "cmars-contention-aware-allocation";
    contention.comparison->direction = -1;
    contention.comparison->metric = ActionMetric::Values;

    // Degrading channel quality must not shrink the allocation:
    // negative slack on the SNR feature, violation on a drop.
    auto channel = make_monotonicity(domain, {kCmarsSnrIndex}, -1, kPresetEpsilon, d);
    channel.name = "cmars-channel-compensation";
    channel.comparison->direction = +1;
    channel.comparison->metric = ActionMetric::Values;

    auto robust = make_robustness(domain, kPresetEpsilon, d);
    robust.name = "cmars-robustness";
    robust.comparison->metric = ActionMetric::Values;

    return {std::move(contention), std::move(channel), std::move(robust)};
}

std::vector<PropertySpec> aurora_presets(const Network &net) {
    if (net.input_width % 3 != 0)
        throw ValidationError("zoo presets: network is not Aurora-shaped (3k inputs)");
    if (net.decoder.mode != ActionDecoder::Mode::ContinuousMean)
        throw ValidationError("zoo presets: Aurora network must use a continuous-mean decoder");
    const std::size_t k = net.input_width / 3;
    const double sigma = net.decoder.sigma;
    const double mu = sigma / 2.0;

    InputDomain domain = unit_domain(net.input_width);
    ContinuousAnchor anchor;
    anchor.mean_bound = {mu, std::numeric_limits<double>::infinity()};
    anchor.separation_d = 2.0 * mu;

    auto with_slack = [&](const std::string &name, std::size_t first, double lo, double hi,
                          bool everywhere, bool both) {
        PropertySpec p;
        p.name = name;
        p.domain = domain;
        p.slack.per_feature.assign(net.input_width, Interval{0.0, 0.0});
        if (everywhere)
            p.slack.per_feature.assign(net.input_width, Interval{lo, hi});
        else
            for (std::size_t i = 0; i < k; ++i)
                p.slack.per_feature[first + i] = {lo, hi};
        ContinuousAnchor a = anchor;
        a.both_directions = both;
        p.anchor = a;
        validate_property(p);
        return p;
    };

    // Input layout: [0..k) latency ratio, [k..2k) ack ratio, [2k..3k)
    // latency gradient.
    auto ack = with_slack("aurora-ack-driven-capacity-utilization", k, 0.0, kPresetEpsilon,
                          false, false);
    auto lat = with_slack("aurora-latency-aware-capacity-utilization", 0, -kPresetEpsilon, 0.0,
                          false, false);
    auto robust = with_slack("aurora-robustness", 0, -kPresetEpsilon, kPresetEpsilon, true, true);

    return {std::move(ack), std::move(lat), std::move(robust)};
}

} // namespace

ZooSpec ZooSpec::pensieve(int hidden, std::uint64_t seed) {
    ZooSpec s;
    s.family = Family::Pensieve;
    s.hidden = hidden;
    s.seed = seed;
    return s;
}

ZooSpec ZooSpec::cmars(int depth, int actions, std::uint64_t seed) {
    ZooSpec s;
    s.family = Family::Cmars;
    s.cmars_depth = depth;
    s.cmars_actions = actions;
    s.seed = seed;
    return s;
}

ZooSpec ZooSpec::aurora(int history, int hidden, std::uint64_t seed) {
    ZooSpec s;
    s.family = Family::Aurora;
    s.aurora_history = history;
    s.hidden = hidden;
    s.seed = seed;
    return s;
}

Network zoo_build(const ZooSpec &spec) {
    switch (spec.family) {
    case ZooSpec::Family::Pensieve:
        return build_pensieve(spec.hidden, spec.seed);
    case ZooSpec::Family::Cmars:
        return build_cmars(spec.cmars_depth, spec.cmars_actions, spec.seed);
    case ZooSpec::Family::Aurora:
        return build_aurora(spec.aurora_history, spec.hidden, spec.seed);
    }
    throw ValidationError("zoo: unknown family");
}

std::vector<PropertySpec> zoo_preset_properties(ZooSpec::Family family, const Network &net) {
    switch (family) {
    case ZooSpec::Family::Pensieve:
        return pensieve_presets(net);
    case ZooSpec::Family::Cmars:
        return cmars_presets(net);
    case ZooSpec::Family::Aurora:
        return aurora_presets(net);
    }
    throw ValidationError("zoo: unknown family");
}

std::vector<PropertySpec> zoo_preset_properties(const ZooSpec &spec) {
    const Network net = zoo_build(spec);
    return zoo_preset_properties(spec.family, net);
}

ZooSpec::Family zoo_family_from_name(const std::string &name) {
    std::string lower;
    for (char c : name)
        lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "pensieve")
        return ZooSpec::Family::Pensieve;
    if (lower == "cmars")
        return ZooSpec::Family::Cmars;
    if (lower == "aurora")
        return ZooSpec::Family::Aurora;
    throw ValidationError("zoo: unknown family '" + name + "' (expected pensieve|cmars|aurora)");
}

} // namespace diffrl
