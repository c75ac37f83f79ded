#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffrl/bounds.hpp"
#include "oracles.hpp"
#include "testnets.hpp"

using namespace diffrl;

namespace {

InputDomain box(std::vector<Interval> ivs) {
    InputDomain d;
    d.per_feature = std::move(ivs);
    return d;
}

Network relu_only_net() {
    // Affine identity -> Relu -> Affine identity, so the relu interval
    // rule is visible at the output.
    Network net;
    net.name = "relu-probe";
    net.input_width = 1;
    net.layers.emplace_back(testnets::affine({{1.0}}, {0.0}));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(testnets::affine({{1.0}}, {0.0}));
    net.decoder = ActionDecoder::discrete({0.0});
    validate_network(net);
    return net;
}

} // namespace

TEST_CASE("relu maps [-1, 2] to [0, 2]") {
    const auto stages = interval_bounds(relu_only_net(), box({{-1.0, 2.0}}));
    // stage 2 is the relu output
    CHECK(stages[2].per_neuron[0].lo == 0.0);
    CHECK(stages[2].per_neuron[0].hi == 2.0);
}

TEST_CASE("affine interval arithmetic: w=[1,-1] over [0,1]^2 gives [-1,1]") {
    Network net;
    net.name = "affine-ia";
    net.input_width = 2;
    net.layers.emplace_back(testnets::affine({{1.0, -1.0}}, {0.0}));
    net.decoder = ActionDecoder::discrete({0.0});
    validate_network(net);
    const auto stages = interval_bounds(net, box({{0, 1}, {0, 1}}));
    CHECK(stages.back().per_neuron[0].lo == -1.0);
    CHECK(stages.back().per_neuron[0].hi == 1.0);
}

TEST_CASE("interval bounds are sound on random samples") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Network net = testnets::random_relu_net(3, {8, 6}, 4, seed);
        const InputDomain dom = box({{-1, 1}, {0, 2}, {-0.5, 0.5}});
        const auto stages = interval_bounds(net, dom);
        const auto &out = stages.back().per_neuron;
        SeededUniform rng(seed * 7 + 1);
        for (int trial = 0; trial < 10000; ++trial) {
            Vec x(3);
            for (std::size_t i = 0; i < 3; ++i)
                x[i] = rng.range(dom.per_feature[i].lo, dom.per_feature[i].hi);
            const Vec y = forward(net, x);
            for (std::size_t j = 0; j < y.size(); ++j) {
                CHECK(y[j] >= out[j].lo - 1e-9);
                CHECK(y[j] <= out[j].hi + 1e-9);
            }
        }
    }
}

TEST_CASE("purely affine networks get exact linear bounds") {
    Network net;
    net.name = "affine-exact";
    net.input_width = 2;
    net.layers.emplace_back(testnets::affine({{2.0, -1.0}, {0.5, 0.5}}, {1.0, -1.0}));
    net.decoder = ActionDecoder::discrete({0.0, 1.0});
    validate_network(net);

    const InputDomain dom = box({{-1, 1}, {-2, 2}});
    const auto lbs = backward_linear_bounds(net, dom);
    REQUIRE(lbs.size() == 2);
    // lower and upper envelopes coincide with the affine map itself
    CHECK(lbs[0].lower.coeffs[0] == doctest::Approx(2.0));
    CHECK(lbs[0].lower.coeffs[1] == doctest::Approx(-1.0));
    CHECK(lbs[0].lower.offset == doctest::Approx(1.0));
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 2; ++i)
            CHECK(lbs[j].lower.coeffs[i] == doctest::Approx(lbs[j].upper.coeffs[i]));

    // concretized bounds equal the closed-form extrema
    const auto conc = concrete_output_bounds(net, dom);
    const auto [lo0, hi0] =
        oracles::affine_extrema_over_box({2.0, -1.0}, 1.0, dom.per_feature);
    CHECK(conc[0].lo == doctest::Approx(lo0).epsilon(1e-12));
    CHECK(conc[0].hi == doctest::Approx(hi0).epsilon(1e-12));
}

TEST_CASE("triangle relaxation of a single unstable relu") {
    // One relu with pre-activation [-1, 1]: upper envelope is the chord
    // with slope 1/2 and offset 1/2; the lower envelope is one of
    // {0, identity} (tie at u == -l resolves to identity).
    const Network net = relu_only_net();
    const InputDomain dom = box({{-1.0, 1.0}});
    const auto lbs = backward_linear_bounds(net, dom);
    REQUIRE(lbs.size() == 1);
    CHECK(lbs[0].upper.coeffs[0] == doctest::Approx(0.5));
    CHECK(lbs[0].upper.offset == doctest::Approx(0.5));
    const bool lower_is_identity =
        lbs[0].lower.coeffs[0] == doctest::Approx(1.0) && lbs[0].lower.offset == doctest::Approx(0.0);
    const bool lower_is_zero =
        lbs[0].lower.coeffs[0] == doctest::Approx(0.0) && lbs[0].lower.offset == doctest::Approx(0.0);
    CHECK((lower_is_identity || lower_is_zero));

    // envelope soundness pointwise on a grid
    for (double x = -1.0; x <= 1.0; x += 1.0 / 64) {
        const double relu = std::max(0.0, x);
        CHECK(lbs[0].lower.eval(Vec{x}) <= relu + 1e-12);
        CHECK(lbs[0].upper.eval(Vec{x}) >= relu - 1e-12);
    }
}

TEST_CASE("backward envelopes are sound and never looser than intervals") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const Network net = testnets::random_relu_net(2, {7, 7}, 3, seed);
        const InputDomain dom = box({{-1, 1}, {-1, 1}});
        const auto stages = interval_bounds(net, dom);
        const auto &iout = stages.back().per_neuron;
        const auto lbs = backward_linear_bounds(net, dom);
        const auto conc = concrete_output_bounds(net, dom);

        for (std::size_t j = 0; j < 3; ++j) {
            // concretized bounds are at least as tight as intervals
            CHECK(conc[j].lo >= iout[j].lo - 1e-12);
            CHECK(conc[j].hi <= iout[j].hi + 1e-12);
        }

        SeededUniform rng(seed);
        for (int trial = 0; trial < 1000; ++trial) {
            const Vec x{rng.range(-1, 1), rng.range(-1, 1)};
            const Vec y = forward(net, x);
            for (std::size_t j = 0; j < 3; ++j) {
                CHECK(lbs[j].lower.eval(x) <= y[j] + 1e-9);
                CHECK(lbs[j].upper.eval(x) >= y[j] - 1e-9);
                CHECK(y[j] >= conc[j].lo - 1e-9);
                CHECK(y[j] <= conc[j].hi + 1e-9);
            }
        }
    }
}

TEST_CASE("stable relu mask") {
    Network net;
    net.name = "mask";
    net.input_width = 1;
    // three neurons: pre-activations x+5 (active), x-5 (inactive), x (unstable)
    net.layers.emplace_back(testnets::affine({{1.0}, {1.0}, {1.0}}, {5.0, -5.0, 0.0}));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(testnets::affine({{1.0, 1.0, 1.0}}, {0.0}));
    net.decoder = ActionDecoder::discrete({0.0});
    validate_network(net);

    const auto mask = stable_relu_mask(net, box({{-1.0, 1.0}}));
    REQUIRE(mask[1].size() == 3);
    CHECK(mask[1][0] == ReluStatus::AlwaysActive);
    CHECK(mask[1][1] == ReluStatus::AlwaysInactive);
    CHECK(mask[1][2] == ReluStatus::Unstable);
}

TEST_CASE("degenerate boxes short-circuit to exact forward evaluation") {
    const Network net = testnets::random_relu_net(2, {5}, 3, 77);
    const Vec x{0.3, -0.4};
    const auto stages = interval_bounds(net, box({{0.3, 0.3}, {-0.4, -0.4}}));
    const Vec y = forward(net, x);
    for (std::size_t j = 0; j < y.size(); ++j) {
        CHECK(stages.back().per_neuron[j].lo == y[j]);
        CHECK(stages.back().per_neuron[j].hi == y[j]);
    }
}

TEST_CASE("tighten with empty constraints leaves bounds unchanged") {
    const std::vector<Interval> bounds = {{-1, 1}, {0, 2}};
    const auto res = tighten_with_output_constraints(bounds, {});
    CHECK_FALSE(res.infeasible);
    CHECK(res.outputs[0].lo == -1.0);
    CHECK(res.outputs[1].hi == 2.0);
}

TEST_CASE("tighten detects infeasibility by contradiction") {
    // y0 in [0, 1] with constraints y0 <= -2 cannot hold
    std::vector<LinearOutputConstraint> constraints(1);
    constraints[0].coeffs = {1.0, 0.0};
    constraints[0].rhs = -2.0;
    const auto res = tighten_with_output_constraints({{0, 1}, {0, 1}}, constraints);
    CHECK(res.infeasible);
}

TEST_CASE("tighten narrows bounds through coupled constraints") {
    // y0 - y1 <= 0 and y1 <= 0.5 over [0,2]^2: y0 <= y1 <= 0.5
    std::vector<LinearOutputConstraint> constraints(2);
    constraints[0].coeffs = {1.0, -1.0};
    constraints[0].rhs = 0.0;
    constraints[1].coeffs = {0.0, 1.0};
    constraints[1].rhs = 0.5;
    const auto res = tighten_with_output_constraints({{0, 2}, {0, 2}}, constraints);
    CHECK_FALSE(res.infeasible);
    CHECK(res.outputs[1].hi == doctest::Approx(0.5));
    CHECK(res.outputs[0].hi == doctest::Approx(0.5));
    // never widens
    CHECK(res.outputs[0].lo >= 0.0);
}

TEST_CASE("tightening never contradicts a concretely feasible point") {
    // Random small nets and random conjunctions that are satisfied by at
    // least one sampled point: tighten must not report infeasible.
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const Network net = testnets::random_relu_net(2, {6}, 3, seed);
        const InputDomain dom = box({{0, 1}, {0, 1}});
        SeededUniform rng(seed);
        const Vec witness{rng.range(0, 1), rng.range(0, 1)};
        const Vec y = forward(net, witness);

        // constraints built to hold at the witness
        std::vector<LinearOutputConstraint> constraints;
        for (int k = 0; k < 3; ++k) {
            LinearOutputConstraint c;
            c.coeffs.assign(3, 0.0);
            for (auto &v : c.coeffs)
                v = rng.range(-1, 1);
            double lhs = 0.0;
            for (std::size_t j = 0; j < 3; ++j)
                lhs += c.coeffs[j] * y[j];
            c.rhs = lhs + rng.range(0.0, 0.5); // slack keeps the witness feasible
            constraints.push_back(std::move(c));
        }
        const auto conc = concrete_output_bounds(net, dom);
        const auto res = tighten_with_output_constraints(conc, constraints);
        CHECK_FALSE(res.infeasible);
        // tightened intervals still contain the witness output
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(y[j] >= res.outputs[j].lo - 1e-9);
            CHECK(y[j] <= res.outputs[j].hi + 1e-9);
        }
    }
}

TEST_CASE("dimension mismatch raises") {
    const Network net = testnets::random_relu_net(2, {4}, 2, 3);
    CHECK_THROWS_AS(interval_bounds(net, box({{0, 1}})), ValidationError);
}
