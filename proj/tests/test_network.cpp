#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffrl/network.hpp"
#include "diffrl/zoo.hpp"
#include "oracles.hpp"
#include "testnets.hpp"

#include <cstdio>
#include <filesystem>

using namespace diffrl;

TEST_CASE("identity network forward and load") {
    const Network net = testnets::identity_1x1();
    CHECK(net.input_width == 1);
    CHECK(forward(net, Vec{3.5})[0] == doctest::Approx(3.5));

    // round-trip through the file format
    const std::string path = "/tmp/diffrl_test_identity.json";
    save_network(net, path);
    const Network back = load_network(path);
    CHECK(back.input_width == 1);
    CHECK(forward(back, Vec{3.5})[0] == 3.5);
    std::remove(path.c_str());
}

TEST_CASE("relu clips negative pre-activations") {
    // Affine(w=-2, b=1) -> Relu -> Affine(w=1, b=0); x=1 gives
    // pre-activation -1, clipped to 0.
    Network net;
    net.input_width = 1;
    net.name = "clip";
    net.layers.emplace_back(testnets::affine({{-2.0}}, {1.0}));
    net.layers.emplace_back(ReluLayer{});
    net.layers.emplace_back(testnets::affine({{1.0}}, {0.0}));
    net.decoder = ActionDecoder::discrete({0.0});
    validate_network(net);
    CHECK(forward(net, Vec{1.0})[0] == 0.0);
    CHECK(forward(net, Vec{0.0})[0] == 1.0);
}

TEST_CASE("random 2-4-3 net matches the straight-line oracle") {
    const Network net = testnets::random_relu_net(2, {4}, 3, 99);
    const Vec x{0.3, -0.7};
    const Vec got = forward(net, x);
    const Vec want = oracles::naive_forward(net, x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("serialization round-trips bit-identical weights") {
    const Network net = testnets::random_relu_net(3, {5, 4}, 2, 1234);
    const std::string path = "/tmp/diffrl_test_roundtrip.json";
    save_network(net, path);
    const Network back = load_network(path);
    const auto &w0 = std::get<AffineLayer>(net.layers[0]);
    const auto &w1 = std::get<AffineLayer>(back.layers[0]);
    REQUIRE(w0.weights.data.size() == w1.weights.data.size());
    for (std::size_t i = 0; i < w0.weights.data.size(); ++i)
        CHECK(w0.weights.data[i] == w1.weights.data[i]); // exact, not approx
    // and a forward pass agrees exactly
    const Vec x{0.1, -0.2, 0.9};
    const Vec a = forward(net, x), b = forward(back, x);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == b[i]);
    std::remove(path.c_str());
}

TEST_CASE("decode_action") {
    Network net;
    net.input_width = 1;
    net.name = "decode";
    net.layers.emplace_back(testnets::affine({{0.0}, {0.0}, {0.0}, {0.0}, {0.0}, {0.0}},
                                             {0, 0, 0, 0, 0, 0}));
    net.decoder = ActionDecoder::discrete({300, 750, 1200, 1850, 2850, 4300});
    validate_network(net);

    SUBCASE("argmax picks the corresponding bitrate") {
        CHECK(decode_action(net, Vec{0, 0, 0, 0, 0, 1}) == 4300);
    }
    SUBCASE("ties break toward the lowest index") {
        Network two;
        two.input_width = 1;
        two.name = "tie";
        two.layers.emplace_back(testnets::affine({{0.0}, {0.0}}, {0, 0}));
        two.decoder = ActionDecoder::discrete({0.0, 1.0});
        validate_network(two);
        CHECK(decode_action(two, Vec{0.5, 0.5}) == 0.0);
    }
    SUBCASE("continuous mean returns the designated logit") {
        Network cm;
        cm.input_width = 1;
        cm.name = "cm";
        cm.layers.emplace_back(testnets::affine({{0.0}}, {0.0}));
        cm.decoder = ActionDecoder::continuous_mean(0, 0.5);
        validate_network(cm);
        CHECK(decode_action(cm, Vec{0.13}) == 0.13);
    }
    SUBCASE("dimension mismatch is an error") {
        CHECK_THROWS_AS(decode_action(net, Vec{1.0}), ValidationError);
        CHECK_THROWS_AS(forward(net, Vec{1.0, 2.0}), ValidationError);
    }
}

TEST_CASE("discrete decode is invariant under constant logit shifts") {
    const Network net = testnets::random_relu_net(2, {6}, 4, 5);
    SeededUniform rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        Vec logits(4);
        for (auto &v : logits)
            v = rng.range(-2, 2);
        const double base = decode_action(net, logits);
        const double shift = rng.range(-10, 10);
        Vec shifted = logits;
        for (auto &v : shifted)
            v += shift;
        CHECK(decode_action(net, shifted) == base);
    }
}

TEST_CASE("validation errors name the offending layer") {
    Network net;
    net.input_width = 2;
    net.name = "broken";
    AffineLayer bad;
    bad.weights = Matrix(3, 2);
    bad.bias = {0.0, 0.0}; // 2 biases for 3 rows
    net.layers.emplace_back(std::move(bad));
    net.decoder = ActionDecoder::discrete({0, 1, 2});
    try {
        validate_network(net);
        FAIL("expected ValidationError");
    } catch (const ValidationError &e) {
        const std::string msg = e.what();
        CHECK(msg.find("layer 0") != std::string::npos);
        CHECK(msg.find("bias") != std::string::npos);
    }
}

TEST_CASE("non-increasing action values are rejected") {
    Network net;
    net.input_width = 1;
    net.name = "badvals";
    net.layers.emplace_back(testnets::affine({{1.0}, {2.0}}, {0, 0}));
    net.decoder = ActionDecoder::discrete({1.0, 1.0});
    CHECK_THROWS_AS(validate_network(net), ValidationError);
}

TEST_CASE("NaN weights are rejected") {
    Network net;
    net.input_width = 1;
    net.name = "nan";
    net.layers.emplace_back(testnets::affine({{std::nan("")}}, {0.0}));
    net.decoder = ActionDecoder::discrete({0.0});
    CHECK_THROWS_AS(validate_network(net), ValidationError);
}

TEST_CASE("malformed file raises ParseError") {
    CHECK_THROWS_AS(parse_network("{not json", "test"), ParseError);
    CHECK_THROWS_AS(parse_network(R"({"name":"x"})", "test"), ParseError);
    CHECK_THROWS_AS(load_network("/nonexistent/net.json"), ParseError);
}

TEST_CASE("pensieve zoo network has the published shape") {
    const Network net = zoo_build(ZooSpec::pensieve(16, 3));
    CHECK(net.input_width == 25);
    CHECK(net.output_width() == 6);
    // forward works on the split/embed/concat path and matches the oracle
    SeededUniform rng(4);
    Vec x(25);
    for (auto &v : x)
        v = rng.range(0, 1);
    const Vec got = forward(net, x);
    const Vec want = oracles::naive_forward(net, x);
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("piecewise linearity on segments with a fixed activation pattern") {
    // If x, y, and the segment between them share the ReLU pattern,
    // forward is affine along that segment.
    const Network net = testnets::random_relu_net(2, {5, 5}, 3, 21);
    SeededUniform rng(22);

    auto pattern = [&](const Vec &p) {
        std::vector<int> pat;
        Vec cur = p;
        for (const auto &l : net.layers) {
            if (const auto *a = std::get_if<AffineLayer>(&l)) {
                Vec next(a->bias);
                for (std::size_t r = 0; r < a->weights.rows; ++r)
                    for (std::size_t c = 0; c < a->weights.cols; ++c)
                        next[r] += a->weights.at(r, c) * cur[c];
                cur = next;
            } else if (std::holds_alternative<ReluLayer>(l)) {
                for (auto &v : cur) {
                    pat.push_back(v > 0 ? 1 : 0);
                    v = std::max(0.0, v);
                }
            }
        }
        return pat;
    };

    int checked = 0;
    for (int trial = 0; trial < 500 && checked < 30; ++trial) {
        Vec x{rng.range(-1, 1), rng.range(-1, 1)};
        Vec y{x[0] + rng.range(-0.05, 0.05), x[1] + rng.range(-0.05, 0.05)};
        Vec mid{0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])};
        if (pattern(x) != pattern(y) || pattern(x) != pattern(mid))
            continue;
        ++checked;
        const Vec fx = forward(net, x), fy = forward(net, y), fm = forward(net, mid);
        for (std::size_t i = 0; i < fx.size(); ++i)
            CHECK(fm[i] == doctest::Approx(0.5 * fx[i] + 0.5 * fy[i]).epsilon(1e-9));
    }
    CHECK(checked >= 10);
}
