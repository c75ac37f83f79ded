#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "diffrl/property.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdio>

using namespace diffrl;

namespace {

InputDomain unit_domain(std::size_t n) {
    InputDomain d;
    d.per_feature.assign(n, Interval{0.0, 1.0});
    return d;
}

} // namespace

TEST_CASE("make_robustness fills symmetric slack") {
    const auto p = make_robustness(unit_domain(25), 0.01, 3.0);
    REQUIRE(p.slack.width() == 25);
    for (const auto &iv : p.slack.per_feature) {
        CHECK(iv.lo == -0.01);
        CHECK(iv.hi == 0.01);
    }
    CHECK(p.comparison->kind == ComparisonSpec::Kind::AbsDiff);
    CHECK(p.comparison->threshold_d == 3.0);

    CHECK_THROWS_AS(make_robustness(unit_domain(3), 0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(make_robustness(unit_domain(3), -0.1, 1.0), ValidationError);

    // d = 0 is legal: any action change at all violates
    const auto zero_d = make_robustness(unit_domain(3), 0.001, 0.0);
    CHECK(zero_d.comparison->threshold_d == 0.0);
}

TEST_CASE("make_monotonicity slack shapes") {
    SUBCASE("positive direction on listed features only") {
        const auto p = make_monotonicity(unit_domain(25), {1, 2, 3, 4, 5, 6, 7, 8}, +1, 0.01, 3.0);
        int nonzero = 0;
        for (const auto &iv : p.slack.per_feature)
            if (!(iv.lo == 0.0 && iv.hi == 0.0)) {
                ++nonzero;
                CHECK(iv.lo == 0.0);
                CHECK(iv.hi == 0.01);
            }
        CHECK(nonzero == 8);
        CHECK(p.comparison->direction == +1);
    }
    SUBCASE("negative direction flips slack and direction") {
        const auto p = make_monotonicity(unit_domain(19), {1}, -1, 0.01, 8.0);
        CHECK(p.slack.per_feature[1].lo == -0.01);
        CHECK(p.slack.per_feature[1].hi == 0.0);
        CHECK(p.comparison->direction == -1);
    }
    SUBCASE("all-feature index set mirrors robustness shape, one-sided") {
        const auto p = make_monotonicity(unit_domain(4), {0, 1, 2, 3}, +1, 0.5, 1.0);
        for (const auto &iv : p.slack.per_feature) {
            CHECK(iv.lo == 0.0);
            CHECK(iv.hi == 0.5);
        }
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(make_monotonicity(unit_domain(4), {}, +1, 0.1, 1.0), ValidationError);
        CHECK_THROWS_AS(make_monotonicity(unit_domain(4), {9}, +1, 0.1, 1.0), ValidationError);
        CHECK_THROWS_AS(make_monotonicity(unit_domain(4), {0}, +1, 0.0, 1.0), ValidationError);
    }
}

TEST_CASE("monotonicity slack has a zero endpoint, robustness is symmetric") {
    const auto rob = make_robustness(unit_domain(6), 0.25, 1.0);
    for (const auto &iv : rob.slack.per_feature)
        CHECK(iv.lo == -iv.hi);
    const auto mono = make_monotonicity(unit_domain(6), {2, 4}, +1, 0.25, 1.0);
    for (const auto &iv : mono.slack.per_feature)
        CHECK((iv.lo == 0.0 || iv.hi == 0.0));
}

TEST_CASE("apply_coverage matches the shrinkage formula") {
    InputDomain d;
    d.per_feature = {{0.0, 1.0}};
    const auto cov60 = apply_coverage(d, 60.0);
    CHECK(cov60.per_feature[0].lo == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(cov60.per_feature[0].hi == doctest::Approx(0.8).epsilon(1e-15));

    const auto cov100 = apply_coverage(d, 100.0);
    CHECK(cov100.per_feature[0].lo == 0.0);
    CHECK(cov100.per_feature[0].hi == 1.0);

    InputDomain wide;
    wide.per_feature = {{-1.0, 3.0}};
    const auto cov80 = apply_coverage(wide, 80.0);
    CHECK(cov80.per_feature[0].lo == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(cov80.per_feature[0].hi == doctest::Approx(2.6).epsilon(1e-12));

    CHECK_THROWS_AS(apply_coverage(d, 0.0), ValidationError);
    CHECK_THROWS_AS(apply_coverage(d, 101.0), ValidationError);
}

TEST_CASE("coverage nesting: lower percentage is contained featurewise") {
    SeededUniform rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        InputDomain d;
        const int n = 1 + int(rng.range(0, 5));
        for (int i = 0; i < n; ++i) {
            const double a = rng.range(-5, 5);
            d.per_feature.push_back({a, a + rng.range(0, 10)});
        }
        double p1 = rng.range(1, 100), p2 = rng.range(1, 100);
        if (p1 > p2)
            std::swap(p1, p2);
        const auto c1 = apply_coverage(d, p1), c2 = apply_coverage(d, p2);
        for (int i = 0; i < n; ++i) {
            CHECK(c1.per_feature[i].lo >= c2.per_feature[i].lo - 1e-12);
            CHECK(c1.per_feature[i].hi <= c2.per_feature[i].hi + 1e-12);
        }
    }
}

TEST_CASE("sign_flip_probability") {
    CHECK(sign_flip_probability(0.0, 1.0) == doctest::Approx(0.25).epsilon(1e-12));

    // mu = 0.25, sigma = 0.5: Phi(0.5)^2, cross-checked against an
    // erf-based oracle and Simpson quadrature of the density.
    const double got = sign_flip_probability(0.25, 0.5);
    const double erf_oracle = std::pow(0.5 * (1.0 + std::erf(0.5 / std::sqrt(2.0))), 2);
    CHECK(got == doctest::Approx(erf_oracle).epsilon(1e-12));
    const double quad_oracle = std::pow(oracles::quadrature_normal_cdf(0.5), 2);
    CHECK(got == doctest::Approx(quad_oracle).epsilon(1e-9));
    CHECK(std::abs(got - 0.4781) < 1e-3);

    // limit mu -> infinity
    CHECK(sign_flip_probability(100.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(sign_flip_probability(0.1, 0.0), ValidationError);
}

TEST_CASE("mu_for_confidence") {
    CHECK(mu_for_confidence(0.25, 1.0) == doctest::Approx(0.0).epsilon(1e-9));

    const double got = mu_for_confidence(0.4, 0.5);
    const double want = 0.5 * oracles::bisect_normal_icdf(std::sqrt(0.4));
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(std::abs(got - 0.1694) < 1e-3);

    CHECK_THROWS_AS(mu_for_confidence(0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(mu_for_confidence(1.0, 1.0), ValidationError);
}

TEST_CASE("round trip: sign_flip_probability(mu_for_confidence(q)) == q") {
    for (double q = 0.1; q < 0.95; q += 0.1) {
        for (double sigma : {0.5, 1.0, 2.0}) {
            const double mu = mu_for_confidence(q, sigma);
            CHECK(sign_flip_probability(mu, sigma) == doctest::Approx(q).epsilon(1e-9));
        }
    }
}

TEST_CASE("property JSON round trip") {
    auto p = make_monotonicity(unit_domain(4), {1}, +1, 0.01, 2.0);
    p.name = "roundtrip";
    p.coverage_pct = 80.0;
    p.clamp_perturbed = true;
    LinearInputConstraint c;
    c.coeffs_x = {1, -1, 0, 0};
    c.coeffs_s = {0, 0, 0, 0};
    c.relation = LinearInputConstraint::Rel::Ge;
    c.rhs = 0.1;
    p.extra_constraints.push_back(c);
    p.disjunctive_variants.push_back(c);

    const std::string text = property_to_json(p);
    const PropertySpec back = parse_property(text);
    CHECK(back.name == p.name);
    CHECK(back.coverage_pct == 80.0);
    CHECK(back.clamp_perturbed);
    CHECK(back.slack.per_feature[1].hi == 0.01);
    CHECK(back.extra_constraints.size() == 1);
    CHECK(back.disjunctive_variants.size() == 1);
    CHECK(back.comparison->direction == +1);

    // continuous anchor with an unbounded upper edge survives the trip
    PropertySpec cont;
    cont.name = "anchored";
    cont.domain = unit_domain(3);
    cont.slack.per_feature.assign(3, Interval{0.0, 0.01});
    ContinuousAnchor a;
    a.mean_bound = {0.25, std::numeric_limits<double>::infinity()};
    a.separation_d = 0.5;
    a.both_directions = true;
    cont.anchor = a;
    validate_property(cont);
    const PropertySpec cback = parse_property(property_to_json(cont));
    CHECK(cback.anchor->mean_bound.lo == 0.25);
    CHECK(std::isinf(cback.anchor->mean_bound.hi));
    CHECK(cback.anchor->both_directions);
}

TEST_CASE("validation rejects inconsistent properties") {
    PropertySpec p;
    p.name = "bad";
    p.domain = unit_domain(3);
    p.slack.per_feature.assign(2, Interval{0, 0}); // wrong width
    ComparisonSpec c;
    c.threshold_d = 1.0;
    p.comparison = c;
    CHECK_THROWS_AS(validate_property(p), ValidationError);

    p.slack.per_feature.assign(3, Interval{0, 0});
    p.anchor = ContinuousAnchor{{0.0, 1.0}, 0.1, false}; // both modes present
    CHECK_THROWS_AS(validate_property(p), ValidationError);

    p.comparison.reset();
    p.anchor->separation_d = 0.0; // must be positive
    CHECK_THROWS_AS(validate_property(p), ValidationError);
}
