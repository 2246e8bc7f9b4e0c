#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hoig/models/closed_form.hpp"
#include "support/fixtures.hpp"

using namespace hoig;
using Catch::Approx;

TEST_CASE("closed-form attribution reproduces the bilinear oracle", "[models]") {
    auto m = testfix::bilinear();
    std::vector<double> x{1.0, 1.0}, b{0.0, 0.0};

    auto a1 = closed_form_attribution(m, x, b, 1);
    REQUIRE(a1.expand({0}) == Approx(1.5).margin(1e-14));
    REQUIRE(a1.expand({1}) == Approx(1.5).margin(1e-14));

    auto a2 = closed_form_attribution(m, x, b, 2);
    for_each_canonical(2, 2, [&](const IndexTuple& idx) {
        REQUIRE(a2.at_rank(canonical_rank(idx)) == Approx(0.75).margin(1e-14));
    });
    REQUIRE(total_sum(a2) == Approx(3.0).margin(1e-13));
}

TEST_CASE("monomial entries equal coeff * prod(x) / d^L exactly", "[models]") {
    auto m = testfix::trilinear();
    std::vector<double> x{0.9, 0.7, 0.5}, b{0.0, 0.0, 0.0};
    const double px = 3.0 * 0.9 * 0.7 * 0.5;
    for (int order : {1, 2, 3}) {
        auto a = closed_form_attribution(m, x, b, order);
        const double expected = px / std::pow(3.0, order);
        for_each_canonical(3, order, [&](const IndexTuple& idx) {
            REQUIRE(a.at_rank(canonical_rank(idx)) == Approx(expected).margin(1e-13));
        });
    }
}

TEST_CASE("closed-form attributions are complete and marginalize exactly", "[models]") {
    auto m = testfix::synthetic_generator_polynomial();
    testfix::UniformStream u(47);
    for (int rep = 0; rep < 5; ++rep) {
        auto x = u.vec(8);
        auto b = u.vec(8);
        const double delta_f = m.value(x) - m.value(b);

        auto a1 = closed_form_attribution(m, x, b, 1);
        auto a2 = closed_form_attribution(m, x, b, 2);
        auto a3 = closed_form_attribution(m, x, b, 3);

        REQUIRE(total_sum(a1) == Approx(delta_f).margin(1e-12));
        REQUIRE(total_sum(a2) == Approx(delta_f).margin(1e-12));
        REQUIRE(total_sum(a3) == Approx(delta_f).margin(1e-12));

        auto c2 = contract_last_index(a2);
        auto c3 = contract_last_index(a3);
        for (int i = 0; i < 8; ++i) {
            REQUIRE(c2.expand({i}) == Approx(a1.expand({i})).margin(1e-12));
        }
        for_each_canonical(8, 2, [&](const IndexTuple& idx) {
            REQUIRE(c3.at_rank(canonical_rank(idx)) ==
                    Approx(a2.at_rank(canonical_rank(idx))).margin(1e-12));
        });
    }
}

TEST_CASE("nonzero baseline shifts are handled by basis expansion", "[models]") {
    // f = x1^2 + 2 x1 x2 around baseline (1, -1)
    PolynomialModel m(2, {{1.0, {2, 0}}, {2.0, {1, 1}}});
    std::vector<double> x{2.0, 1.5}, b{1.0, -1.0};
    auto a1 = closed_form_attribution(m, x, b, 1);
    REQUIRE(total_sum(a1) == Approx(m.value(x) - m.value(b)).margin(1e-12));

    // mixed second-order mass must sit only on the interacting pair
    auto a2 = closed_form_attribution(m, x, b, 2);
    REQUIRE(a2.expand({0, 1}) != 0.0);
    REQUIRE(total_sum(a2) == Approx(m.value(x) - m.value(b)).margin(1e-12));
}

TEST_CASE("additive polynomials have no mixed closed-form entries", "[models]") {
    PolynomialModel additive(4, {{1.0, {1, 0, 0, 0}}, {2.5, {0, 3, 0, 0}}, {-1.0, {0, 0, 2, 0}}});
    testfix::UniformStream u(53);
    auto x = u.vec(4);
    auto b = u.vec(4);
    auto a2 = closed_form_attribution(additive, x, b, 2);
    auto a3 = closed_form_attribution(additive, x, b, 3);
    for_each_canonical(4, 2, [&](const IndexTuple& idx) {
        if (idx[0] != idx[1]) REQUIRE(a2.at_rank(canonical_rank(idx)) == 0.0);
    });
    for_each_canonical(4, 3, [&](const IndexTuple& idx) {
        if (!(idx[0] == idx[1] && idx[1] == idx[2]))
            REQUIRE(a3.at_rank(canonical_rank(idx)) == 0.0);
    });
}
