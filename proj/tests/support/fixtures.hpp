#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hoig/models/polynomial.hpp"
#include "hoig/workbench/dataset.hpp"
#include "hoig/workbench/synthetic.hpp"

// Shared fixtures for the test suite and the acceptance runner.

namespace hoig::testfix {

// f = 3*x1*x2 on R^2
inline PolynomialModel bilinear() { return PolynomialModel::product_of(2, 3.0, {0, 1}); }

// f = 3*x1*x2*x3 on R^3
inline PolynomialModel trilinear() { return PolynomialModel::product_of(3, 3.0, {0, 1, 2}); }

// The 8-feature interaction demo polynomial used by the synthetic data
// generator lives in the library; re-exported here for older call sites.
inline PolynomialModel synthetic_generator_polynomial() {
    return hoig::synthetic_generator_polynomial();
}

// Deterministic uniform draws in [0,1) from the top 53 bits of a seeded PRNG;
// avoids std::uniform_real_distribution so streams are implementation-proof.
struct UniformStream {
    std::mt19937_64 rng;
    explicit UniformStream(std::uint64_t seed) : rng(seed) {}
    double next() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
    std::vector<double> vec(int n, double lo = 0.0, double hi = 1.0) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = lo + (hi - lo) * next();
        return v;
    }
};

// Synthetic 416-row housing table shaped like a metro-area valuation dataset:
// transaction date, house age, distance to transit, nearby store count, and
// coordinates predict unit price.  Price follows a quadratic form in the
// standardized covariates pushed through a soft saturation, plus mild noise,
// so a quadratic-logistic fit is well-specified.
inline hoig::Dataset make_housing_dataset() {
    constexpr int n = 416;
    hoig::Dataset d;
    d.feature_names = {"trans_date", "house_age", "metro_dist",
                       "n_stores",   "lat",       "long"};
    d.target_name = "price";

    hoig::detail::UniformStream u(20160101ull);
    d.X.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double u_dist = u.next();
        std::vector<double> row(6);
        row[0] = 2012.667 + 0.916 * u.next();
        row[1] = 43.8 * u.next();
        row[2] = 23.4 + 6465.0 * u_dist * u_dist;
        row[3] = std::floor(11.0 * u.next());
        row[4] = 24.932 + 0.082 * u.next();
        row[5] = 121.473 + 0.091 * u.next();
        d.X.push_back(std::move(row));
    }
    d.y.assign(n, 0.0);

    const hoig::ColumnStats stats = hoig::column_stats(d);
    for (int i = 0; i < n; ++i) {
        std::array<double, 6> z;
        for (std::size_t j = 0; j < 6; ++j)
            z[j] = (d.X[static_cast<std::size_t>(i)][j] - stats.mean[j]) / stats.stddev[j];
        const double score = 0.15 * z[0] - 0.55 * z[1] - 0.85 * z[2] + 0.35 * z[3] +
                             0.45 * z[4] + 0.15 * z[5] - 0.20 * z[1] * z[1] -
                             0.15 * z[2] * z[2] + 0.25 * z[1] * z[2] -
                             0.18 * z[2] * z[3] + 0.12 * z[4] * z[5];
        const double sig = 1.0 / (1.0 + std::exp(-score));
        d.y[static_cast<std::size_t>(i)] =
            7.0 + 112.0 * sig + 1.8 * hoig::detail::next_normal(u);
    }
    return d;
}

// Wrapper that hides a model's exact derivatives, forcing every consumer down
// the finite-difference path.
class ValueOnlyModel : public hoig::PredictiveModel {
public:
    explicit ValueOnlyModel(const hoig::PredictiveModel& inner) : inner_(inner) {}
    int dim() const override { return inner_.dim(); }
    double value(const std::vector<double>& x) const override { return inner_.value(x); }

private:
    const hoig::PredictiveModel& inner_;
};

} // namespace hoig::testfix
