#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "hoig/core/errors.hpp"
#include "hoig/models/polynomial.hpp"
#include "hoig/workbench/dataset.hpp"

namespace hoig {

// Eight-feature benchmark generator: three-way clique on x1..x3, additive
// x4 and x5, a pairwise x5*x6 link, and a clique on x6..x8.
inline PolynomialModel synthetic_generator_polynomial() {
    return PolynomialModel(8, {
                                  {3.0, {1, 1, 1, 0, 0, 0, 0, 0}},
                                  {1.0, {0, 0, 0, 1, 0, 0, 0, 0}},
                                  {1.0, {0, 0, 0, 0, 1, 0, 0, 0}},
                                  {1.0, {0, 0, 0, 0, 1, 1, 0, 0}},
                                  {1.0, {0, 0, 0, 0, 0, 1, 1, 1}},
                              });
}

struct SyntheticConfig {
    int n_samples = 500;
    double noise_scale = 0.1;
    std::uint64_t seed = 0;
};

namespace detail {

// Uniform in [0,1) from explicit 53-bit draws so streams are reproducible
// across standard library implementations.
struct UniformStream {
    std::mt19937_64 rng;
    explicit UniformStream(std::uint64_t seed) : rng(seed) {}
    double next() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
};

// One standard normal per call via Box-Muller (second root discarded to keep
// the draw count per sample fixed).
inline double next_normal(UniformStream& u) {
    double u1 = u.next();
    const double u2 = u.next();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

} // namespace detail

// Draw x ~ U(0,1)^8 and y = f(x) + noise_scale * N(0,1) from the benchmark
// polynomial.  Fully determined by the seed.
inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
    if (cfg.n_samples < 1) throw DataError("synthetic dataset needs n_samples >= 1");
    if (!(cfg.noise_scale >= 0.0)) throw DataError("noise_scale must be >= 0");

    const PolynomialModel f = synthetic_generator_polynomial();
    const int dim = f.dim();

    Dataset d;
    d.target_name = "y";
    for (int j = 1; j <= dim; ++j) d.feature_names.push_back("x" + std::to_string(j));

    detail::UniformStream u(cfg.seed);
    d.X.reserve(static_cast<std::size_t>(cfg.n_samples));
    d.y.reserve(static_cast<std::size_t>(cfg.n_samples));
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (int i = 0; i < cfg.n_samples; ++i) {
        for (int j = 0; j < dim; ++j) row[static_cast<std::size_t>(j)] = u.next();
        double target = f.value(row);
        if (cfg.noise_scale > 0.0) target += cfg.noise_scale * detail::next_normal(u);
        d.X.push_back(row);
        d.y.push_back(target);
    }
    return d;
}

} // namespace hoig
