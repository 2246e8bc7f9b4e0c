#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hoig/workbench/synthetic.hpp"
#include "support/fixtures.hpp"

using hoig::Dataset;
using hoig::generate_synthetic;
using hoig::SyntheticConfig;

TEST_CASE("synthetic draws are reproducible per seed", "[workbench][synthetic]") {
    SyntheticConfig cfg;
    cfg.n_samples = 50;
    cfg.seed = 7;
    const Dataset a = generate_synthetic(cfg);
    const Dataset b = generate_synthetic(cfg);
    REQUIRE(a.X == b.X);
    REQUIRE(a.y == b.y);

    cfg.seed = 8;
    const Dataset c = generate_synthetic(cfg);
    REQUIRE(a.X != c.X);
}

TEST_CASE("noise-free targets equal the generator polynomial", "[workbench][synthetic]") {
    SyntheticConfig cfg;
    cfg.n_samples = 40;
    cfg.noise_scale = 0.0;
    cfg.seed = 3;
    const Dataset d = generate_synthetic(cfg);
    const auto f = hoig::synthetic_generator_polynomial();
    for (std::size_t i = 0; i < d.size(); ++i) REQUIRE(d.y[i] == f.value(d.X[i]));
}

TEST_CASE("features stay in the unit cube", "[workbench][synthetic]") {
    SyntheticConfig cfg;
    cfg.n_samples = 200;
    cfg.seed = 11;
    const Dataset d = generate_synthetic(cfg);
    REQUIRE(d.dim() == 8);
    REQUIRE(d.feature_names.front() == "x1");
    REQUIRE(d.feature_names.back() == "x8");
    for (const auto& row : d.X)
        for (double v : row) {
            REQUIRE(v >= 0.0);
            REQUIRE(v < 1.0);
        }
}

TEST_CASE("noise injection matches its nominal scale", "[workbench][synthetic]") {
    SyntheticConfig cfg;
    cfg.n_samples = 500;
    cfg.noise_scale = 0.1;
    cfg.seed = 0;
    const Dataset d = generate_synthetic(cfg);
    const auto f = hoig::synthetic_generator_polynomial();

    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double r = d.y[i] - f.value(d.X[i]);
        sum += r;
        sum2 += r * r;
    }
    const double n = static_cast<double>(d.size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sum2 / n - mean * mean);
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(stddev > 0.08);
    REQUIRE(stddev < 0.12);
}

TEST_CASE("synthetic config is validated", "[workbench][synthetic]") {
    SyntheticConfig bad;
    bad.n_samples = 0;
    REQUIRE_THROWS_AS(generate_synthetic(bad), hoig::DataError);
    bad.n_samples = 10;
    bad.noise_scale = -0.1;
    REQUIRE_THROWS_AS(generate_synthetic(bad), hoig::DataError);
}
