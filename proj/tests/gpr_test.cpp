#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hoig/models/gpr.hpp"
#include "hoig/workbench/synthetic.hpp"
#include "support/fixtures.hpp"

using hoig::Dataset;
using hoig::default_gpr_params;
using hoig::fit_gpr;
using hoig::GprHyperParams;
using hoig::GprModel;

namespace {

Dataset small_uniform_dataset(int n, int dim, std::uint64_t seed) {
    hoig::testfix::UniformStream u(seed);
    Dataset d;
    for (int j = 1; j <= dim; ++j) d.feature_names.push_back("x" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        auto row = u.vec(dim);
        double target = std::sin(3.0 * row[0]);
        for (int j = 1; j < dim; ++j) target += row[static_cast<std::size_t>(j)] * row[0];
        d.X.push_back(std::move(row));
        d.y.push_back(target);
    }
    return d;
}

} // namespace

TEST_CASE("single-point posterior mean has the closed form", "[models][gpr]") {
    Dataset d;
    d.feature_names = {"a", "b"};
    d.X = {{0.25, -0.5}};
    d.y = {2.0};
    GprHyperParams hp{.lengthscale = 1.0, .signal_var = 1.0, .noise_var = 0.1};
    const GprModel m = fit_gpr(d, hp);

    // alpha = y / (signal_var + noise_var); prediction at the training point
    // shrinks toward zero by exactly the noise fraction.
    REQUIRE(m.value(d.X[0]) == Catch::Approx(2.0 / 1.1).epsilon(1e-12));

    // the kernel is radially symmetric about the lone training point
    const auto g = m.gradient(d.X[0]);
    REQUIRE(std::abs(g[0]) < 1e-14);
    REQUIRE(std::abs(g[1]) < 1e-14);

    // far from all data the posterior mean decays to the prior mean
    REQUIRE(std::abs(m.value({50.0, 50.0})) < 1e-12);
}

TEST_CASE("training residuals equal -noise_var * weights", "[models][gpr]") {
    const Dataset d = small_uniform_dataset(40, 3, 99);
    GprHyperParams hp{.lengthscale = 0.8, .signal_var = 1.5, .noise_var = 0.05};
    const GprModel m = fit_gpr(d, hp);

    double sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double resid = m.value(d.X[i]) - d.y[i];
        const double expected = -hp.noise_var * m.weights()[static_cast<Eigen::Index>(i)];
        REQUIRE(resid == Catch::Approx(expected).margin(1e-9));
        sq += resid * resid;
    }
    const double direct_rmse = std::sqrt(sq / static_cast<double>(d.size()));
    REQUIRE(m.train_rmse() == Catch::Approx(direct_rmse).epsilon(1e-6));
}

TEST_CASE("fitted weights solve the regularized kernel system", "[models][gpr]") {
    const Dataset d = small_uniform_dataset(25, 2, 5);
    GprHyperParams hp{.lengthscale = 0.6, .signal_var = 2.0, .noise_var = 0.02};
    const GprModel m = fit_gpr(d, hp);

    const auto& X = m.training_inputs();
    const auto& a = m.weights();
    const double inv_l2 = 1.0 / (hp.lengthscale * hp.lengthscale);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double lhs = 0.0;
        for (Eigen::Index j = 0; j < X.rows(); ++j) {
            const double r2 = (X.row(i) - X.row(j)).squaredNorm();
            lhs += a[j] * hp.signal_var * std::exp(-0.5 * r2 * inv_l2);
        }
        lhs += hp.noise_var * a[i];
        REQUIRE(lhs == Catch::Approx(d.y[static_cast<std::size_t>(i)]).margin(1e-9));
    }
}

TEST_CASE("duplicate rows with zero noise are rejected as non-SPD", "[models][gpr]") {
    Dataset d;
    d.feature_names = {"a"};
    d.X = {{0.5}, {0.5}, {0.9}};
    d.y = {1.0, 1.0, 2.0};
    GprHyperParams hp{.lengthscale = 1.0, .signal_var = 1.0, .noise_var = 0.0};
    REQUIRE_THROWS_AS(fit_gpr(d, hp), hoig::SpdFactorizationError);

    // the same data with a noise floor factorizes fine
    hp.noise_var = 1e-6;
    REQUIRE_NOTHROW(fit_gpr(d, hp));
}

TEST_CASE("gpr analytic derivatives agree with finite differences", "[models][gpr]") {
    const Dataset d = small_uniform_dataset(30, 3, 17);
    const GprModel m = fit_gpr(d, GprHyperParams{0.7, 1.0, 1e-3});
    REQUIRE(m.derivative_kind() == hoig::DerivativeKind::Exact);
    REQUIRE(m.has_third());

    hoig::testfix::UniformStream u(21);
    for (int rep = 0; rep < 5; ++rep) {
        const auto x = u.vec(3);

        const auto g = m.gradient(x);
        const auto g_fd = hoig::fd_gradient(m, x);
        for (int i = 0; i < 3; ++i)
            REQUIRE(g[static_cast<std::size_t>(i)] ==
                    Catch::Approx(g_fd[static_cast<std::size_t>(i)]).margin(1e-6));

        const auto h = m.hessian(x);
        const auto h_fd = hoig::fd_hessian(m, x);
        for (std::size_t k = 0; k < h.size(); ++k)
            REQUIRE(h[k] == Catch::Approx(h_fd[k]).margin(2e-4));

        // third derivatives against central differences of the exact hessian
        const auto third = m.third(x);
        const double step = 1e-5;
        for (int kk = 0; kk < 3; ++kk) {
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(kk)] += step;
            xm[static_cast<std::size_t>(kk)] -= step;
            const auto hp_mat = m.hessian(xp);
            const auto hm_mat = m.hessian(xm);
            for (int j = 0; j <= kk; ++j)
                for (int i = 0; i <= j; ++i) {
                    const double fd =
                        (hp_mat[static_cast<std::size_t>(i * 3 + j)] -
                         hm_mat[static_cast<std::size_t>(i * 3 + j)]) /
                        (2.0 * step);
                    const auto rank = hoig::canonical_rank(hoig::make_tuple({i, j, kk}));
                    REQUIRE(third[rank] == Catch::Approx(fd).margin(1e-5));
                }
        }
    }
}

TEST_CASE("hessian matrix mirrors the canonical bundle slots", "[models][gpr]") {
    const Dataset d = small_uniform_dataset(20, 4, 31);
    const GprModel m = fit_gpr(d, GprHyperParams{0.9, 1.2, 1e-2});
    const auto x = hoig::testfix::UniformStream(1).vec(4);

    hoig::DerivativeBundle b;
    m.eval_bundle(x, {.need_value = true, .need_gradient = true, .need_hessian = true}, b);
    const auto full = m.hessian(x);
    for (int j = 0; j < 4; ++j)
        for (int i = 0; i <= j; ++i) {
            const auto rank = hoig::canonical_rank(hoig::make_tuple({i, j}));
            REQUIRE(full[static_cast<std::size_t>(i * 4 + j)] == b.hessian[rank]);
            REQUIRE(full[static_cast<std::size_t>(j * 4 + i)] == b.hessian[rank]);
        }
    REQUIRE(b.value == m.value(x));
}

TEST_CASE("heuristic defaults land in sane ranges on unit-cube data", "[models][gpr]") {
    hoig::SyntheticConfig cfg;
    cfg.n_samples = 200;
    cfg.seed = 4;
    const Dataset d = hoig::generate_synthetic(cfg);
    const GprHyperParams p = default_gpr_params(d);
    // median pairwise distance in the 8-dim unit cube sits near 1.15
    REQUIRE(p.lengthscale > 0.8);
    REQUIRE(p.lengthscale < 1.6);
    REQUIRE(p.signal_var > 0.2);
    REQUIRE(p.noise_var == Catch::Approx(0.01 * p.signal_var));
}

TEST_CASE("gpr generalizes on the synthetic benchmark", "[models][gpr]") {
    hoig::SyntheticConfig cfg;
    cfg.n_samples = 500;
    cfg.seed = 1;
    const Dataset full = hoig::generate_synthetic(cfg);

    Dataset train;
    train.feature_names = full.feature_names;
    Dataset test = train;
    for (std::size_t i = 0; i < full.size(); ++i) {
        auto& dst = i < 400 ? train : test;
        dst.X.push_back(full.X[i]);
        dst.y.push_back(full.y[i]);
    }

    const GprModel m = fit_gpr(train);

    double mean = 0.0;
    for (double v : train.y) mean += v;
    mean /= static_cast<double>(train.size());

    double sq = 0.0, sq_mean = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const double err = m.value(test.X[i]) - test.y[i];
        sq += err * err;
        const double base = mean - test.y[i];
        sq_mean += base * base;
    }
    const double rmse = std::sqrt(sq / static_cast<double>(test.size()));
    const double rmse_mean = std::sqrt(sq_mean / static_cast<double>(test.size()));
    REQUIRE(rmse < 0.25);
    REQUIRE(rmse < 0.5 * rmse_mean); // comfortably beats the constant predictor
}

TEST_CASE("gpr hyperparameters are validated", "[models][gpr]") {
    const Dataset d = small_uniform_dataset(5, 2, 2);
    REQUIRE_THROWS_AS(fit_gpr(d, GprHyperParams{0.0, 1.0, 0.1}), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_gpr(d, GprHyperParams{1.0, -1.0, 0.1}), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_gpr(d, GprHyperParams{1.0, 1.0, -0.1}), std::invalid_argument);
}
