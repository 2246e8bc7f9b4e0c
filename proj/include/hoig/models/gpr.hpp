#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"
#include "hoig/models/model.hpp"
#include "hoig/workbench/dataset.hpp"

namespace hoig {

struct GprHyperParams {
    double lengthscale = 1.0;
    double signal_var = 1.0; // kernel amplitude sigma_f^2
    double noise_var = 1e-2; // likelihood noise sigma_n^2
};

// Gaussian-process regressor with the squared-exponential kernel
//   k(x, z) = signal_var * exp(-|x - z|^2 / (2 * lengthscale^2)).
// The posterior mean f(x) = sum_n alpha_n k(x, X_n) is smooth, so all
// derivatives up to third order are available in closed form.
class GprModel final : public PredictiveModel {
public:
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    GprModel(RowMatrix train_inputs, Eigen::VectorXd alpha, GprHyperParams params,
             double train_rmse)
        : dim_(static_cast<int>(train_inputs.cols())),
          params_(params),
          inv_l2_(1.0 / (params.lengthscale * params.lengthscale)),
          X_(std::move(train_inputs)),
          alpha_(std::move(alpha)),
          train_rmse_(train_rmse) {
        if (dim_ < 1) throw std::invalid_argument("gpr needs at least one feature");
        if (X_.rows() != alpha_.size())
            throw DimensionMismatch("gpr weight vector does not match training rows");
        if (!(params_.lengthscale > 0.0) || !(params_.signal_var > 0.0))
            throw std::invalid_argument("gpr lengthscale and signal_var must be positive");
    }

    int dim() const override { return dim_; }
    DerivativeKind derivative_kind() const override { return DerivativeKind::Exact; }
    bool has_third() const override { return true; }

    double value(const std::vector<double>& x) const override {
        check_dim(*this, x);
        DerivativeBundle b;
        eval_bundle(x, {.need_value = true}, b);
        return b.value;
    }

    std::vector<double> gradient(const std::vector<double>& x) const override {
        check_dim(*this, x);
        DerivativeBundle b;
        eval_bundle(x, {.need_value = false, .need_gradient = true}, b);
        return std::move(b.gradient);
    }

    std::vector<double> hessian(const std::vector<double>& x) const override {
        check_dim(*this, x);
        DerivativeBundle b;
        eval_bundle(x, {.need_value = false, .need_hessian = true}, b);
        const auto d = static_cast<std::size_t>(dim_);
        std::vector<double> full(d * d);
        std::size_t slot = 0;
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i <= j; ++i) {
                full[i * d + j] = full[j * d + i] = b.hessian[slot];
                ++slot;
            }
        return full;
    }

    std::vector<double> third(const std::vector<double>& x) const override {
        check_dim(*this, x);
        DerivativeBundle b;
        eval_bundle(x, {.need_value = false, .need_third = true}, b);
        return std::move(b.third);
    }

    // Single pass over the training set filling every requested block.  The
    // per-point weight alpha_n * k(x, X_n) is shared by all derivative orders,
    // which is what makes high-order sweeps affordable.
    void eval_bundle(const std::vector<double>& x, const BundleRequest& req,
                     DerivativeBundle& out) const override {
        check_dim(*this, x);
        const auto d = static_cast<std::size_t>(dim_);
        out.value = 0.0;
        if (req.need_gradient) out.gradient.assign(d, 0.0);
        if (req.need_hessian) out.hessian.assign(canonical_count(dim_, 2), 0.0);
        if (req.need_third) out.third.assign(canonical_count(dim_, 3), 0.0);

        std::vector<double> dist(d); // (x - X_n) / lengthscale^2
        const auto n_train = static_cast<std::size_t>(X_.rows());
        for (std::size_t n = 0; n < n_train; ++n) {
            double r2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[j] - X_(static_cast<Eigen::Index>(n),
                                              static_cast<Eigen::Index>(j));
                dist[j] = diff * inv_l2_;
                r2 += diff * diff;
            }
            const double k = params_.signal_var * std::exp(-0.5 * r2 * inv_l2_);
            const double ak = alpha_[static_cast<Eigen::Index>(n)] * k;
            out.value += ak;
            if (req.need_gradient)
                for (std::size_t j = 0; j < d; ++j) out.gradient[j] -= ak * dist[j];
            if (req.need_hessian) {
                std::size_t slot = 0;
                for (std::size_t j = 0; j < d; ++j)
                    for (std::size_t i = 0; i <= j; ++i) {
                        double h = dist[i] * dist[j];
                        if (i == j) h -= inv_l2_;
                        out.hessian[slot++] += ak * h;
                    }
            }
            if (req.need_third) {
                std::size_t slot = 0;
                for (std::size_t m = 0; m < d; ++m)
                    for (std::size_t j = 0; j <= m; ++j)
                        for (std::size_t i = 0; i <= j; ++i) {
                            double t = -dist[i] * dist[j] * dist[m];
                            if (i == j) t += dist[m] * inv_l2_;
                            if (i == m) t += dist[j] * inv_l2_;
                            if (j == m) t += dist[i] * inv_l2_;
                            out.third[slot++] += ak * t;
                        }
            }
        }
    }

    const RowMatrix& training_inputs() const { return X_; }
    const Eigen::VectorXd& weights() const { return alpha_; }
    const GprHyperParams& hyperparams() const { return params_; }
    double train_rmse() const { return train_rmse_; }

private:
    int dim_;
    GprHyperParams params_;
    double inv_l2_;
    RowMatrix X_;
    Eigen::VectorXd alpha_;
    double train_rmse_;
};

// Data-driven defaults: median pairwise distance for the lengthscale, target
// variance for the amplitude, and 1% of it for the noise floor.
inline GprHyperParams default_gpr_params(const Dataset& data) {
    const std::size_t n = data.size();
    const auto d = static_cast<std::size_t>(data.dim());

    GprHyperParams p;
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            double r2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = data.X[a][j] - data.X[b][j];
                r2 += diff * diff;
            }
            dists.push_back(std::sqrt(r2));
        }
    if (!dists.empty()) {
        const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
        std::nth_element(dists.begin(), mid, dists.end());
        if (*mid > 0.0) p.lengthscale = *mid;
    }

    double mean = 0.0;
    for (double v : data.y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : data.y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (var > 0.0) {
        p.signal_var = var;
        p.noise_var = 1e-2 * var;
    }
    return p;
}

// Solve (K + noise_var I) alpha = y by Cholesky.  A non-SPD system (duplicate
// rows with no noise, degenerate hyperparameters) is reported, not patched.
inline GprModel fit_gpr(const Dataset& data,
                        std::optional<GprHyperParams> params = std::nullopt) {
    const std::size_t n = data.size();
    const auto d = static_cast<std::size_t>(data.dim());
    if (n == 0) throw DataError("gpr fit needs at least one sample");

    const GprHyperParams p = params ? *params : default_gpr_params(data);
    if (!(p.lengthscale > 0.0)) throw std::invalid_argument("gpr lengthscale must be positive");
    if (!(p.signal_var > 0.0)) throw std::invalid_argument("gpr signal_var must be positive");
    if (!(p.noise_var >= 0.0)) throw std::invalid_argument("gpr noise_var must be >= 0");

    GprModel::RowMatrix X(n, d);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data.X[i][j];
        y[static_cast<Eigen::Index>(i)] = data.y[i];
    }

    const double inv_l2 = 1.0 / (p.lengthscale * p.lengthscale);
    Eigen::MatrixXd A(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) =
            p.signal_var + p.noise_var;
        for (std::size_t b = a + 1; b < n; ++b) {
            double r2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = data.X[a][j] - data.X[b][j];
                r2 += diff * diff;
            }
            const double k = p.signal_var * std::exp(-0.5 * r2 * inv_l2);
            A(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = k;
            A(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = k;
        }
    }

    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "gpr kernel matrix is not positive definite (n=" << n
            << ", lengthscale=" << p.lengthscale << ", signal_var=" << p.signal_var
            << ", noise_var=" << p.noise_var
            << "); duplicate rows with zero noise are the usual cause";
        throw SpdFactorizationError(msg.str());
    }
    Eigen::VectorXd alpha = llt.solve(y);

    // Training-set predictions satisfy f(X_i) - y_i = -noise_var * alpha_i.
    const double rmse =
        p.noise_var * alpha.norm() / std::sqrt(static_cast<double>(n));

    return GprModel(std::move(X), std::move(alpha), p, rmse);
}

inline std::vector<double> gpr_gradient(const GprModel& m, const std::vector<double>& x) {
    return m.gradient(x);
}

inline std::vector<double> gpr_hessian(const GprModel& m, const std::vector<double>& x) {
    return m.hessian(x);
}

} // namespace hoig
