#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"
#include "hoig/models/model.hpp"
#include "hoig/workbench/dataset.hpp"

namespace hoig {

namespace detail {

inline double stable_sigmoid(double u) {
    if (u >= 0.0) {
        const double e = std::exp(-u);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

struct SigmoidStack {
    double s;   // sigma(u)
    double d1;  // sigma'
    double d2;  // sigma''
    double d3;  // sigma'''
};

inline SigmoidStack sigmoid_stack(double u) {
    SigmoidStack out;
    out.s = stable_sigmoid(u);
    out.d1 = out.s * (1.0 - out.s);
    const double c = 1.0 - 2.0 * out.s;
    out.d2 = out.d1 * c;
    out.d3 = out.d1 * (c * c - 2.0 * out.d1);
    return out;
}

} // namespace detail

// Quadratic-logistic regressor: standardized inputs z = (x - mean) / stddev
// feed u(z) = beta0 + b.z + z'Qz, and the prediction is squashed back into
// the observed target range, f(x) = y_lo + (y_hi - y_lo) * sigmoid(u).
// Polynomial-in-sigmoid structure keeps all derivatives closed-form.
class GlmModel final : public PredictiveModel {
public:
    GlmModel(std::vector<double> mean, std::vector<double> stddev, double y_lo, double y_hi,
             double beta0, Eigen::VectorXd linear, Eigen::MatrixXd quadratic)
        : dim_(static_cast<int>(mean.size())),
          mean_(std::move(mean)),
          stddev_(std::move(stddev)),
          y_lo_(y_lo),
          y_hi_(y_hi),
          beta0_(beta0),
          b_(std::move(linear)),
          Q_(std::move(quadratic)) {
        if (dim_ < 1) throw std::invalid_argument("glm needs at least one feature");
        if (static_cast<int>(stddev_.size()) != dim_ || b_.size() != dim_ ||
            Q_.rows() != dim_ || Q_.cols() != dim_)
            throw DimensionMismatch("glm parameter blocks disagree on feature count");
        if (!(y_hi_ > y_lo_)) throw std::invalid_argument("glm target range must be non-empty");
        for (double s : stddev_)
            if (!(s > 0.0)) throw std::invalid_argument("glm stddev entries must be positive");
        if (!Q_.isApprox(Q_.transpose()))
            throw std::invalid_argument("glm quadratic form must be symmetric");
    }

    int dim() const override { return dim_; }
    DerivativeKind derivative_kind() const override { return DerivativeKind::Exact; }
    bool has_third() const override { return true; }

    double value(const std::vector<double>& x) const override {
        check_dim(*this, x);
        return y_lo_ + (y_hi_ - y_lo_) * detail::stable_sigmoid(score(x));
    }

    std::vector<double> gradient(const std::vector<double>& x) const override {
        check_dim(*this, x);
        DerivativeBundle b;
        eval_bundle(x, {.need_value = false, .need_gradient = true}, b);
        return std::move(b.gradient);
    }

    std::vector<double> hessian(const std::vector<double>& x) const override {
        check_dim(*this, x);
        DerivativeBundle bundle;
        eval_bundle(x, {.need_value = false, .need_hessian = true}, bundle);
        const auto d = static_cast<std::size_t>(dim_);
        std::vector<double> full(d * d);
        std::size_t slot = 0;
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i <= j; ++i) {
                full[i * d + j] = full[j * d + i] = bundle.hessian[slot];
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

    void eval_bundle(const std::vector<double>& x, const BundleRequest& req,
                     DerivativeBundle& out) const override {
        check_dim(*this, x);
        const auto d = static_cast<std::size_t>(dim_);
        Eigen::VectorXd z(dim_);
        for (std::size_t j = 0; j < d; ++j)
            z[static_cast<Eigen::Index>(j)] = (x[j] - mean_[j]) / stddev_[j];

        const double u = beta0_ + b_.dot(z) + z.dot(Q_ * z);
        const auto sig = detail::sigmoid_stack(u);
        const double range = y_hi_ - y_lo_;
        out.value = y_lo_ + range * sig.s;
        if (!req.need_gradient && !req.need_hessian && !req.need_third) return;

        const Eigen::VectorXd w = b_ + 2.0 * (Q_ * z); // du/dz
        if (req.need_gradient) {
            out.gradient.assign(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                out.gradient[i] =
                    range * sig.d1 * w[static_cast<Eigen::Index>(i)] / stddev_[i];
        }
        if (req.need_hessian) {
            out.hessian.assign(canonical_count(dim_, 2), 0.0);
            std::size_t slot = 0;
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t i = 0; i <= j; ++i) {
                    const double wi = w[static_cast<Eigen::Index>(i)];
                    const double wj = w[static_cast<Eigen::Index>(j)];
                    const double qij =
                        Q_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                    out.hessian[slot++] = range * (sig.d2 * wi * wj + sig.d1 * 2.0 * qij) /
                                          (stddev_[i] * stddev_[j]);
                }
        }
        if (req.need_third) {
            out.third.assign(canonical_count(dim_, 3), 0.0);
            std::size_t slot = 0;
            for (std::size_t m = 0; m < d; ++m)
                for (std::size_t j = 0; j <= m; ++j)
                    for (std::size_t i = 0; i <= j; ++i) {
                        const double wi = w[static_cast<Eigen::Index>(i)];
                        const double wj = w[static_cast<Eigen::Index>(j)];
                        const double wm = w[static_cast<Eigen::Index>(m)];
                        const double qij = Q_(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j));
                        const double qim = Q_(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(m));
                        const double qjm = Q_(static_cast<Eigen::Index>(j),
                                              static_cast<Eigen::Index>(m));
                        const double cubic = sig.d3 * wi * wj * wm;
                        const double cross =
                            2.0 * sig.d2 * (qij * wm + qim * wj + qjm * wi);
                        out.third[slot++] = range * (cubic + cross) /
                                            (stddev_[i] * stddev_[j] * stddev_[m]);
                    }
        }
    }

    const std::vector<double>& input_mean() const { return mean_; }
    const std::vector<double>& input_stddev() const { return stddev_; }
    double target_lo() const { return y_lo_; }
    double target_hi() const { return y_hi_; }
    double intercept() const { return beta0_; }
    const Eigen::VectorXd& linear_coeffs() const { return b_; }
    const Eigen::MatrixXd& quadratic_form() const { return Q_; }

private:
    double score(const std::vector<double>& x) const {
        Eigen::VectorXd z(dim_);
        for (int j = 0; j < dim_; ++j)
            z[j] = (x[static_cast<std::size_t>(j)] - mean_[static_cast<std::size_t>(j)]) /
                   stddev_[static_cast<std::size_t>(j)];
        return beta0_ + b_.dot(z) + z.dot(Q_ * z);
    }

    int dim_;
    std::vector<double> mean_;
    std::vector<double> stddev_;
    double y_lo_;
    double y_hi_;
    double beta0_;
    Eigen::VectorXd b_;
    Eigen::MatrixXd Q_;
};

struct GlmFitReport {
    int iterations = 0;
    double final_loss = 0.0;
    double grad_norm = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    bool converged = false;
};

namespace detail {

// Quadratic feature map [1, z, {z_i z_j : i <= j}] with the pair block in
// the same canonical order used for symmetric tensor storage.
inline void glm_feature_row(const Eigen::VectorXd& z, Eigen::VectorXd& row) {
    const Eigen::Index d = z.size();
    row[0] = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) row[1 + j] = z[j];
    Eigen::Index slot = 1 + d;
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) row[slot++] = z[i] * z[j];
}

} // namespace detail

// Least-squares fit of the quadratic-logistic model by damped Gauss-Newton.
// Initialization inverts the sigmoid on clamped targets and solves a ridge
// system, so well-specified data converges in a handful of steps.
inline GlmModel fit_glm(const Dataset& data, int max_iters = 200, double tol = 1e-8,
                        GlmFitReport* report = nullptr) {
    const std::size_t n = data.size();
    const int dim = data.dim();
    const auto d = static_cast<std::size_t>(dim);
    const Eigen::Index p = 1 + dim + static_cast<Eigen::Index>(canonical_count(dim, 2));
    if (static_cast<Eigen::Index>(n) <= p)
        throw DataError("glm fit needs more samples than quadratic features (" +
                        std::to_string(n) + " <= " + std::to_string(p) + ")");
    if (max_iters < 1) throw std::invalid_argument("glm max_iters must be >= 1");

    const ColumnStats stats = column_stats(data);

    double y_min = data.y[0];
    double y_max = data.y[0];
    for (double v : data.y) {
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
    }
    const double spread = y_max - y_min;
    const double pad =
        spread > 0.0 ? 0.05 * spread : std::max(0.5, 0.05 * std::abs(y_min));
    const double y_lo = y_min - pad;
    const double y_hi = y_max + pad;
    const double range = y_hi - y_lo;

    Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), p);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    Eigen::VectorXd z(dim);
    Eigen::VectorXd feat(p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j)
            z[static_cast<Eigen::Index>(j)] = (data.X[i][j] - stats.mean[j]) / stats.stddev[j];
        detail::glm_feature_row(z, feat);
        phi.row(static_cast<Eigen::Index>(i)) = feat.transpose();
        y[static_cast<Eigen::Index>(i)] = data.y[i];
    }

    // Logit-space least squares for the starting point.
    Eigen::VectorXd u0(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < u0.size(); ++i) {
        const double frac = std::clamp((y[i] - y_lo) / range, 1e-4, 1.0 - 1e-4);
        u0[i] = std::log(frac / (1.0 - frac));
    }
    Eigen::MatrixXd gram = phi.transpose() * phi;
    gram.diagonal().array() += 1e-8;
    Eigen::VectorXd beta = Eigen::LLT<Eigen::MatrixXd>(gram).solve(phi.transpose() * u0);

    const auto loss_of = [&](const Eigen::VectorXd& coeffs, Eigen::VectorXd& resid) {
        const Eigen::VectorXd u = phi * coeffs;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double f = y_lo + range * detail::stable_sigmoid(u[i]);
            resid[i] = f - y[i];
            loss += 0.5 * resid[i] * resid[i];
        }
        return loss;
    };

    Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
    Eigen::VectorXd trial_resid(static_cast<Eigen::Index>(n));
    double loss = loss_of(beta, resid);
    double best_loss = loss;
    double lambda = 1e-6;
    double grad_norm = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;

    for (; iter < max_iters; ++iter) {
        const Eigen::VectorXd u = phi * beta;
        Eigen::VectorXd slope(u.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double s = detail::stable_sigmoid(u[i]);
            slope[i] = range * s * (1.0 - s);
        }
        const Eigen::MatrixXd jac = slope.asDiagonal() * phi;
        const Eigen::VectorXd grad = jac.transpose() * resid;
        grad_norm = grad.lpNorm<Eigen::Infinity>();
        if (grad_norm <= tol * (1.0 + loss)) {
            converged = true;
            break;
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal().array() += lambda;
            const Eigen::LLT<Eigen::MatrixXd> llt(damped);
            if (llt.info() == Eigen::Success) {
                const Eigen::VectorXd trial = beta - llt.solve(grad);
                const double trial_loss = loss_of(trial, trial_resid);
                if (trial_loss < loss) {
                    beta = trial;
                    loss = trial_loss;
                    resid.swap(trial_resid);
                    best_loss = std::min(best_loss, loss);
                    lambda = std::max(lambda * 0.3, 1e-12);
                    stepped = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // Damping saturated: accept the point as stationary if the
            // gradient is tame, otherwise report the stall.
            if (grad_norm <= std::sqrt(tol) * (1.0 + loss)) {
                converged = true;
                break;
            }
            throw IterationLimit("glm fit stalled before reaching tolerance", best_loss, iter);
        }
    }
    if (!converged) {
        if (grad_norm <= std::sqrt(tol) * (1.0 + loss))
            converged = true;
        else
            throw IterationLimit("glm fit hit the iteration limit", best_loss, iter);
    }

    double mean_y = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) mean_y += y[i];
    mean_y /= static_cast<double>(n);
    double ss_tot = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    const double ss_res = 2.0 * loss;
    if (report) {
        report->iterations = iter;
        report->final_loss = loss;
        report->grad_norm = grad_norm;
        report->rmse = std::sqrt(ss_res / static_cast<double>(n));
        report->r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
        report->converged = converged;
    }

    const double beta0 = beta[0];
    Eigen::VectorXd b = beta.segment(1, dim);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::Index slot = 1 + dim;
    for (Eigen::Index j = 0; j < dim; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) {
            const double c = beta[slot++];
            if (i == j)
                Q(i, i) = c;
            else
                Q(i, j) = Q(j, i) = 0.5 * c;
        }

    return GlmModel(stats.mean, stats.stddev, y_lo, y_hi, beta0, std::move(b), std::move(Q));
}

} // namespace hoig
