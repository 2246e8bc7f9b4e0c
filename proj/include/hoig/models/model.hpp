#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"

namespace hoig {

enum class DerivativeKind { Exact, FiniteDifference };

// What a model evaluation must fill in.  Symmetric derivative blocks use the
// canonical (colex, non-decreasing tuple) packing from multi_index.hpp:
//   hessian entry (i<=j)    at rank canonical_rank({i,j})   -- D(D+1)/2 slots
//   third entry (i<=j<=k)   at rank canonical_rank({i,j,k}) -- D(D+1)(D+2)/6 slots
struct DerivativeBundle {
    double value = 0.0;
    std::vector<double> gradient;
    std::vector<double> hessian; // canonical upper storage
    std::vector<double> third;   // canonical storage; filled only when requested
};

struct BundleRequest {
    bool need_value = true;
    bool need_gradient = true;
    bool need_hessian = false;
    bool need_third = false;
};

namespace detail {
// Central-difference first derivatives of a scalar callable.
// Step h_i = cbrt(eps)*(1+|x_i|), the standard optimal-step choice.
template <typename F>
std::vector<double> fd_gradient_of(F&& f, std::vector<double> x) {
    constexpr double cbrt_eps = 6.055454452393343e-06; // cbrt(2^-52)
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double h = cbrt_eps * (1.0 + std::abs(x[i]));
        if (!(h > 0.0) || !std::isfinite(h)) throw StepError("finite-difference step underflow");
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(x);
        x[i] = xi - h;
        const double fm = f(x);
        x[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Central-difference second derivatives, symmetrized by construction.
// Step h_i = eps^(1/4)*(1+|x_i|).  Returns a full row-major DxD matrix.
template <typename F>
std::vector<double> fd_hessian_of(F&& f, std::vector<double> x) {
    constexpr double qrt_eps = 1.220703125e-04; // (2^-52)^(1/4)
    const std::size_t d = x.size();
    std::vector<double> h(d);
    for (std::size_t i = 0; i < d; ++i) {
        h[i] = qrt_eps * (1.0 + std::abs(x[i]));
        if (!(h[i] > 0.0) || !std::isfinite(h[i])) throw StepError("finite-difference step underflow");
    }
    std::vector<double> out(d * d);
    const double f0 = f(x);
    for (std::size_t i = 0; i < d; ++i) {
        const double xi = x[i];
        x[i] = xi + h[i];
        const double fp = f(x);
        x[i] = xi - h[i];
        const double fm = f(x);
        x[i] = xi;
        out[i * d + i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    }
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            const double xi = x[i], xj = x[j];
            x[i] = xi + h[i]; x[j] = xj + h[j];
            const double fpp = f(x);
            x[j] = xj - h[j];
            const double fpm = f(x);
            x[i] = xi - h[i]; x[j] = xj + h[j];
            const double fmp = f(x);
            x[j] = xj - h[j];
            const double fmm = f(x);
            x[i] = xi; x[j] = xj;
            const double v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            out[i * d + j] = v;
            out[j * d + i] = v;
        }
    }
    return out;
}
} // namespace detail

// Evaluatable prediction function f: R^D -> R with derivative oracles.
// Implementations are immutable after construction; every method here is pure
// and safe to call concurrently.
class PredictiveModel {
public:
    virtual ~PredictiveModel() = default;

    virtual int dim() const = 0;
    virtual double value(const std::vector<double>& x) const = 0;

    // Exact for models that override; central finite differences otherwise.
    virtual std::vector<double> gradient(const std::vector<double>& x) const {
        return detail::fd_gradient_of([this](const std::vector<double>& p) { return value(p); }, x);
    }

    // Full row-major DxD matrix, symmetric.
    virtual std::vector<double> hessian(const std::vector<double>& x) const {
        return detail::fd_hessian_of([this](const std::vector<double>& p) { return value(p); }, x);
    }

    virtual DerivativeKind derivative_kind() const { return DerivativeKind::FiniteDifference; }

    // Third derivatives (canonical packing); only models that can do this
    // exactly advertise it -- there is deliberately no FD fallback here, the
    // engine falls back to differencing whole quadrature sums instead.
    virtual bool has_third() const { return false; }
    virtual std::vector<double> third(const std::vector<double>& x) const {
        (void)x;
        throw DerivativeUnavailable("model provides no exact third derivatives");
    }

    // Single-pass evaluation used by the attribution engine's hot loops.
    // Implementations must not allocate when `out` already has the right
    // capacity; the default composes the virtuals above.
    virtual void eval_bundle(const std::vector<double>& x, const BundleRequest& req,
                             DerivativeBundle& out) const {
        const int d = dim();
        if (req.need_value) out.value = value(x);
        if (req.need_gradient) out.gradient = gradient(x);
        if (req.need_hessian) {
            const auto full = hessian(x);
            out.hessian.resize(canonical_count(d, 2));
            std::size_t r = 0;
            for (int j = 0; j < d; ++j)
                for (int i = 0; i <= j; ++i)
                    out.hessian[r++] = full[static_cast<std::size_t>(i) * d + j];
        }
        if (req.need_third) out.third = third(x);
    }
};

inline void check_dim(const PredictiveModel& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.dim())
        throw DimensionMismatch("input length does not match model dimension");
}

// fd_* entry points from the published interface; usable on any model
// regardless of its own derivative kind.
inline std::vector<double> fd_gradient(const PredictiveModel& m, const std::vector<double>& x) {
    check_dim(m, x);
    return detail::fd_gradient_of([&m](const std::vector<double>& p) { return m.value(p); }, x);
}

inline std::vector<double> fd_hessian(const PredictiveModel& m, const std::vector<double>& x) {
    check_dim(m, x);
    return detail::fd_hessian_of([&m](const std::vector<double>& p) { return m.value(p); }, x);
}

// alpha*f + beta*g.  Used by the linearity checks and handy for scaling tests.
// Non-owning: both models must outlive the combination.
class LinearCombinationModel : public PredictiveModel {
public:
    LinearCombinationModel(double alpha, const PredictiveModel& f, double beta,
                           const PredictiveModel& g)
        : alpha_(alpha), beta_(beta), f_(f), g_(g) {
        if (f.dim() != g.dim()) throw DimensionMismatch("combined models must share a dimension");
    }

    int dim() const override { return f_.dim(); }

    double value(const std::vector<double>& x) const override {
        return alpha_ * f_.value(x) + beta_ * g_.value(x);
    }

    std::vector<double> gradient(const std::vector<double>& x) const override {
        auto a = f_.gradient(x);
        const auto b = g_.gradient(x);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = alpha_ * a[i] + beta_ * b[i];
        return a;
    }

    std::vector<double> hessian(const std::vector<double>& x) const override {
        auto a = f_.hessian(x);
        const auto b = g_.hessian(x);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = alpha_ * a[i] + beta_ * b[i];
        return a;
    }

    DerivativeKind derivative_kind() const override {
        return (f_.derivative_kind() == DerivativeKind::Exact &&
                g_.derivative_kind() == DerivativeKind::Exact)
                   ? DerivativeKind::Exact
                   : DerivativeKind::FiniteDifference;
    }

    bool has_third() const override { return f_.has_third() && g_.has_third(); }

    std::vector<double> third(const std::vector<double>& x) const override {
        auto a = f_.third(x);
        const auto b = g_.third(x);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = alpha_ * a[i] + beta_ * b[i];
        return a;
    }

private:
    double alpha_, beta_;
    const PredictiveModel& f_;
    const PredictiveModel& g_;
};

} // namespace hoig
