#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"
#include "hoig/models/model.hpp"

namespace hoig {

struct PolyTerm {
    double coeff = 0.0;
    std::vector<int> exponents; // one nonnegative exponent per feature
};

inline double ipow(double x, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) r *= x;
    return r;
}

// Multivariate polynomial with exact closed-form derivatives of every order.
// All nonzero derivative slots are enumerated once at construction so that
// bundle evaluation in quadrature loops touches only genuinely nonzero
// entries.
class PolynomialModel : public PredictiveModel {
public:
    PolynomialModel(int dim, std::vector<PolyTerm> terms) : dim_(dim), terms_(std::move(terms)) {
        if (dim < 1) throw DimensionMismatch("polynomial dimension must be >= 1");
        for (const auto& t : terms_) {
            if (static_cast<int>(t.exponents.size()) != dim)
                throw DimensionMismatch("term exponent vector must have one entry per feature");
            for (int e : t.exponents)
                if (e < 0) throw std::invalid_argument("exponents must be nonnegative");
        }
        precompute();
    }

    // c * prod of the given (distinct) variables, e.g. product_of(8, 3.0, {0,1,2}).
    static PolynomialModel product_of(int dim, double coeff, const std::vector<int>& vars) {
        PolyTerm t;
        t.coeff = coeff;
        t.exponents.assign(static_cast<std::size_t>(dim), 0);
        for (int v : vars) t.exponents.at(static_cast<std::size_t>(v)) += 1;
        return PolynomialModel(dim, {std::move(t)});
    }

    int dim() const override { return dim_; }
    const std::vector<PolyTerm>& terms() const { return terms_; }

    // additive <=> no term touches two or more variables
    bool is_additive() const {
        for (const auto& t : terms_) {
            int touched = 0;
            for (int e : t.exponents) touched += (e > 0);
            if (touched > 1) return false;
        }
        return true;
    }

    double value(const std::vector<double>& x) const override {
        check_dim(*this, x);
        double s = 0.0;
        for (const auto& e : value_entries_) s += e.coeff * monomial(e.exps, x);
        return s;
    }

    std::vector<double> gradient(const std::vector<double>& x) const override {
        check_dim(*this, x);
        std::vector<double> g(static_cast<std::size_t>(dim_), 0.0);
        for (const auto& e : grad_entries_) g[e.slot] += e.coeff * monomial(e.exps, x);
        return g;
    }

    std::vector<double> hessian(const std::vector<double>& x) const override {
        check_dim(*this, x);
        std::vector<double> h(static_cast<std::size_t>(dim_) * static_cast<std::size_t>(dim_), 0.0);
        for (const auto& e : hess_entries_) {
            const auto t = canonical_unrank(e.slot, 2);
            const double v = e.coeff * monomial(e.exps, x);
            h[static_cast<std::size_t>(t[0]) * static_cast<std::size_t>(dim_) +
              static_cast<std::size_t>(t[1])] += v;
            if (t[0] != t[1])
                h[static_cast<std::size_t>(t[1]) * static_cast<std::size_t>(dim_) +
                  static_cast<std::size_t>(t[0])] += v;
        }
        return h;
    }

    DerivativeKind derivative_kind() const override { return DerivativeKind::Exact; }
    bool has_third() const override { return true; }

    std::vector<double> third(const std::vector<double>& x) const override {
        check_dim(*this, x);
        std::vector<double> t(canonical_count(dim_, 3), 0.0);
        for (const auto& e : third_entries_) t[e.slot] += e.coeff * monomial(e.exps, x);
        return t;
    }

    void eval_bundle(const std::vector<double>& x, const BundleRequest& req,
                     DerivativeBundle& out) const override {
        if (req.need_value) {
            out.value = 0.0;
            for (const auto& e : value_entries_) out.value += e.coeff * monomial(e.exps, x);
        }
        if (req.need_gradient) {
            out.gradient.assign(static_cast<std::size_t>(dim_), 0.0);
            for (const auto& e : grad_entries_) out.gradient[e.slot] += e.coeff * monomial(e.exps, x);
        }
        if (req.need_hessian) {
            out.hessian.assign(canonical_count(dim_, 2), 0.0);
            for (const auto& e : hess_entries_) out.hessian[e.slot] += e.coeff * monomial(e.exps, x);
        }
        if (req.need_third) {
            out.third.assign(canonical_count(dim_, 3), 0.0);
            for (const auto& e : third_entries_) out.third[e.slot] += e.coeff * monomial(e.exps, x);
        }
    }

private:
    struct Entry {
        std::size_t slot = 0;
        double coeff = 0.0;
        // (variable, exponent) pairs with exponent > 0 only
        std::vector<std::pair<int, int>> exps;
    };

    static double monomial(const std::vector<std::pair<int, int>>& exps,
                           const std::vector<double>& x) {
        double p = 1.0;
        for (const auto& [v, e] : exps) p *= ipow(x[static_cast<std::size_t>(v)], e);
        return p;
    }

    static std::vector<std::pair<int, int>> pack(const std::vector<int>& exps) {
        std::vector<std::pair<int, int>> out;
        for (std::size_t v = 0; v < exps.size(); ++v)
            if (exps[v] > 0) out.emplace_back(static_cast<int>(v), exps[v]);
        return out;
    }

    void precompute() {
        for (const auto& term : terms_) {
            if (term.coeff == 0.0) continue;
            value_entries_.push_back({0, term.coeff, pack(term.exponents)});
            for (int i = 0; i < dim_; ++i) {
                auto e1 = term.exponents;
                const double c1 = term.coeff * e1[static_cast<std::size_t>(i)];
                if (c1 == 0.0) continue;
                --e1[static_cast<std::size_t>(i)];
                grad_entries_.push_back({static_cast<std::size_t>(i), c1, pack(e1)});
                for (int j = i; j < dim_; ++j) {
                    auto e2 = e1;
                    const double c2 = c1 * e2[static_cast<std::size_t>(j)];
                    if (c2 == 0.0) continue;
                    --e2[static_cast<std::size_t>(j)];
                    hess_entries_.push_back(
                        {canonical_rank(make_tuple({i, j})), c2, pack(e2)});
                    for (int k = j; k < dim_; ++k) {
                        auto e3 = e2;
                        const double c3 = c2 * e3[static_cast<std::size_t>(k)];
                        if (c3 == 0.0) continue;
                        --e3[static_cast<std::size_t>(k)];
                        third_entries_.push_back(
                            {canonical_rank(make_tuple({i, j, k})), c3, pack(e3)});
                    }
                }
            }
        }
    }

    int dim_;
    std::vector<PolyTerm> terms_;
    std::vector<Entry> value_entries_;
    std::vector<Entry> grad_entries_;
    std::vector<Entry> hess_entries_;
    std::vector<Entry> third_entries_;
};

} // namespace hoig
