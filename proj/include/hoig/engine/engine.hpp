#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hoig/core/attribution_tensor.hpp"
#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"
#include "hoig/core/quadrature.hpp"
#include "hoig/engine/path.hpp"
#include "hoig/models/model.hpp"

namespace hoig {

// One attribution job: which model, which point against which baseline, the
// tensor order, and how the path integrals are discretized.
struct ExplanationRequest {
    const PredictiveModel& model;
    std::vector<double> input;
    std::vector<double> baseline;
    int order = 1;
    QuadratureConfig quadrature{};
    AttributionMethod method = AttributionMethod::OperatorComposition;
    // When false, any step that would fall back to finite differences throws
    // DerivativeUnavailable instead.
    bool allow_finite_differences = true;
    int order_cap = 4;
    std::vector<std::string> feature_names{};
};

namespace detail {

inline constexpr int kHardOrderCap = 4; // index tuples are fixed-capacity

inline void validate_request(const ExplanationRequest& req) {
    if (static_cast<int>(req.input.size()) != req.model.dim() ||
        static_cast<int>(req.baseline.size()) != req.model.dim())
        throw DimensionMismatch("request input/baseline length must equal model dimension");
    if (req.order < 1) throw std::invalid_argument("attribution order must be >= 1");
    if (req.order > req.order_cap || req.order > kHardOrderCap)
        throw OrderCapExceeded("attribution order " + std::to_string(req.order) +
                               " exceeds the cap of " +
                               std::to_string(std::min(req.order_cap, kHardOrderCap)));
    if (req.quadrature.points_per_level < 1 || req.quadrature.points_per_level > 1000000)
        throw std::invalid_argument("points_per_level must be in [1, 1e6]");
    if (req.method == AttributionMethod::HessianFormula && req.order > 2)
        throw std::invalid_argument("the analytic hessian formulas cover orders 1 and 2 only");
    if (!req.allow_finite_differences) {
        if (req.model.derivative_kind() == DerivativeKind::FiniteDifference)
            throw DerivativeUnavailable(
                "model exposes only finite-difference derivatives and FD is disabled");
        if (req.order >= 3 && !req.model.has_third())
            throw DerivativeUnavailable(
                "order >= 3 needs third derivatives or FD, and FD is disabled");
        if (req.order == 4)
            throw DerivativeUnavailable("order 4 always differentiates one level by FD");
    }
}

inline ExplanationMeta base_meta(const ExplanationRequest& req, AttributionMethod method) {
    ExplanationMeta meta;
    meta.input = req.input;
    meta.baseline = req.baseline;
    meta.quadrature = req.quadrature;
    meta.method = method;
    return meta;
}

// Completeness scale: the largest gradient magnitude seen along the path
// times the displacement length.  The right-hand rule's bias is O(1/M) of
// this, so 5/M of it is a safe acceptance band for every order in the cap.
inline double finish_meta(ExplanationMeta& meta, double lip_scale, std::size_t model_evals) {
    const int points = meta.quadrature.points_per_level;
    meta.tolerance = std::max(1e-8, 5.0 / static_cast<double>(points) * lip_scale);
    meta.diagnostics["lip_scale"] = lip_scale;
    meta.diagnostics["model_evals"] = static_cast<double>(model_evals);
    return meta.tolerance;
}

inline double canonical_total(int dim, int order, const std::vector<double>& canonical) {
    KahanSum s;
    std::size_t slot = 0;
    for_each_canonical(dim, order, [&](const IndexTuple& t) {
        s.add(static_cast<double>(multiplicity(t)) * canonical[slot]);
        ++slot;
    });
    return s.value();
}

inline AttributionTensor zero_tensor(const ExplanationRequest& req, AttributionMethod method) {
    ExplanationMeta meta = base_meta(req, method);
    meta.delta_f = 0.0;
    finish_meta(meta, 0.0, 0);
    meta.diagnostics["completeness_defect"] = 0.0;
    meta.diagnostics["asymmetry_residual"] = 0.0;
    std::vector<double> zeros(canonical_count(req.model.dim(), req.order), 0.0);
    return AttributionTensor::from_canonical(req.order, req.model.dim(), std::move(zeros),
                                             std::move(meta), req.feature_names);
}

// Distinct node-parameter products across quadrature levels.  Because every
// node is an integer numerator over the same denominator, products collapse
// onto far fewer distinct path points than the full tensor grid; the map
// accumulates the total quadrature weight landing on each point.
struct WeightedProducts {
    std::map<std::int64_t, double> table; // numerator product -> summed weight
    double denom = 1.0;
};

inline WeightedProducts single_level(const QuadratureNodes& nodes) {
    WeightedProducts out;
    out.denom = static_cast<double>(nodes.denom);
    for (std::size_t m = 0; m < nodes.t.size(); ++m)
        out.table[nodes.numer[m]] += nodes.w[m];
    return out;
}

inline WeightedProducts add_level(const WeightedProducts& base, const QuadratureNodes& nodes) {
    WeightedProducts out;
    out.denom = base.denom * static_cast<double>(nodes.denom);
    for (const auto& [key, weight] : base.table)
        for (std::size_t m = 0; m < nodes.t.size(); ++m)
            out.table[key * nodes.numer[m]] += weight * nodes.w[m];
    return out;
}

inline double grad_norm(const std::vector<double>& g) {
    double s = 0.0;
    for (double v : g) s += v * v;
    return std::sqrt(s);
}

inline double displacement_norm(const StraightLinePath& path) {
    double s = 0.0;
    for (double v : path.displacement()) s += v * v;
    return std::sqrt(s);
}

// Shared assembly for both second-order routes: diagonal entries carry the
// plain first-derivative moment plus the squared displacement times the
// parameter-weighted hessian moment; off-diagonals carry only the latter.
inline std::vector<double> assemble_order2(const std::vector<double>& delta,
                                           const std::vector<double>& grad_moment,
                                           const std::vector<double>& hess_moment, int dim) {
    std::vector<double> canonical(canonical_count(dim, 2));
    std::size_t slot = 0;
    for_each_canonical(dim, 2, [&](const IndexTuple& t) {
        const auto i = static_cast<std::size_t>(t.idx[0]);
        const auto j = static_cast<std::size_t>(t.idx[1]);
        canonical[slot] = i == j ? delta[i] * grad_moment[i] +
                                       delta[i] * delta[i] * hess_moment[slot]
                                 : delta[i] * delta[j] * hess_moment[slot];
        ++slot;
    });
    return canonical;
}

} // namespace detail

// a_i = (x_i - baseline_i) * sum_m w_m * d f(gamma(x, t_m)) / d x_i.
inline AttributionTensor first_order(const ExplanationRequest& req) {
    detail::validate_request(req);
    if (req.order != 1) throw std::invalid_argument("first_order computes order 1 only");

    StraightLinePath path(req.input, req.baseline);
    if (path.degenerate()) return detail::zero_tensor(req, req.method);

    const QuadratureNodes nodes = make_nodes(req.quadrature);
    const std::vector<double> delta = path.displacement();
    const auto dim = static_cast<std::size_t>(req.model.dim());

    std::vector<KahanSum> acc(dim);
    std::vector<double> point(dim);
    DerivativeBundle bundle;
    std::size_t evals = 0;
    double max_grad = 0.0;

    for (std::size_t m = 0; m < nodes.t.size(); ++m) {
        path.at(nodes.t[m], point);
        req.model.eval_bundle(point, {.need_value = false, .need_gradient = true}, bundle);
        ++evals;
        max_grad = std::max(max_grad, detail::grad_norm(bundle.gradient));
        for (std::size_t i = 0; i < dim; ++i) acc[i].add(nodes.w[m] * bundle.gradient[i]);
    }

    std::vector<double> canonical(dim);
    for (std::size_t i = 0; i < dim; ++i) canonical[i] = delta[i] * acc[i].value();

    ExplanationMeta meta = detail::base_meta(req, req.method);
    meta.delta_f = req.model.value(req.input) - req.model.value(req.baseline);
    evals += 2;
    detail::finish_meta(meta, max_grad * detail::displacement_norm(path), evals);
    meta.diagnostics["completeness_defect"] =
        std::abs(detail::canonical_total(req.model.dim(), 1, canonical) - meta.delta_f);
    meta.diagnostics["asymmetry_residual"] = 0.0;
    return AttributionTensor::from_canonical(1, req.model.dim(), std::move(canonical),
                                             std::move(meta), req.feature_names);
}

// Analytic second-order formulas over the full MxM (s,t) tensor-product grid:
//   mixed (i != j):  a_ij  = dx_i dx_j  sum_s sum_t w_s w_t st * d2f(gamma(x, st))
//   repeated (i=j):  a_ii  = dx_i sum w_s w_t d_i f(gamma(x, st))
//                        + dx_i^2 sum w_s w_t st * d2_ii f(gamma(x, st))
inline AttributionTensor second_order_hessian(const ExplanationRequest& req) {
    detail::validate_request(req);
    if (req.order != 2)
        throw std::invalid_argument("second_order_hessian computes order 2 only");

    StraightLinePath path(req.input, req.baseline);
    if (path.degenerate()) return detail::zero_tensor(req, AttributionMethod::HessianFormula);

    const QuadratureNodes nodes = make_nodes(req.quadrature);
    const std::vector<double> delta = path.displacement();
    const int dim = req.model.dim();
    const auto d = static_cast<std::size_t>(dim);

    std::vector<KahanSum> grad_acc(d);
    std::vector<KahanSum> hess_acc(canonical_count(dim, 2));
    std::vector<double> point(d);
    DerivativeBundle bundle;
    std::size_t evals = 0;
    double max_grad = 0.0;

    for (std::size_t a = 0; a < nodes.t.size(); ++a) {
        for (std::size_t b = 0; b < nodes.t.size(); ++b) {
            const double st = nodes.t[a] * nodes.t[b];
            const double w = nodes.w[a] * nodes.w[b];
            path.at(st, point);
            req.model.eval_bundle(
                point, {.need_value = false, .need_gradient = true, .need_hessian = true},
                bundle);
            ++evals;
            max_grad = std::max(max_grad, detail::grad_norm(bundle.gradient));
            for (std::size_t i = 0; i < d; ++i) grad_acc[i].add(w * bundle.gradient[i]);
            for (std::size_t slot = 0; slot < hess_acc.size(); ++slot)
                hess_acc[slot].add(w * st * bundle.hessian[slot]);
        }
    }

    std::vector<double> grad_moment(d);
    for (std::size_t i = 0; i < d; ++i) grad_moment[i] = grad_acc[i].value();
    std::vector<double> hess_moment(hess_acc.size());
    for (std::size_t s = 0; s < hess_acc.size(); ++s) hess_moment[s] = hess_acc[s].value();

    std::vector<double> canonical = detail::assemble_order2(delta, grad_moment, hess_moment, dim);

    ExplanationMeta meta = detail::base_meta(req, AttributionMethod::HessianFormula);
    meta.delta_f = req.model.value(req.input) - req.model.value(req.baseline);
    evals += 2;
    detail::finish_meta(meta, max_grad * detail::displacement_norm(path), evals);
    meta.diagnostics["completeness_defect"] =
        std::abs(detail::canonical_total(dim, 2, canonical) - meta.delta_f);
    meta.diagnostics["asymmetry_residual"] = 0.0;
    meta.diagnostics["grid_points"] = static_cast<double>(nodes.t.size() * nodes.t.size());
    return AttributionTensor::from_canonical(2, dim, std::move(canonical), std::move(meta),
                                             req.feature_names);
}

namespace detail {

// ---- operator-composition internals ---------------------------------------
//
// Stacking L attribution operators and expanding the nested path identity
// gamma(gamma(x,s),t) = gamma(x, st) flattens the recursion into moment sums
// over products of quadrature parameters pi = t_1 * ... * t_L:
//
//   order 2:  a_jk  = d_jk dx_k G1_k + dx_j dx_k M1_jk
//   order 3:  a_ijk = d_ij d_jk dx_i G1_i
//                   + (d_jk M1_ik + d_ij M1_jk + d_ik M1_jk paired with the
//                      matching displacement products)
//                   + dx_i dx_j dx_k M2_ijk
// with
//   G1_k   = sum_pi W(pi)        * d_k  f(gamma(x, pi))
//   M1_jk  = sum_pi W(pi) * pi   * d2_jk f(gamma(x, pi))
//   M2_ijk = sum_pi W(pi) * pi^2 * d3_ijk f(gamma(x, pi))
// where W(pi) collects the weight of every node combination whose parameter
// product equals pi.  The grouped form is an exact regrouping of the nested
// sums and is permutation-symmetric term by term.

struct ComposeMoments {
    std::vector<KahanSum> g1;
    std::vector<KahanSum> m1;
    std::vector<KahanSum> m2; // only sized when third derivatives are needed
    double max_grad = 0.0;
    std::size_t evals = 0;
};

inline void accumulate_moments(const PredictiveModel& model, const StraightLinePath& path,
                               double pi, double weight, bool need_third,
                               ComposeMoments& acc, std::vector<double>& point,
                               DerivativeBundle& bundle) {
    path.at(pi, point);
    model.eval_bundle(point,
                      {.need_value = false,
                       .need_gradient = true,
                       .need_hessian = true,
                       .need_third = need_third},
                      bundle);
    ++acc.evals;
    acc.max_grad = std::max(acc.max_grad, grad_norm(bundle.gradient));
    for (std::size_t i = 0; i < acc.g1.size(); ++i) acc.g1[i].add(weight * bundle.gradient[i]);
    const double wp = weight * pi;
    for (std::size_t s = 0; s < acc.m1.size(); ++s) acc.m1[s].add(wp * bundle.hessian[s]);
    if (need_third) {
        const double wp2 = wp * pi;
        for (std::size_t s = 0; s < acc.m2.size(); ++s) acc.m2[s].add(wp2 * bundle.third[s]);
    }
}

inline std::vector<double> assemble_order3(const std::vector<double>& delta,
                                           const ComposeMoments& acc, int dim) {
    std::vector<double> canonical(canonical_count(dim, 3));
    std::size_t slot = 0;
    for_each_canonical(dim, 3, [&](const IndexTuple& t) {
        const auto i = static_cast<std::size_t>(t.idx[0]);
        const auto j = static_cast<std::size_t>(t.idx[1]);
        const auto k = static_cast<std::size_t>(t.idx[2]);
        const double m2 = acc.m2[slot].value();
        double v;
        if (i == j && j == k) {
            const auto rii = canonical_rank(make_tuple({t.idx[0], t.idx[0]}));
            v = delta[i] * acc.g1[i].value() +
                3.0 * delta[i] * delta[i] * acc.m1[rii].value() +
                delta[i] * delta[i] * delta[i] * m2;
        } else if (i == j) { // i = j < k
            const auto rik = canonical_rank(make_tuple({t.idx[0], t.idx[2]}));
            v = delta[i] * delta[k] * acc.m1[rik].value() +
                delta[i] * delta[i] * delta[k] * m2;
        } else if (j == k) { // i < j = k
            const auto rij = canonical_rank(make_tuple({t.idx[0], t.idx[1]}));
            v = delta[i] * delta[j] * acc.m1[rij].value() +
                delta[i] * delta[j] * delta[j] * m2;
        } else { // all distinct
            v = delta[i] * delta[j] * delta[k] * m2;
        }
        canonical[slot] = v;
        ++slot;
    });
    return canonical;
}

// ---- generic recursive field (FD fallback and order 4) --------------------
//
// A differentiable view of z -> (A_k g)(z).  Each wrapper adds one quadrature
// level; derivatives propagate through the quadrature sum using the inner
// field's derivatives, and the deepest missing order is taken by central
// finite differences of the whole inner sum.

class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual int dim() const = 0;
    virtual double value(const std::vector<double>& z) const = 0;
    virtual std::vector<double> gradient(const std::vector<double>& z) const = 0;
    virtual std::vector<double> hessian_full(const std::vector<double>& z) const = 0;
    virtual std::vector<double> third_canonical(const std::vector<double>& z) const = 0;
};

inline constexpr double kFieldFdStep = 6.055454452393343e-06; // cbrt(eps)

class ModelField final : public ScalarField {
public:
    ModelField(const PredictiveModel& model, std::size_t& evals)
        : model_(model), evals_(evals) {}
    int dim() const override { return model_.dim(); }
    double value(const std::vector<double>& z) const override {
        ++evals_;
        return model_.value(z);
    }
    std::vector<double> gradient(const std::vector<double>& z) const override {
        ++evals_;
        return model_.gradient(z);
    }
    std::vector<double> hessian_full(const std::vector<double>& z) const override {
        ++evals_;
        return model_.hessian(z);
    }
    std::vector<double> third_canonical(const std::vector<double>& z) const override {
        if (model_.has_third()) {
            ++evals_;
            return model_.third(z);
        }
        return fd_third_of(*this, z);
    }

    // Central differences of a field's full hessian along the largest index
    // of each canonical triple.
    static std::vector<double> fd_third_of(const ScalarField& f, const std::vector<double>& z) {
        const int dim = f.dim();
        const auto d = static_cast<std::size_t>(dim);
        std::vector<double> out(canonical_count(dim, 3));
        std::vector<double> zp = z, zm = z;
        for (int m = 0; m < dim; ++m) {
            const double h = kFieldFdStep * (1.0 + std::abs(z[static_cast<std::size_t>(m)]));
            if (h == 0.0) throw StepError("finite-difference step underflowed");
            zp[static_cast<std::size_t>(m)] += h;
            zm[static_cast<std::size_t>(m)] -= h;
            const auto hess_p = f.hessian_full(zp);
            const auto hess_m = f.hessian_full(zm);
            zp[static_cast<std::size_t>(m)] = z[static_cast<std::size_t>(m)];
            zm[static_cast<std::size_t>(m)] = z[static_cast<std::size_t>(m)];
            for (int j = 0; j <= m; ++j)
                for (int i = 0; i <= j; ++i) {
                    const auto rank = canonical_rank(make_tuple({i, j, m}));
                    out[rank] = (hess_p[static_cast<std::size_t>(i) * d +
                                        static_cast<std::size_t>(j)] -
                                 hess_m[static_cast<std::size_t>(i) * d +
                                        static_cast<std::size_t>(j)]) /
                                (2.0 * h);
                }
        }
        return out;
    }

private:
    const PredictiveModel& model_;
    std::size_t& evals_;
};

class AttributedField final : public ScalarField {
public:
    AttributedField(const ScalarField& inner, int k, const std::vector<double>& baseline,
                    const QuadratureNodes& nodes)
        : inner_(inner), k_(static_cast<std::size_t>(k)), baseline_(baseline), nodes_(nodes) {}

    int dim() const override { return inner_.dim(); }

    double value(const std::vector<double>& z) const override {
        KahanSum s;
        std::vector<double> p(z.size());
        for (std::size_t m = 0; m < nodes_.t.size(); ++m) {
            move_toward_baseline(z, nodes_.t[m], p);
            s.add(nodes_.w[m] * inner_.gradient(p)[k_]);
        }
        return (z[k_] - baseline_[k_]) * s.value();
    }

    std::vector<double> gradient(const std::vector<double>& z) const override {
        const auto d = static_cast<std::size_t>(dim());
        KahanSum plain; // sum w * d_k g
        std::vector<KahanSum> weighted(d); // sum w * t * d2_ik g
        std::vector<double> p(d);
        for (std::size_t m = 0; m < nodes_.t.size(); ++m) {
            move_toward_baseline(z, nodes_.t[m], p);
            plain.add(nodes_.w[m] * inner_.gradient(p)[k_]);
            const auto hess = inner_.hessian_full(p);
            const double wt = nodes_.w[m] * nodes_.t[m];
            for (std::size_t i = 0; i < d; ++i) weighted[i].add(wt * hess[i * d + k_]);
        }
        std::vector<double> g(d);
        const double dz = z[k_] - baseline_[k_];
        for (std::size_t i = 0; i < d; ++i) g[i] = dz * weighted[i].value();
        g[k_] += plain.value();
        return g;
    }

    std::vector<double> hessian_full(const std::vector<double>& z) const override {
        const auto d = static_cast<std::size_t>(dim());
        std::vector<KahanSum> first_mom(d);            // sum w * t * d2_ik g
        std::vector<KahanSum> third_mom(d * d);        // sum w * t^2 * d3_ijk g
        std::vector<double> p(d);
        for (std::size_t m = 0; m < nodes_.t.size(); ++m) {
            move_toward_baseline(z, nodes_.t[m], p);
            const auto hess = inner_.hessian_full(p);
            const auto third = inner_.third_canonical(p);
            const double wt = nodes_.w[m] * nodes_.t[m];
            const double wt2 = wt * nodes_.t[m];
            for (std::size_t i = 0; i < d; ++i) first_mom[i].add(wt * hess[i * d + k_]);
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t i = 0; i <= j; ++i) {
                    const auto rank = canonical_rank(sorted(make_tuple(
                        {static_cast<int>(i), static_cast<int>(j), static_cast<int>(k_)})));
                    third_mom[i * d + j].add(wt2 * third[rank]);
                }
        }
        std::vector<double> out(d * d, 0.0);
        const double dz = z[k_] - baseline_[k_];
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i <= j; ++i) {
                double v = dz * third_mom[i * d + j].value();
                if (i == k_) v += first_mom[j].value();
                if (j == k_) v += first_mom[i].value();
                out[i * d + j] = out[j * d + i] = v;
            }
        return out;
    }

    std::vector<double> third_canonical(const std::vector<double>& z) const override {
        return ModelField::fd_third_of(*this, z);
    }

private:
    void move_toward_baseline(const std::vector<double>& z, double t,
                              std::vector<double>& out) const {
        for (std::size_t i = 0; i < z.size(); ++i)
            out[i] = t * z[i] + (1.0 - t) * baseline_[i];
    }

    const ScalarField& inner_;
    std::size_t k_;
    const std::vector<double>& baseline_;
    const QuadratureNodes& nodes_;
};

// Dense tensor via one top-level gradient sweep per ordered index suffix;
// the raw result is symmetrized afterwards and its spread recorded.
inline AttributionTensor compose_generic(const ExplanationRequest& req,
                                         const StraightLinePath& path,
                                         const QuadratureNodes& nodes) {
    const int dim = req.model.dim();
    const auto d = static_cast<std::size_t>(dim);
    const int order = req.order;
    const std::vector<double> delta = path.displacement();

    std::size_t evals = 0;
    ModelField base(req.model, evals);

    std::vector<double> raw(dense_count(dim, order), 0.0);
    std::vector<int> suffix(static_cast<std::size_t>(order - 1), 0);
    std::vector<double> point(d);

    bool done = false;
    while (!done) {
        // chain: innermost operator acts on the model, outer ones stack on top
        std::vector<std::unique_ptr<ScalarField>> chain;
        const ScalarField* top = &base;
        for (auto it = suffix.rbegin(); it != suffix.rend(); ++it) {
            chain.push_back(
                std::make_unique<AttributedField>(*top, *it, path.baseline(), nodes));
            top = chain.back().get();
        }

        std::vector<KahanSum> acc(d);
        for (std::size_t m = 0; m < nodes.t.size(); ++m) {
            path.at(nodes.t[m], point);
            const auto g = top->gradient(point);
            for (std::size_t i = 0; i < d; ++i) acc[i].add(nodes.w[m] * g[i]);
        }

        IndexTuple t;
        t.len = order;
        for (int pos = 1; pos < order; ++pos)
            t.idx[pos] = suffix[static_cast<std::size_t>(pos - 1)];
        for (int i1 = 0; i1 < dim; ++i1) {
            t.idx[0] = i1;
            raw[dense_offset(t, dim)] =
                delta[static_cast<std::size_t>(i1)] * acc[static_cast<std::size_t>(i1)].value();
        }

        // odometer over the ordered suffixes
        done = true;
        for (std::size_t posn = suffix.size(); posn-- > 0;) {
            if (++suffix[posn] < dim) {
                done = false;
                break;
            }
            suffix[posn] = 0;
        }
    }

    // completeness scale from a plain first-level gradient pass
    double max_grad = 0.0;
    DerivativeBundle bundle;
    for (std::size_t m = 0; m < nodes.t.size(); ++m) {
        path.at(nodes.t[m], point);
        req.model.eval_bundle(point, {.need_value = false, .need_gradient = true}, bundle);
        ++evals;
        max_grad = std::max(max_grad, grad_norm(bundle.gradient));
    }

    ExplanationMeta meta = base_meta(req, AttributionMethod::OperatorComposition);
    meta.delta_f = req.model.value(req.input) - req.model.value(req.baseline);
    evals += 2;
    finish_meta(meta, max_grad * displacement_norm(path), evals);
    auto tensor = AttributionTensor::from_dense(order, dim, raw, std::move(meta),
                                                req.feature_names);
    // from_dense recorded the asymmetry; completeness defect comes last
    ExplanationMeta enriched = tensor.meta();
    enriched.diagnostics["completeness_defect"] =
        std::abs(total_sum(tensor) - enriched.delta_f);
    return AttributionTensor::from_canonical(order, dim,
                                             std::vector<double>(tensor.canonical()),
                                             std::move(enriched), tensor.feature_names());
}

} // namespace detail

// Stacked attribution operators a_{i1..iL} = A_{i1} ... A_{iL} f evaluated at
// the request input.  Models with exact derivatives up to the needed depth go
// through the flattened moment sums over distinct path points; everything
// else (and order 4, which exceeds every model's analytic depth) walks the
// recursion with finite differences of the deepest quadrature sums.
inline AttributionTensor compose_order(const ExplanationRequest& req) {
    detail::validate_request(req);
    if (req.order < 2)
        throw std::invalid_argument("compose_order handles orders 2 and above; "
                                    "use first_order for order 1");

    StraightLinePath path(req.input, req.baseline);
    if (path.degenerate())
        return detail::zero_tensor(req, AttributionMethod::OperatorComposition);

    const QuadratureNodes nodes = make_nodes(req.quadrature);
    const int dim = req.model.dim();
    const bool streaming = req.order == 2 || (req.order == 3 && req.model.has_third());
    if (!streaming) return detail::compose_generic(req, path, nodes);

    const std::vector<double> delta = path.displacement();
    detail::ComposeMoments acc;
    acc.g1.resize(static_cast<std::size_t>(dim));
    acc.m1.resize(canonical_count(dim, 2));
    const bool need_third = req.order == 3;
    if (need_third) acc.m2.resize(canonical_count(dim, 3));

    std::vector<double> point(static_cast<std::size_t>(dim));
    DerivativeBundle bundle;
    const detail::WeightedProducts level1 = detail::single_level(nodes);
    const detail::WeightedProducts level2 = detail::add_level(level1, nodes);
    double distinct_points;

    if (!need_third) {
        for (const auto& [key, weight] : level2.table)
            detail::accumulate_moments(req.model, path,
                                       static_cast<double>(key) / level2.denom, weight,
                                       false, acc, point, bundle);
        distinct_points = static_cast<double>(level2.table.size());
    } else if (nodes.denom <= 300) {
        const detail::WeightedProducts level3 = detail::add_level(level2, nodes);
        for (const auto& [key, weight] : level3.table)
            detail::accumulate_moments(req.model, path,
                                       static_cast<double>(key) / level3.denom, weight,
                                       true, acc, point, bundle);
        distinct_points = static_cast<double>(level3.table.size());
    } else {
        // Large M: a third dedup table would dwarf the evaluation savings, so
        // stream the outer level against the two-level table instead.
        const double denom3 = level2.denom * static_cast<double>(nodes.denom);
        for (std::size_t m = 0; m < nodes.t.size(); ++m)
            for (const auto& [key, weight] : level2.table)
                detail::accumulate_moments(
                    req.model, path,
                    static_cast<double>(key * nodes.numer[m]) / denom3,
                    weight * nodes.w[m], true, acc, point, bundle);
        distinct_points = static_cast<double>(nodes.t.size() * level2.table.size());
    }

    std::vector<double> canonical;
    if (req.order == 2) {
        std::vector<double> g1(acc.g1.size());
        for (std::size_t i = 0; i < g1.size(); ++i) g1[i] = acc.g1[i].value();
        std::vector<double> m1(acc.m1.size());
        for (std::size_t s = 0; s < m1.size(); ++s) m1[s] = acc.m1[s].value();
        canonical = detail::assemble_order2(delta, g1, m1, dim);
    } else {
        canonical = detail::assemble_order3(delta, acc, dim);
    }

    ExplanationMeta meta = detail::base_meta(req, AttributionMethod::OperatorComposition);
    meta.delta_f = req.model.value(req.input) - req.model.value(req.baseline);
    acc.evals += 2;
    detail::finish_meta(meta, acc.max_grad * detail::displacement_norm(path), acc.evals);
    meta.diagnostics["completeness_defect"] =
        std::abs(detail::canonical_total(dim, req.order, canonical) - meta.delta_f);
    meta.diagnostics["asymmetry_residual"] = 0.0; // grouped form is symmetric term by term
    meta.diagnostics["distinct_path_points"] = distinct_points;
    return AttributionTensor::from_canonical(req.order, dim, std::move(canonical),
                                             std::move(meta), req.feature_names);
}

// Route a request to the matching computation.
inline AttributionTensor explain(const ExplanationRequest& req) {
    detail::validate_request(req);
    if (req.order == 1) return first_order(req);
    if (req.method == AttributionMethod::HessianFormula) return second_order_hessian(req);
    return compose_order(req);
}

// All orders 1..req.order, cheapest first.  The hessian-formula method caps
// at order 2; composition covers the rest.
inline std::vector<AttributionTensor> explain_stack(const ExplanationRequest& req) {
    detail::validate_request(req);
    std::vector<AttributionTensor> stack;
    stack.reserve(static_cast<std::size_t>(req.order));
    for (int level = 1; level <= req.order; ++level) {
        ExplanationRequest sub{req.model,      req.input,
                               req.baseline,   level,
                               req.quadrature, req.method,
                               req.allow_finite_differences, req.order_cap,
                               req.feature_names};
        stack.push_back(explain(sub));
    }
    return stack;
}

// Upper bound on model evaluations before any shared-path dedup, for cost
// warnings.  The streaming paths usually do far fewer.
inline double estimate_model_evals(const ExplanationRequest& req) {
    if (req.input == req.baseline) return 0.0;
    const auto m = static_cast<double>(req.quadrature.points_per_level);
    const auto dim = static_cast<double>(req.model.dim());
    if (req.order == 1) return m + 2.0;
    if (req.order == 2) return m * m + 2.0;
    if (req.order == 3 && req.model.has_third()) return m * m * m + 2.0;
    // generic recursion: D^(L-1) suffixes, M^(L-1) nested nodes, one FD layer
    return std::pow(dim * m, req.order - 1) * 2.0 * dim * m;
}

struct LinearityReport {
    int order = 1;
    double max_defect = 0.0;
    double scale = 1.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Attribution is linear in the model: explaining alpha*f + beta*g must match
// the same combination of the individual explanations entrywise.
inline LinearityReport linearity_check(const PredictiveModel& model_a,
                                       const PredictiveModel& model_b, double alpha,
                                       double beta, const ExplanationRequest& proto) {
    LinearCombinationModel combo(alpha, model_a, beta, model_b);
    const auto run = [&](const PredictiveModel& m) {
        ExplanationRequest r{m,
                             proto.input,
                             proto.baseline,
                             proto.order,
                             proto.quadrature,
                             proto.method,
                             proto.allow_finite_differences,
                             proto.order_cap,
                             proto.feature_names};
        return explain(r);
    };
    const AttributionTensor ta = run(model_a);
    const AttributionTensor tb = run(model_b);
    const AttributionTensor tc = run(combo);

    LinearityReport report;
    report.order = proto.order;
    for (std::size_t r = 0; r < tc.canonical().size(); ++r) {
        const double combined = alpha * ta.at_rank(r) + beta * tb.at_rank(r);
        report.max_defect = std::max(report.max_defect, std::abs(tc.at_rank(r) - combined));
        report.scale = std::max(report.scale, std::abs(tc.at_rank(r)));
    }
    report.tolerance = 1e-10 * report.scale;
    report.pass = report.max_defect <= report.tolerance;
    return report;
}

struct PropertyCheck {
    std::string name;
    double defect = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string worst_index; // feature names of the worst entry, when located
};

struct PropertyReport {
    std::vector<PropertyCheck> checks;
    bool all_pass = true;
    double delta_f = 0.0;
};

namespace detail {

inline std::string tuple_label(const IndexTuple& t, const std::vector<std::string>& names) {
    std::string out = "(";
    for (int p = 0; p < t.len; ++p) {
        if (p) out += ",";
        out += names[static_cast<std::size_t>(t.idx[p])];
    }
    out += ")";
    return out;
}

} // namespace detail

// Cross-order consistency audit of a tensor stack: completeness per order,
// adjacent-order marginalization, and stored symmetry residuals, each graded
// against the quadrature-derived tolerance in the tensors' own metadata.
inline PropertyReport verify_properties(const std::vector<AttributionTensor>& stack,
                                        const PredictiveModel& model,
                                        const std::vector<double>& input,
                                        const std::vector<double>& baseline) {
    if (stack.empty()) throw std::invalid_argument("verify_properties needs tensors");
    for (std::size_t level = 0; level < stack.size(); ++level) {
        if (stack[level].order() != static_cast<int>(level) + 1)
            throw std::invalid_argument("tensor stack must hold orders 1..L in order");
        if (stack[level].dim() != model.dim())
            throw DimensionMismatch("tensor stack dimension does not match the model");
        if (stack[level].meta().input != input || stack[level].meta().baseline != baseline)
            throw std::invalid_argument("tensor stack was computed for different points");
    }

    PropertyReport report;
    report.delta_f = model.value(input) - model.value(baseline);

    for (const auto& tensor : stack) {
        PropertyCheck check;
        check.name = "completeness[" + std::to_string(tensor.order()) + "]";
        check.defect = std::abs(total_sum(tensor) - report.delta_f);
        check.tolerance = tensor.meta().tolerance;
        check.pass = check.defect <= check.tolerance;
        report.checks.push_back(std::move(check));
    }

    for (std::size_t level = 1; level < stack.size(); ++level) {
        const AttributionTensor contracted = contract_last_index(stack[level]);
        const AttributionTensor& lower = stack[level - 1];
        PropertyCheck check;
        check.name = "marginalization[" + std::to_string(level + 1) + "->" +
                     std::to_string(level) + "]";
        std::size_t worst_rank = 0;
        for (std::size_t r = 0; r < lower.canonical().size(); ++r) {
            const double diff = std::abs(contracted.at_rank(r) - lower.at_rank(r));
            if (diff > check.defect) {
                check.defect = diff;
                worst_rank = r;
            }
        }
        check.tolerance =
            2.0 * std::max(stack[level].meta().tolerance, lower.meta().tolerance);
        check.pass = check.defect <= check.tolerance;
        check.worst_index = detail::tuple_label(
            canonical_unrank(worst_rank, lower.order()), lower.feature_names());
        report.checks.push_back(std::move(check));
    }

    for (const auto& tensor : stack) {
        PropertyCheck check;
        check.name = "symmetry[" + std::to_string(tensor.order()) + "]";
        const auto it = tensor.meta().diagnostics.find("asymmetry_residual");
        check.defect = it == tensor.meta().diagnostics.end() ? 0.0 : it->second;
        check.tolerance = tensor.meta().tolerance;
        check.pass = check.defect <= check.tolerance;
        report.checks.push_back(std::move(check));
    }

    for (const auto& check : report.checks) report.all_pass = report.all_pass && check.pass;
    return report;
}

} // namespace hoig
