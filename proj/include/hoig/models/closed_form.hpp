#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "hoig/core/attribution_tensor.hpp"
#include "hoig/models/polynomial.hpp"

// Exact attributions of polynomial models, used as the independent oracle for
// the quadrature engine.  Write f(baseline + d) = sum_e c_e d^e in the shifted
// monomial basis; along the straight path the shifted monomial d^e picks up
// t^|e|, so one attribution operator acts diagonally:
//     A_i (c d^e) = (e_i / |e|) c d^e        (|e| >= 1, else zero)
// and an order-L entry is the eigenvalue product
//     a_{i1..iL} = sum_e c_e (prod_l e_{il}) / |e|^L * d^e  at d = x - baseline.
// Completeness and marginalization hold exactly because sum_i e_i/|e| = 1.

namespace hoig {

namespace detail {

// Coefficients of f(baseline + d) as a polynomial in d.
inline std::map<std::vector<int>, double> shift_to_baseline(const PolynomialModel& m,
                                                            const std::vector<double>& baseline) {
    std::map<std::vector<int>, double> shifted;
    const int d = m.dim();
    for (const auto& term : m.terms()) {
        // expand prod_i (baseline_i + d_i)^{e_i} one variable at a time
        std::map<std::vector<int>, double> acc{{std::vector<int>(static_cast<std::size_t>(d), 0),
                                                term.coeff}};
        for (int i = 0; i < d; ++i) {
            const int e = term.exponents[static_cast<std::size_t>(i)];
            if (e == 0) continue;
            std::map<std::vector<int>, double> next;
            for (const auto& [exps, c] : acc) {
                for (int k = 0; k <= e; ++k) {
                    auto ek = exps;
                    ek[static_cast<std::size_t>(i)] = k;
                    next[ek] += c * static_cast<double>(binomial(static_cast<std::uint64_t>(e),
                                                                 static_cast<std::uint64_t>(k))) *
                                ipow(baseline[static_cast<std::size_t>(i)], e - k);
                }
            }
            acc = std::move(next);
        }
        for (const auto& [exps, c] : acc) shifted[exps] += c;
    }
    return shifted;
}

} // namespace detail

inline AttributionTensor closed_form_attribution(const PolynomialModel& m,
                                                 const std::vector<double>& x,
                                                 const std::vector<double>& baseline, int order) {
    check_dim(m, x);
    check_dim(m, baseline);
    if (order < 1) throw OrderUnderflow("attribution order must be >= 1");

    const int dim = m.dim();
    const auto shifted = detail::shift_to_baseline(m, baseline);

    // per shifted monomial: its total degree and its value at d = x - baseline
    struct Mono {
        std::vector<int> exps;
        double scaled_value; // c_e * d^e
        int degree;
    };
    std::vector<Mono> monos;
    for (const auto& [exps, c] : shifted) {
        int deg = 0;
        double v = c;
        for (std::size_t i = 0; i < exps.size(); ++i) {
            deg += exps[i];
            v *= ipow(x[i] - baseline[i], exps[i]);
        }
        if (deg >= 1 && c != 0.0) monos.push_back({exps, v, deg});
    }

    std::vector<double> values(canonical_count(dim, order));
    for_each_canonical(dim, order, [&](const IndexTuple& idx) {
        KahanSum s;
        for (const auto& mono : monos) {
            double eig = 1.0;
            for (int l = 0; l < order; ++l)
                eig *= static_cast<double>(mono.exps[static_cast<std::size_t>(idx[static_cast<std::size_t>(l)])]) /
                       static_cast<double>(mono.degree);
            if (eig != 0.0) s.add(eig * mono.scaled_value);
        }
        values[canonical_rank(idx)] = s.value();
    });

    ExplanationMeta meta;
    meta.input = x;
    meta.baseline = baseline;
    meta.delta_f = m.value(x) - m.value(baseline);
    meta.method = AttributionMethod::OperatorComposition;
    meta.tolerance = 1e-10 * (1.0 + std::abs(meta.delta_f));
    meta.diagnostics["closed_form"] = 1.0;
    meta.diagnostics["asymmetry_residual"] = 0.0;
    return AttributionTensor::from_canonical(order, dim, std::move(values), std::move(meta));
}

} // namespace hoig
