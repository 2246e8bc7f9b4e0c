#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hoig/core/errors.hpp"
#include "hoig/core/multi_index.hpp"
#include "hoig/core/quadrature.hpp"

namespace hoig {

enum class AttributionMethod {
    HessianFormula,      // closed second-order double-integral formulas
    OperatorComposition, // nested quadrature of composed attribution operators
};

// Everything needed to interpret (and reproduce) one explanation.
struct ExplanationMeta {
    std::vector<double> input;    // x
    std::vector<double> baseline; // the reference point the prediction is explained against
    double delta_f = 0.0;         // f(x) - f(baseline)
    QuadratureConfig quadrature;
    AttributionMethod method = AttributionMethod::HessianFormula;
    double tolerance = 1e-8; // completeness-defect scale; must stay > 0
    // engine diagnostics: completeness defects, asymmetry residuals, node counts...
    // std::map keeps serialization deterministic.
    std::map<std::string, double> diagnostics;
};

// Order-L symmetric tensor of attribution values for one prediction.
// Storage is canonical: one value per non-decreasing index tuple, so symmetry
// is exact by construction.  Immutable after construction.
class AttributionTensor {
public:
    static AttributionTensor from_canonical(int order, int dim, std::vector<double> canonical,
                                            ExplanationMeta meta,
                                            std::vector<std::string> feature_names = {}) {
        if (order < 1) throw OrderUnderflow("tensor order must be >= 1");
        if (dim < 1) throw DimensionMismatch("tensor dim must be >= 1");
        if (canonical.size() != canonical_count(dim, order))
            throw DimensionMismatch("canonical storage length must be C(dim+order-1, order)");
        if (!meta.input.empty() && static_cast<int>(meta.input.size()) != dim)
            throw DimensionMismatch("meta.input length must equal dim");
        if (meta.input.size() != meta.baseline.size())
            throw DimensionMismatch("input and baseline must have identical length");
        if (!(meta.tolerance > 0)) throw std::invalid_argument("meta.tolerance must be > 0");
        if (feature_names.empty()) {
            feature_names.reserve(static_cast<std::size_t>(dim));
            for (int i = 0; i < dim; ++i) feature_names.push_back("x" + std::to_string(i + 1));
        }
        if (static_cast<int>(feature_names.size()) != dim)
            throw DimensionMismatch("feature_names length must equal dim");
        return AttributionTensor(order, dim, std::move(canonical), std::move(meta),
                                 std::move(feature_names));
    }

    // Build from a raw dense D^L array (row-major over ordered tuples) by
    // averaging each canonical class over its distinct permutations.  The
    // pre-average spread is recorded as diagnostics["asymmetry_residual"].
    static AttributionTensor from_dense(int order, int dim, const std::vector<double>& raw,
                                        ExplanationMeta meta,
                                        std::vector<std::string> feature_names = {});

    int order() const { return order_; }
    int dim() const { return dim_; }
    const std::vector<double>& canonical() const { return values_; }
    const ExplanationMeta& meta() const { return meta_; }
    const std::vector<std::string>& feature_names() const { return names_; }

    double at_rank(std::size_t rank) const { return values_[rank]; }

    // Value of the (symmetric) entry for any ordered index tuple.
    double expand(const IndexTuple& t) const { return values_[canonical_rank(sorted(t))]; }
    double expand(std::initializer_list<int> is) const { return expand(make_tuple(is)); }

private:
    AttributionTensor(int order, int dim, std::vector<double> values, ExplanationMeta meta,
                      std::vector<std::string> names)
        : order_(order), dim_(dim), values_(std::move(values)), meta_(std::move(meta)),
          names_(std::move(names)) {}

    int order_;
    int dim_;
    std::vector<double> values_;
    ExplanationMeta meta_;
    std::vector<std::string> names_;
};

// Sum of all D^L expanded entries; by the completeness property this tracks
// f(x) - f(baseline) up to quadrature error.
inline double total_sum(const AttributionTensor& t) {
    KahanSum s;
    for_each_canonical(t.dim(), t.order(), [&](const IndexTuple& idx) {
        s.add(static_cast<double>(multiplicity(idx)) * t.at_rank(canonical_rank(idx)));
    });
    return s.value();
}

// Marginalization: b_{i1..i(L-1)} = sum_j a_{i1..i(L-1) j}.  Recovers the
// order-(L-1) attributions up to quadrature error.
inline AttributionTensor contract_last_index(const AttributionTensor& t) {
    if (t.order() < 2) throw OrderUnderflow("cannot contract an order-1 tensor");
    const int dim = t.dim();
    const int out_order = t.order() - 1;
    std::vector<double> out(canonical_count(dim, out_order));
    for_each_canonical(dim, out_order, [&](const IndexTuple& idx) {
        KahanSum s;
        IndexTuple full = idx;
        full.len = t.order();
        for (int j = 0; j < dim; ++j) {
            full.idx[static_cast<std::size_t>(out_order)] = j;
            s.add(t.expand(full));
        }
        out[canonical_rank(idx)] = s.value();
    });
    return AttributionTensor::from_canonical(out_order, dim, std::move(out), t.meta(),
                                             t.feature_names());
}

// Collapse an order-3 tensor onto graph edges.  Conventions:
//   E_ii          = a_iii                                  (self-loops)
//   edge {i,j}    gets the full mass of every entry whose index multiset is
//                 {i,i,j} or {i,j,j} (3 permutations each), and an equal third
//                 of the mass of each fully-mixed multiset {i,j,k}.
// The result is stored as a canonical order-2 tensor, i.e. the stored e_ij for
// i<j is half of the undirected edge mass (its expansion counts (i,j) and
// (j,i) once each), which keeps total_sum exactly invariant.
inline AttributionTensor aggregate_third_to_edges(const AttributionTensor& t) {
    if (t.order() != 3) throw OrderMismatch("edge aggregation expects an order-3 tensor");
    const int dim = t.dim();
    std::vector<double> out(canonical_count(dim, 2), 0.0);
    auto rank2 = [](int i, int j) { return canonical_rank(make_tuple({i, j})); };
    for_each_canonical(dim, 3, [&](const IndexTuple& idx) {
        const int i = idx[0], j = idx[1], k = idx[2];
        const double mass = static_cast<double>(multiplicity(idx)) * t.at_rank(canonical_rank(idx));
        if (i == j && j == k) {
            out[rank2(i, i)] += mass; // a_iii, multiplicity 1
        } else if (i == j || j == k) {
            // multiset {p,p,q}: all 3 permutations belong to edge {p,q}
            const int p = j;
            const int q = (i == j) ? k : i;
            out[rank2(std::min(p, q), std::max(p, q))] += mass / 2.0;
        } else {
            // three distinct indices: split equally across the three incident edges
            out[rank2(i, j)] += mass / 6.0;
            out[rank2(i, k)] += mass / 6.0;
            out[rank2(j, k)] += mass / 6.0;
        }
    });
    return AttributionTensor::from_canonical(2, dim, std::move(out), t.meta(), t.feature_names());
}

inline std::size_t dense_count(int dim, int order) {
    std::size_t n = 1;
    for (int k = 0; k < order; ++k) n *= static_cast<std::size_t>(dim);
    return n;
}

// Max over permutations and indices of |raw[idx] - raw[perm(idx)]| for a raw
// dense order-L array.  Diagnostic for numerically computed tensors before
// canonical symmetrization.
inline double asymmetry_residual(const std::vector<double>& raw, int dim, int order) {
    if (dim < 1 || order < 1 || raw.size() != dense_count(dim, order))
        throw DimensionMismatch("raw array must hold dim^order entries");
    double residual = 0.0;
    for_each_canonical(dim, order, [&](const IndexTuple& idx) {
        double lo = raw[dense_offset(idx, dim)];
        double hi = lo;
        for_each_permutation(idx, [&](const IndexTuple& p) {
            const double v = raw[dense_offset(p, dim)];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        });
        residual = std::max(residual, hi - lo);
    });
    return residual;
}

inline AttributionTensor AttributionTensor::from_dense(int order, int dim,
                                                       const std::vector<double>& raw,
                                                       ExplanationMeta meta,
                                                       std::vector<std::string> feature_names) {
    if (raw.size() != dense_count(dim, order))
        throw DimensionMismatch("raw array must hold dim^order entries");
    meta.diagnostics["asymmetry_residual"] = asymmetry_residual(raw, dim, order);
    std::vector<double> canonical(canonical_count(dim, order));
    for_each_canonical(dim, order, [&](const IndexTuple& idx) {
        KahanSum s;
        std::size_t n = 0;
        for_each_permutation(idx, [&](const IndexTuple& p) {
            s.add(raw[dense_offset(p, dim)]);
            ++n;
        });
        canonical[canonical_rank(idx)] = s.value() / static_cast<double>(n);
    });
    return from_canonical(order, dim, std::move(canonical), std::move(meta),
                          std::move(feature_names));
}

} // namespace hoig
