#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hoig/core/attribution_tensor.hpp"
#include "hoig/core/errors.hpp"

namespace hoig {

struct GraphNode {
    int index = 0;
    std::string name;
    double signal = 0.0; // first-order attribution of the feature
};

// Undirected edge; i <= j, and i == j is a self-loop.  For distinct endpoints
// the stored signal is a_ij + a_ji = 2*a_ij; self-loops carry a_ii.  Each
// endpoint accounts for half of a distinct-pair signal, which makes
//   node_signal_i ~= self_loop_i + sum_{j != i} a_ij
// the contraction identity of the source tensors.
struct GraphEdge {
    int i = 0;
    int j = 0;
    double signal = 0.0;
};

struct InteractionGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges; // ordered by (i, j)
    double threshold = 1e-3;      // relative cutoff used to prune edges
    double truncation_residual = 0.0; // signed mass of the pruned edges
    ExplanationMeta provenance;
};

// Edge augmented with the order-3 mass aggregated onto it.
struct SimplicialEdge {
    int i = 0;
    int j = 0;
    double signal = 0.0;       // pair signal, as in GraphEdge
    double third_signal = 0.0; // order-3 attribution mass aggregated onto {i,j}
};

struct Triangle {
    int i = 0;
    int j = 0;
    int k = 0;               // i < j < k
    double signal = 0.0;     // sum of all six permutation entries = 6*a_ijk
};

struct SimplicialExplanation {
    std::vector<GraphNode> nodes;
    std::vector<SimplicialEdge> edges; // ordered by (i, j)
    std::vector<Triangle> triangles;   // ordered by (i, j, k)
    double threshold = 1e-3;
    double truncation_residual = 0.0; // signed pruned mass across both layers
    ExplanationMeta provenance;
};

namespace detail {

inline void check_graph_inputs(const AttributionTensor& first, const AttributionTensor& second,
                               double tau) {
    if (first.order() != 1 || second.order() != 2)
        throw OrderMismatch("graph construction expects tensors of orders 1 and 2");
    if (first.dim() != second.dim())
        throw DimensionMismatch("graph tensors must share a dimension");
    if (first.meta().input != second.meta().input ||
        first.meta().baseline != second.meta().baseline)
        throw std::invalid_argument("graph tensors describe different explanations");
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw std::invalid_argument("threshold must be a finite value >= 0");
}

inline std::vector<GraphNode> graph_nodes(const AttributionTensor& first) {
    std::vector<GraphNode> nodes;
    nodes.reserve(static_cast<std::size_t>(first.dim()));
    for (int i = 0; i < first.dim(); ++i)
        nodes.push_back({i, first.feature_names()[static_cast<std::size_t>(i)],
                         first.expand({i})});
    return nodes;
}

} // namespace detail

// Order-2 interaction structure: one node per feature carrying its
// first-order attribution, a self-loop wherever the diagonal entry is
// nonzero, and an undirected edge per feature pair.  Distinct-pair edges
// whose |signal| falls below tau times the largest pair signal are pruned,
// and the pruned mass is reported rather than silently lost.  Self-loops are
// part of the default picture and are never pruned by the relative cutoff.
inline InteractionGraph build_graph(const AttributionTensor& first,
                                    const AttributionTensor& second, double tau = 1e-3) {
    detail::check_graph_inputs(first, second, tau);
    const int dim = first.dim();

    InteractionGraph graph;
    graph.threshold = tau;
    graph.provenance = second.meta();
    graph.nodes = detail::graph_nodes(first);

    double scale = 0.0;
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            scale = std::max(scale, std::abs(2.0 * second.expand({i, j})));
    const double cutoff = tau * scale;

    for (int i = 0; i < dim; ++i) {
        const double self = second.expand({i, i});
        if (self != 0.0) graph.edges.push_back({i, i, self});
        for (int j = i + 1; j < dim; ++j) {
            const double signal = 2.0 * second.expand({i, j});
            if (signal == 0.0) continue; // no interaction, no edge, no lost mass
            if (std::abs(signal) < cutoff)
                graph.truncation_residual += signal;
            else
                graph.edges.push_back({i, j, signal});
        }
    }
    return graph;
}

// Order-3 extension: triangles over distinct index triples plus an edge layer
// that additionally carries the order-3 mass aggregated down onto pairs.
// Both layers are pruned against a single scale (the largest pair or triangle
// magnitude) so that noise-level triangles disappear whenever real structure
// exists anywhere.  Pruning never breaks the complex: a surviving triangle
// re-adds any pruned incident edge, since a simplicial complex must contain
// the faces of every simplex it contains.
inline SimplicialExplanation build_simplicial(const AttributionTensor& first,
                                              const AttributionTensor& second,
                                              const AttributionTensor& third,
                                              double tau = 1e-3) {
    detail::check_graph_inputs(first, second, tau);
    if (third.order() != 3) throw OrderMismatch("simplicial construction expects an order-3 tensor");
    if (third.dim() != first.dim())
        throw DimensionMismatch("graph tensors must share a dimension");
    if (third.meta().input != first.meta().input ||
        third.meta().baseline != first.meta().baseline)
        throw std::invalid_argument("graph tensors describe different explanations");
    const int dim = first.dim();

    SimplicialExplanation complex;
    complex.threshold = tau;
    complex.provenance = third.meta();
    complex.nodes = detail::graph_nodes(first);

    const AttributionTensor edge_mass = aggregate_third_to_edges(third);
    // like the pair signal, report the full undirected mass on distinct pairs
    // (the canonical tensor stores half); summed over a complete edge set this
    // reproduces the order-3 total exactly
    auto third_on = [&](int i, int j) {
        return (i == j ? 1.0 : 2.0) * edge_mass.expand({i, j});
    };

    // gather both layers' candidates, then prune against the common scale
    double scale = 0.0;
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
            scale = std::max(scale, std::abs(2.0 * second.expand({i, j})));
            for (int k = j + 1; k < dim; ++k)
                scale = std::max(scale, std::abs(6.0 * third.expand({i, j, k})));
        }
    const double cutoff = tau * scale;

    std::map<std::pair<int, int>, double> pruned_pairs; // signal of each pruned edge
    for (int i = 0; i < dim; ++i) {
        const double self = second.expand({i, i});
        if (self != 0.0)
            complex.edges.push_back({i, i, self, third_on(i, i)});
        for (int j = i + 1; j < dim; ++j) {
            const double signal = 2.0 * second.expand({i, j});
            if (signal == 0.0) continue;
            if (std::abs(signal) < cutoff) {
                complex.truncation_residual += signal;
                pruned_pairs[{i, j}] = signal;
            } else {
                complex.edges.push_back({i, j, signal, third_on(i, j)});
            }
        }
    }

    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            for (int k = j + 1; k < dim; ++k) {
                const double signal = 6.0 * third.expand({i, j, k});
                if (signal == 0.0) continue;
                if (std::abs(signal) < cutoff)
                    complex.truncation_residual += signal;
                else
                    complex.triangles.push_back({i, j, k, signal});
            }

    // downward closure: restore pruned faces of surviving triangles
    bool restored = false;
    auto ensure_edge = [&](int i, int j) {
        for (const auto& e : complex.edges)
            if (e.i == i && e.j == j) return;
        const auto pruned = pruned_pairs.find({i, j});
        const double signal = pruned == pruned_pairs.end() ? 0.0 : pruned->second;
        if (pruned != pruned_pairs.end()) {
            complex.truncation_residual -= signal; // back out of the dropped mass
            pruned_pairs.erase(pruned);
        }
        complex.edges.push_back({i, j, signal, third_on(i, j)});
        restored = true;
    };
    for (const auto& t : complex.triangles) {
        ensure_edge(t.i, t.j);
        ensure_edge(t.i, t.k);
        ensure_edge(t.j, t.k);
    }
    if (restored)
        std::sort(complex.edges.begin(), complex.edges.end(),
                  [](const SimplicialEdge& a, const SimplicialEdge& b) {
                      return a.i != b.i ? a.i < b.i : a.j < b.j;
                  });
    return complex;
}

} // namespace hoig
