#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "hoig/core/tensor_json.hpp"
#include "hoig/topology/graph.hpp"

namespace hoig {

namespace detail {

inline std::string signed3(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%+.3g", v);
    return buf;
}

inline std::string plain3(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string dot_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

// Linear width map: |signal|/max into [0.5, 5.0]; flat 0.5 when there is
// nothing to compare against.
inline double penwidth(double signal, double max_abs) {
    if (max_abs <= 0.0) return 0.5;
    return 0.5 + 4.5 * std::abs(signal) / max_abs;
}

inline void dot_preamble(std::string& out) {
    out += "graph G {\n";
    out += "  graph [layout=neato, overlap=false, outputorder=edgesfirst];\n";
    out += "  node [shape=circle, style=filled, fillcolor=\"#f2f2f2\", fontsize=11];\n";
    out += "  edge [color=\"#555555\", fontsize=9];\n";
}

inline void dot_node(std::string& out, const GraphNode& n) {
    out += "  n" + std::to_string(n.index) + " [label=\"" + dot_escape(n.name) + "\\n" +
           signed3(n.signal) + "\"];\n";
}

inline void dot_edge(std::string& out, int i, int j, double signal, double max_abs) {
    out += "  n" + std::to_string(i) + " -- n" + std::to_string(j);
    out += " [label=\"" + signed3(signal) + "\", penwidth=" + plain3(penwidth(signal, max_abs));
    if (signal < 0.0) out += ", style=dashed";
    out += "];\n";
}

} // namespace detail

// Graphviz text: one statement per node and edge, ordered by feature index,
// widths proportional to |signal|, negative interactions dashed.  The output
// is a pure function of the graph, so identical graphs give identical bytes.
inline std::string to_dot(const InteractionGraph& graph) {
    std::string out;
    detail::dot_preamble(out);
    for (const auto& n : graph.nodes) detail::dot_node(out, n);
    double max_abs = 0.0;
    for (const auto& e : graph.edges) max_abs = std::max(max_abs, std::abs(e.signal));
    for (const auto& e : graph.edges) detail::dot_edge(out, e.i, e.j, e.signal, max_abs);
    out += "}\n";
    return out;
}

// The order-3 layers have no native Graphviz form, so the DOT view renders
// the graph part and lists triangles in a comment block for human readers;
// the JSON export carries them structurally.
inline std::string to_dot(const SimplicialExplanation& complex) {
    std::string out;
    detail::dot_preamble(out);
    for (const auto& n : complex.nodes) detail::dot_node(out, n);
    double max_abs = 0.0;
    for (const auto& e : complex.edges) max_abs = std::max(max_abs, std::abs(e.signal));
    for (const auto& e : complex.edges) detail::dot_edge(out, e.i, e.j, e.signal, max_abs);
    if (!complex.triangles.empty()) {
        out += "  /* triangles:\n";
        for (const auto& t : complex.triangles) {
            out += "     (" + complex.nodes[static_cast<std::size_t>(t.i)].name + "," +
                   complex.nodes[static_cast<std::size_t>(t.j)].name + "," +
                   complex.nodes[static_cast<std::size_t>(t.k)].name + ") " +
                   detail::signed3(t.signal) + "\n";
        }
        out += "  */\n";
    }
    out += "}\n";
    return out;
}

namespace detail {

inline nlohmann::json nodes_to_json(const std::vector<GraphNode>& nodes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& n : nodes)
        arr.push_back({{"index", n.index}, {"name", n.name}, {"signal", n.signal}});
    return arr;
}

} // namespace detail

inline nlohmann::json graph_to_json(const InteractionGraph& graph) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : graph.edges)
        edges.push_back({{"i", e.i}, {"j", e.j}, {"signal", e.signal}});
    return {
        {"kind", "interaction_graph"},
        {"nodes", detail::nodes_to_json(graph.nodes)},
        {"edges", edges},
        {"threshold", graph.threshold},
        {"truncation_residual", graph.truncation_residual},
        {"provenance", meta_to_json(graph.provenance)},
        {"conventions",
         {{"edge_signal", "a_ij + a_ji for i != j; self-loops carry a_ii"},
          {"node_accounting", "edge {i,j} contributes a_ij to node i and a_ji to node j"},
          {"threshold_rule",
           "pair edges with |signal| < threshold * max|pair signal| are pruned into "
           "truncation_residual; self-loops stay whenever a_ii is nonzero"}}},
    };
}

inline nlohmann::json complex_to_json(const SimplicialExplanation& complex) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : complex.edges)
        edges.push_back({{"i", e.i},
                         {"j", e.j},
                         {"signal", e.signal},
                         {"third_signal", e.third_signal}});
    nlohmann::json triangles = nlohmann::json::array();
    for (const auto& t : complex.triangles)
        triangles.push_back({{"i", t.i}, {"j", t.j}, {"k", t.k}, {"signal", t.signal}});
    return {
        {"kind", "simplicial_explanation"},
        {"nodes", detail::nodes_to_json(complex.nodes)},
        {"edges", edges},
        {"triangles", triangles},
        {"threshold", complex.threshold},
        {"truncation_residual", complex.truncation_residual},
        {"provenance", meta_to_json(complex.provenance)},
        {"conventions",
         {{"edge_signal", "a_ij + a_ji for i != j; self-loops carry a_ii"},
          {"third_signal", "order-3 mass aggregated onto the edge"},
          {"triangle_signal", "sum of all six permutations, 6*a_ijk"},
          {"threshold_rule",
           "edges and triangles are pruned against one shared scale (the largest pair "
           "or triangle magnitude); surviving triangles restore their pruned faces"}}},
    };
}

inline std::string to_json(const InteractionGraph& graph) { return graph_to_json(graph).dump(2) + "\n"; }
inline std::string to_json(const SimplicialExplanation& complex) {
    return complex_to_json(complex).dump(2) + "\n";
}

} // namespace hoig
