#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "hoig/core/attribution_tensor.hpp"

// JSON mapping for attribution tensors.  nlohmann/json emits shortest
// round-trip decimal for doubles, so serialize/parse is bit-exact for finite
// values; keys are stored sorted, so output is deterministic.

namespace hoig {

inline std::string to_string(QuadratureRule r) {
    return r == QuadratureRule::RightHand ? "right_hand" : "trapezoid";
}

inline QuadratureRule quadrature_rule_from_string(const std::string& s) {
    if (s == "right_hand") return QuadratureRule::RightHand;
    if (s == "trapezoid") return QuadratureRule::Trapezoid;
    throw DataError("unknown quadrature rule: " + s);
}

inline std::string to_string(AttributionMethod m) {
    return m == AttributionMethod::HessianFormula ? "hessian_formula" : "operator_composition";
}

inline AttributionMethod attribution_method_from_string(const std::string& s) {
    if (s == "hessian_formula") return AttributionMethod::HessianFormula;
    if (s == "operator_composition") return AttributionMethod::OperatorComposition;
    throw DataError("unknown attribution method: " + s);
}

inline nlohmann::json meta_to_json(const ExplanationMeta& m) {
    return nlohmann::json{
        {"input", m.input},
        {"baseline", m.baseline},
        {"delta_f", m.delta_f},
        {"quadrature",
         {{"points_per_level", m.quadrature.points_per_level}, {"rule", to_string(m.quadrature.rule)}}},
        {"method", to_string(m.method)},
        {"tolerance", m.tolerance},
        {"diagnostics", m.diagnostics},
    };
}

inline ExplanationMeta meta_from_json(const nlohmann::json& j) {
    ExplanationMeta m;
    m.input = j.at("input").get<std::vector<double>>();
    m.baseline = j.at("baseline").get<std::vector<double>>();
    m.delta_f = j.at("delta_f").get<double>();
    m.quadrature.points_per_level = j.at("quadrature").at("points_per_level").get<int>();
    m.quadrature.rule = quadrature_rule_from_string(j.at("quadrature").at("rule").get<std::string>());
    m.method = attribution_method_from_string(j.at("method").get<std::string>());
    m.tolerance = j.at("tolerance").get<double>();
    if (j.contains("diagnostics"))
        m.diagnostics = j.at("diagnostics").get<std::map<std::string, double>>();
    return m;
}

inline nlohmann::json tensor_to_json(const AttributionTensor& t) {
    return nlohmann::json{
        {"order", t.order()},
        {"dim", t.dim()},
        {"feature_names", t.feature_names()},
        {"canonical_values", t.canonical()},
        {"meta", meta_to_json(t.meta())},
    };
}

inline AttributionTensor tensor_from_json(const nlohmann::json& j) {
    return AttributionTensor::from_canonical(
        j.at("order").get<int>(), j.at("dim").get<int>(),
        j.at("canonical_values").get<std::vector<double>>(), meta_from_json(j.at("meta")),
        j.at("feature_names").get<std::vector<std::string>>());
}

} // namespace hoig
