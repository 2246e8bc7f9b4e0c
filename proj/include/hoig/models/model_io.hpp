#pragma once

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hoig/core/errors.hpp"
#include "hoig/models/glm.hpp"
#include "hoig/models/gpr.hpp"
#include "hoig/models/polynomial.hpp"

namespace hoig {

// Model files carry a "kind" discriminator plus the feature names the model
// was trained against, so explanation runs can label outputs without the
// original dataset at hand.

inline nlohmann::json model_to_json(const PolynomialModel& m,
                                    const std::vector<std::string>& feature_names) {
    nlohmann::json j;
    j["kind"] = "polynomial";
    j["feature_names"] = feature_names;
    j["dim"] = m.dim();
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : m.terms())
        terms.push_back({{"coeff", t.coeff}, {"exponents", t.exponents}});
    j["terms"] = std::move(terms);
    return j;
}

inline nlohmann::json model_to_json(const GprModel& m,
                                    const std::vector<std::string>& feature_names) {
    nlohmann::json j;
    j["kind"] = "gpr";
    j["feature_names"] = feature_names;
    j["lengthscale"] = m.hyperparams().lengthscale;
    j["signal_var"] = m.hyperparams().signal_var;
    j["noise_var"] = m.hyperparams().noise_var;
    j["train_rmse"] = m.train_rmse();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.training_inputs().rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < m.training_inputs().cols(); ++k)
            row.push_back(m.training_inputs()(i, k));
        rows.push_back(std::move(row));
    }
    j["train_inputs"] = std::move(rows);
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.weights().size(); ++i) w.push_back(m.weights()[i]);
    j["weights"] = std::move(w);
    return j;
}

inline nlohmann::json model_to_json(const GlmModel& m,
                                    const std::vector<std::string>& feature_names) {
    nlohmann::json j;
    j["kind"] = "glm";
    j["feature_names"] = feature_names;
    j["input_mean"] = m.input_mean();
    j["input_stddev"] = m.input_stddev();
    j["target_lo"] = m.target_lo();
    j["target_hi"] = m.target_hi();
    j["intercept"] = m.intercept();
    nlohmann::json lin = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.linear_coeffs().size(); ++i)
        lin.push_back(m.linear_coeffs()[i]);
    j["linear"] = std::move(lin);
    nlohmann::json quad = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.quadratic_form().rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.quadratic_form().cols(); ++c)
            row.push_back(m.quadratic_form()(r, c));
        quad.push_back(std::move(row));
    }
    j["quadratic"] = std::move(quad);
    return j;
}

struct LoadedModel {
    std::string kind;
    std::vector<std::string> feature_names;
    std::unique_ptr<PredictiveModel> model;
};

namespace detail {

template <typename T>
T json_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw DataError(std::string("model json missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model json field '") + key + "' malformed: " + e.what());
    }
}

} // namespace detail

inline LoadedModel model_from_json(const nlohmann::json& j) {
    LoadedModel out;
    out.kind = detail::json_field<std::string>(j, "kind");
    out.feature_names = detail::json_field<std::vector<std::string>>(j, "feature_names");

    if (out.kind == "polynomial") {
        const int dim = detail::json_field<int>(j, "dim");
        std::vector<PolyTerm> terms;
        for (const auto& t : detail::json_field<nlohmann::json>(j, "terms"))
            terms.push_back({detail::json_field<double>(t, "coeff"),
                             detail::json_field<std::vector<int>>(t, "exponents")});
        out.model = std::make_unique<PolynomialModel>(dim, std::move(terms));
    } else if (out.kind == "gpr") {
        GprHyperParams hp;
        hp.lengthscale = detail::json_field<double>(j, "lengthscale");
        hp.signal_var = detail::json_field<double>(j, "signal_var");
        hp.noise_var = detail::json_field<double>(j, "noise_var");
        const auto rows =
            detail::json_field<std::vector<std::vector<double>>>(j, "train_inputs");
        const auto weights = detail::json_field<std::vector<double>>(j, "weights");
        if (rows.empty()) throw DataError("gpr model json has no training rows");
        if (rows.size() != weights.size())
            throw DataError("gpr model json weights do not match training rows");
        GprModel::RowMatrix X(static_cast<Eigen::Index>(rows.size()),
                              static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size())
                throw DataError("gpr model json has ragged training rows");
            for (std::size_t k = 0; k < rows[i].size(); ++k)
                X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
        Eigen::VectorXd alpha(static_cast<Eigen::Index>(weights.size()));
        for (std::size_t i = 0; i < weights.size(); ++i)
            alpha[static_cast<Eigen::Index>(i)] = weights[i];
        const double rmse = j.contains("train_rmse") ? j.at("train_rmse").get<double>() : 0.0;
        out.model = std::make_unique<GprModel>(std::move(X), std::move(alpha), hp, rmse);
    } else if (out.kind == "glm") {
        const auto mean = detail::json_field<std::vector<double>>(j, "input_mean");
        const auto stddev = detail::json_field<std::vector<double>>(j, "input_stddev");
        const auto lin = detail::json_field<std::vector<double>>(j, "linear");
        const auto quad = detail::json_field<std::vector<std::vector<double>>>(j, "quadratic");
        const auto dim = static_cast<Eigen::Index>(mean.size());
        Eigen::VectorXd b(dim);
        for (Eigen::Index i = 0; i < dim; ++i) b[i] = lin[static_cast<std::size_t>(i)];
        Eigen::MatrixXd Q(dim, dim);
        if (static_cast<Eigen::Index>(quad.size()) != dim)
            throw DataError("glm model json quadratic block has wrong shape");
        for (Eigen::Index r = 0; r < dim; ++r) {
            if (static_cast<Eigen::Index>(quad[static_cast<std::size_t>(r)].size()) != dim)
                throw DataError("glm model json quadratic block has wrong shape");
            for (Eigen::Index c = 0; c < dim; ++c)
                Q(r, c) = quad[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
        out.model = std::make_unique<GlmModel>(
            mean, stddev, detail::json_field<double>(j, "target_lo"),
            detail::json_field<double>(j, "target_hi"),
            detail::json_field<double>(j, "intercept"), std::move(b), std::move(Q));
    } else {
        throw DataError("unknown model kind '" + out.kind + "'");
    }

    if (!out.feature_names.empty() &&
        static_cast<int>(out.feature_names.size()) != out.model->dim())
        throw DataError("model json feature_names do not match model dimension");
    return out;
}

inline void save_model_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("failed writing " + path);
}

inline nlohmann::json load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid json: " + e.what());
    }
}

inline LoadedModel load_model_file(const std::string& path) {
    return model_from_json(load_model_json(path));
}

} // namespace hoig
