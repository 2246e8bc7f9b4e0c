#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hoig/core/tensor_json.hpp"
#include "hoig/engine/engine.hpp"
#include "hoig/models/model_io.hpp"
#include "hoig/topology/graph_export.hpp"
#include "hoig/workbench/dataset.hpp"
#include "hoig/workbench/experiments.hpp"
#include "hoig/workbench/synthetic.hpp"

// Command-line front end.  cli_dispatch takes the arguments in natural order
// without the program name and writes to caller-supplied streams, so tests
// can drive every command in-process.  Exit codes: 0 success, 1 usage,
// 2 data problems, 3 numerical failures.

namespace hoig {

namespace detail {

// Relative --out paths land in $HOIG_OUT_DIR when it is set.
inline std::string resolve_out_path(const std::string& p) {
    if (p.empty() || p.front() == '/') return p;
    const char* base = std::getenv("HOIG_OUT_DIR");
    if (base == nullptr || *base == '\0') return p;
    return std::string(base) + "/" + p;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << text;
    if (!f) throw DataError("failed writing " + path);
}

inline void emit_text(const std::string& text, const std::string& out_path,
                      std::ostream& fallback) {
    if (out_path.empty()) {
        fallback << text;
        return;
    }
    write_text_file(resolve_out_path(out_path), text);
}

inline std::vector<double> parse_vector_literal(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        const std::string cell = trim(s.substr(pos, comma - pos));
        double v = 0.0;
        if (!parse_cell(cell, v))
            throw DataError("cannot parse '" + cell + "' as a number in '" + s + "'");
        out.push_back(v);
        pos = comma + 1;
    }
    return out;
}

inline AttributionMethod parse_method(const std::string& name) {
    if (name == "compose") return AttributionMethod::OperatorComposition;
    if (name == "hessian") return AttributionMethod::HessianFormula;
    throw std::invalid_argument("unknown method '" + name + "' (expected compose|hessian)");
}

inline std::string stack_file_text(const std::vector<AttributionTensor>& stack) {
    nlohmann::json j{{"kind", "tensor_stack"}, {"stack", stack_to_json(stack)}};
    return j.dump(2) + "\n";
}

inline std::vector<AttributionTensor> load_stack_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path + ": invalid json: " + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != "tensor_stack" || !j.contains("stack"))
        throw DataError(path + ": expected a tensor_stack file written by 'explain'");
    std::vector<AttributionTensor> stack;
    for (const auto& t : j.at("stack")) stack.push_back(tensor_from_json(t));
    if (stack.empty()) throw DataError(path + ": empty tensor stack");
    return stack;
}

inline std::string property_report_text(const PropertyReport& rep) {
    std::string out;
    char line[160];
    for (const auto& c : rep.checks) {
        std::snprintf(line, sizeof line, "[%s] %-24s defect %.3e  tolerance %.3e%s%s\n",
                      c.pass ? "PASS" : "FAIL", c.name.c_str(), c.defect, c.tolerance,
                      c.worst_index.empty() ? "" : "  worst ",
                      c.worst_index.c_str());
        out += line;
    }
    std::snprintf(line, sizeof line, "delta_f %.10g\n%s\n", rep.delta_f,
                  rep.all_pass ? "all properties hold" : "PROPERTY VIOLATIONS FOUND");
    out += line;
    return out;
}

} // namespace detail

inline int cli_dispatch(std::vector<std::string> args, std::ostream& out,
                        std::ostream& err) {
    CLI::App app{"higher-order feature attribution workbench"};
    app.name("hoig");
    app.require_subcommand(1);

    // ---- synth --------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate the benchmark dataset as CSV");
    SyntheticConfig synth_cfg;
    std::string synth_out;
    synth->add_option("--n", synth_cfg.n_samples, "number of samples")
        ->capture_default_str();
    synth->add_option("--noise", synth_cfg.noise_scale, "noise standard deviation")
        ->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "rng seed")->capture_default_str();
    synth->add_option("--out", synth_out, "output CSV path (stdout when omitted)");

    // ---- train ----------------------------------------------------------
    auto* train = app.add_subcommand("train", "fit a model to a CSV dataset");
    train->require_subcommand(1);
    std::string train_data, train_target = "y", train_out;
    auto add_train_common = [&](CLI::App* sub) {
        sub->add_option("--data", train_data, "training CSV")->required();
        sub->add_option("--target", train_target, "target column name")
            ->capture_default_str();
        sub->add_option("--out", train_out, "model JSON path (stdout when omitted)");
    };
    auto* train_gpr = train->add_subcommand("gpr", "Gaussian process regression");
    add_train_common(train_gpr);
    GprHyperParams gpr_params;
    auto* opt_ls = train_gpr->add_option("--lengthscale", gpr_params.lengthscale,
                                         "kernel lengthscale (default: median heuristic)");
    auto* opt_sv = train_gpr->add_option("--signal-var", gpr_params.signal_var,
                                         "kernel signal variance");
    auto* opt_nv = train_gpr->add_option("--noise-var", gpr_params.noise_var,
                                         "likelihood noise variance");
    auto* train_glm = train->add_subcommand("glm", "quadratic-logistic regression");
    add_train_common(train_glm);
    int glm_max_iters = 200;
    train_glm->add_option("--max-iters", glm_max_iters, "fit iteration cap")
        ->capture_default_str();

    // ---- explain --------------------------------------------------------
    auto* explain_cmd =
        app.add_subcommand("explain", "compute an attribution tensor stack");
    std::string ex_model, ex_data, ex_target = "y", ex_input_literal, ex_baseline = "zero";
    std::string ex_method = "compose", ex_out;
    int ex_input_row = -1, ex_order = 2, ex_points = 100;
    explain_cmd->add_option("--model", ex_model, "model JSON file")->required();
    explain_cmd->add_option("--data", ex_data, "CSV for --input-row / --baseline mean");
    explain_cmd->add_option("--target", ex_target, "target column of --data")
        ->capture_default_str();
    explain_cmd->add_option("--input-row", ex_input_row, "explain this row of --data");
    explain_cmd->add_option("--input", ex_input_literal,
                            "explain this comma-separated point");
    explain_cmd
        ->add_option("--baseline", ex_baseline,
                     "zero | mean | comma-separated point")
        ->capture_default_str();
    explain_cmd->add_option("--order", ex_order, "highest attribution order")
        ->capture_default_str();
    explain_cmd->add_option("--method", ex_method, "compose | hessian")
        ->capture_default_str();
    explain_cmd->add_option("--points", ex_points, "quadrature points per level")
        ->capture_default_str();
    explain_cmd->add_option("--out", ex_out, "stack JSON path (stdout when omitted)");

    // ---- verify ---------------------------------------------------------
    auto* verify_cmd =
        app.add_subcommand("verify", "audit a tensor stack against its model");
    std::string vf_model, vf_stack, vf_format = "text";
    verify_cmd->add_option("--model", vf_model, "model JSON file")->required();
    verify_cmd->add_option("--stack", vf_stack, "tensor stack written by explain")
        ->required();
    verify_cmd->add_option("--format", vf_format, "text | json")->capture_default_str();

    // ---- export-graph ---------------------------------------------------
    auto* graph_cmd =
        app.add_subcommand("export-graph", "render a stack as an interaction graph");
    std::string gr_stack, gr_format = "dot", gr_out;
    double gr_threshold = 1e-3;
    graph_cmd->add_option("--stack", gr_stack, "tensor stack written by explain")
        ->required();
    graph_cmd->add_option("--threshold", gr_threshold, "relative edge cutoff")
        ->capture_default_str();
    graph_cmd->add_option("--format", gr_format, "dot | json")->capture_default_str();
    graph_cmd->add_option("--out", gr_out, "output path (stdout when omitted)");

    // ---- experiment -----------------------------------------------------
    auto* experiment = app.add_subcommand("experiment", "run a packaged study");
    experiment->require_subcommand(1);
    auto* exp_synth =
        experiment->add_subcommand("synthetic", "structure recovery on generated data");
    SyntheticExperimentOptions syn_opt;
    std::string syn_out;
    exp_synth->add_option("--n", syn_opt.data.n_samples, "sample count")
        ->capture_default_str();
    exp_synth->add_option("--noise", syn_opt.data.noise_scale, "noise scale")
        ->capture_default_str();
    exp_synth->add_option("--seed", syn_opt.data.seed, "rng seed")->capture_default_str();
    exp_synth
        ->add_option("--points", syn_opt.quadrature.points_per_level,
                     "quadrature points per level")
        ->capture_default_str();
    exp_synth->add_option("--threshold", syn_opt.structure_threshold,
                          "edge cutoff for the recovery score")
        ->capture_default_str();
    exp_synth->add_flag("--true-poly", syn_opt.use_true_polynomial,
                        "explain the generator directly instead of fitting");
    exp_synth->add_option("--out", syn_out, "report JSON path (stdout when omitted)");

    auto* exp_real =
        experiment->add_subcommand("realestate", "per-house graphs on a housing CSV");
    RealEstateOptions re_opt;
    std::string re_data, re_target = "price", re_out, re_dot_dir;
    exp_real->add_option("--data", re_data, "housing CSV")->required();
    exp_real->add_option("--target", re_target, "target column")->capture_default_str();
    exp_real->add_option("--k", re_opt.k_houses, "houses to explain")
        ->capture_default_str();
    exp_real->add_option("--seed", re_opt.seed, "row-selection seed")
        ->capture_default_str();
    exp_real
        ->add_option("--points", re_opt.quadrature.points_per_level,
                     "quadrature points per level")
        ->capture_default_str();
    exp_real->add_option("--threshold", re_opt.graph_threshold, "graph edge cutoff")
        ->capture_default_str();
    exp_real->add_option("--out", re_out, "report JSON path (stdout when omitted)");
    exp_real->add_option("--dot-dir", re_dot_dir,
                         "also write one house_<row>.dot per explained house here");

    try {
        std::reverse(args.begin(), args.end()); // CLI11's vector overload wants reversed
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        const CLI::App* target = &app;
        while (!target->get_subcommands().empty())
            target = target->get_subcommands().front();
        out << target->help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        err << "run 'hoig --help' or 'hoig <command> --help' for usage\n";
        return 1;
    }

    try {
        if (synth->parsed()) {
            const Dataset d = generate_synthetic(synth_cfg);
            if (synth_out.empty()) {
                save_csv(d, out);
            } else {
                save_csv(d, detail::resolve_out_path(synth_out));
            }
            return 0;
        }

        if (train_gpr->parsed() || train_glm->parsed()) {
            const Dataset d = load_csv(train_data, train_target);
            nlohmann::json j;
            if (train_gpr->parsed()) {
                std::optional<GprHyperParams> params;
                if (opt_ls->count() || opt_sv->count() || opt_nv->count()) {
                    GprHyperParams p = default_gpr_params(d);
                    if (opt_ls->count()) p.lengthscale = gpr_params.lengthscale;
                    if (opt_sv->count()) p.signal_var = gpr_params.signal_var;
                    if (opt_nv->count()) p.noise_var = gpr_params.noise_var;
                    params = p;
                }
                const GprModel m = fit_gpr(d, params);
                err << "gpr fit: " << d.size() << " rows, train rmse " << m.train_rmse()
                    << "\n";
                j = model_to_json(m, d.feature_names);
            } else {
                GlmFitReport fit;
                const GlmModel m = fit_glm(d, glm_max_iters, 1e-8, &fit);
                err << "glm fit: " << d.size() << " rows, rmse " << fit.rmse << ", r2 "
                    << fit.r2 << (fit.converged ? "" : " (not converged)") << "\n";
                j = model_to_json(m, d.feature_names);
            }
            detail::emit_text(j.dump(2) + "\n", train_out, out);
            return 0;
        }

        if (explain_cmd->parsed()) {
            const LoadedModel loaded = load_model_file(ex_model);
            const int dim = loaded.model->dim();

            std::optional<Dataset> data;
            if (!ex_data.empty()) data = load_csv(ex_data, ex_target);

            std::vector<double> input;
            if (ex_input_row >= 0 && ex_input_literal.empty()) {
                if (!data) throw std::invalid_argument("--input-row needs --data");
                if (static_cast<std::size_t>(ex_input_row) >= data->size())
                    throw DataError("--input-row " + std::to_string(ex_input_row) +
                                    " out of range (" + std::to_string(data->size()) +
                                    " rows)");
                input = data->X[static_cast<std::size_t>(ex_input_row)];
            } else if (ex_input_row < 0 && !ex_input_literal.empty()) {
                input = detail::parse_vector_literal(ex_input_literal);
            } else {
                throw std::invalid_argument(
                    "give exactly one of --input-row or --input");
            }

            std::vector<double> baseline;
            if (ex_baseline == "zero") {
                baseline.assign(static_cast<std::size_t>(dim), 0.0);
            } else if (ex_baseline == "mean") {
                if (!data) throw std::invalid_argument("--baseline mean needs --data");
                baseline = dataset_mean_row(*data);
            } else {
                baseline = detail::parse_vector_literal(ex_baseline);
            }

            if (input.size() != static_cast<std::size_t>(dim))
                throw std::invalid_argument(
                    "--input has " + std::to_string(input.size()) +
                    " values but the model expects " + std::to_string(dim));
            if (baseline.size() != static_cast<std::size_t>(dim))
                throw std::invalid_argument(
                    "--baseline has " + std::to_string(baseline.size()) +
                    " values but the model expects " + std::to_string(dim));

            const ExplanationRequest req{*loaded.model,
                                         std::move(input),
                                         std::move(baseline),
                                         ex_order,
                                         QuadratureConfig{ex_points,
                                                          QuadratureRule::RightHand},
                                         detail::parse_method(ex_method),
                                         true,
                                         4,
                                         loaded.feature_names};
            const double evals = estimate_model_evals(req);
            if (evals > 1e7)
                err << "warning: about " << evals
                    << " model evaluations ahead; consider fewer --points or a lower "
                       "--order\n";
            const auto stack = explain_stack(req);
            detail::emit_text(detail::stack_file_text(stack), ex_out, out);
            return 0;
        }

        if (verify_cmd->parsed()) {
            const LoadedModel loaded = load_model_file(vf_model);
            const auto stack = detail::load_stack_file(vf_stack);
            const PropertyReport rep =
                verify_properties(stack, *loaded.model, stack.front().meta().input,
                                  stack.front().meta().baseline);
            if (vf_format == "json")
                out << property_report_to_json(rep).dump(2) << "\n";
            else
                out << detail::property_report_text(rep);
            return rep.all_pass ? 0 : 3;
        }

        if (graph_cmd->parsed()) {
            if (gr_format != "json" && gr_format != "dot")
                throw std::invalid_argument("unknown format '" + gr_format +
                                            "' (expected dot|json)");
            const auto stack = detail::load_stack_file(gr_stack);
            if (stack.size() < 2)
                throw std::invalid_argument(
                    "export-graph needs a stack of order >= 2 (run explain --order 2)");
            std::string text;
            if (stack.size() >= 3) {
                const auto complex =
                    build_simplicial(stack[0], stack[1], stack[2], gr_threshold);
                text = gr_format == "json" ? to_json(complex) : to_dot(complex);
            } else {
                const auto graph = build_graph(stack[0], stack[1], gr_threshold);
                text = gr_format == "json" ? to_json(graph) : to_dot(graph);
            }
            detail::emit_text(text, gr_out, out);
            return 0;
        }

        if (exp_synth->parsed()) {
            const SyntheticExperimentReport rep = run_synthetic_experiment(syn_opt);
            err << "structure recovery: f1 " << rep.score.f1 << ", first-order max "
                << "relative gap " << rep.first_order_max_rel_gap << "\n";
            detail::emit_text(experiment_report_to_json(rep).dump(2) + "\n", syn_out, out);
            return 0;
        }

        if (exp_real->parsed()) {
            const Dataset d = load_csv(re_data, re_target);
            const RealEstateExperimentReport rep = run_realestate_experiment(d, re_opt);
            err << "explained " << rep.houses.size() << " houses, mean pairwise "
                << "jaccard " << rep.mean_pairwise_jaccard << "\n";
            if (!re_dot_dir.empty()) {
                const std::string dir = detail::resolve_out_path(re_dot_dir);
                std::filesystem::create_directories(dir);
                for (const auto& h : rep.houses)
                    detail::write_text_file(
                        dir + "/house_" + std::to_string(h.row) + ".dot", h.dot);
            }
            detail::emit_text(experiment_report_to_json(rep).dump(2) + "\n", re_out, out);
            return 0;
        }
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 1; // no subcommand ran; require_subcommand should have caught this
}

} // namespace hoig
