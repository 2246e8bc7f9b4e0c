#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hoig/core/errors.hpp"

namespace hoig {

// Column-named tabular samples.  Invariants: all values finite, names unique,
// at least one row.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> X; // N rows of length D
    std::vector<double> y;
    std::string target_name = "y";

    int dim() const { return static_cast<int>(feature_names.size()); }
    std::size_t size() const { return X.size(); }
};

struct ColumnStats {
    std::vector<double> mean;
    std::vector<double> stddev; // guarded away from zero
};

inline ColumnStats column_stats(const Dataset& d) {
    const std::size_t n = d.size();
    const std::size_t dim = static_cast<std::size_t>(d.dim());
    ColumnStats s;
    s.mean.assign(dim, 0.0);
    s.stddev.assign(dim, 0.0);
    for (const auto& row : d.X)
        for (std::size_t j = 0; j < dim; ++j) s.mean[j] += row[j];
    for (std::size_t j = 0; j < dim; ++j) s.mean[j] /= static_cast<double>(n);
    for (const auto& row : d.X)
        for (std::size_t j = 0; j < dim; ++j) {
            const double c = row[j] - s.mean[j];
            s.stddev[j] += c * c;
        }
    for (std::size_t j = 0; j < dim; ++j) {
        s.stddev[j] = std::sqrt(s.stddev[j] / static_cast<double>(n));
        if (!(s.stddev[j] > 1e-12)) s.stddev[j] = 1.0; // constant column: leave unscaled
    }
    return s;
}

inline std::vector<double> dataset_mean_row(const Dataset& d) {
    return column_stats(d).mean;
}

// Per-feature empirical quantile (nearest-rank), used for probe-point defaults.
inline std::vector<double> dataset_quantile_row(const Dataset& d, double q) {
    const std::size_t dim = static_cast<std::size_t>(d.dim());
    std::vector<double> out(dim);
    std::vector<double> col(d.size());
    for (std::size_t j = 0; j < dim; ++j) {
        for (std::size_t i = 0; i < d.size(); ++i) col[i] = d.X[i][j];
        std::sort(col.begin(), col.end());
        const auto k = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(col.size()) - 1.0,
                             std::max(0.0, std::ceil(q * static_cast<double>(col.size())) - 1.0)));
        out[j] = col[k];
    }
    return out;
}

struct CsvLoadReport {
    std::size_t rows_parsed = 0;
    std::vector<std::size_t> skipped_lines; // 1-based file line numbers
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) cells.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline bool parse_cell(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* b = cell.data();
    const char* e = b + cell.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || p != e) return false;
    return std::isfinite(out); // non-finite cells count as unparsable
}

} // namespace detail

// Parse a headered CSV.  In strict mode any bad row aborts with its line
// number; otherwise bad rows are skipped and reported.
inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        bool strict = true, CsvLoadReport* report = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.empty()) throw DataError(path + ": empty header");

    std::set<std::string> seen;
    for (const auto& h : header) {
        if (h.empty()) throw DataError(path + ": blank column name in header");
        if (!seen.insert(h).second) throw DataError(path + ": duplicate column name " + h);
    }

    const auto target_it = std::find(header.begin(), header.end(), target_column);
    if (target_it == header.end())
        throw DataError(path + ": target column '" + target_column + "' not found");
    const std::size_t target_idx = static_cast<std::size_t>(target_it - header.begin());

    Dataset d;
    d.target_name = target_column;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != target_idx) d.feature_names.push_back(header[j]);

    CsvLoadReport local;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        bool ok = cells.size() == header.size();
        std::vector<double> row;
        double target = 0.0;
        if (ok) {
            row.reserve(header.size() - 1);
            for (std::size_t j = 0; j < cells.size() && ok; ++j) {
                double v;
                ok = detail::parse_cell(cells[j], v);
                if (!ok) break;
                if (j == target_idx)
                    target = v;
                else
                    row.push_back(v);
            }
        }
        if (!ok) {
            if (strict)
                throw DataError(path + ": bad row at line " + std::to_string(line_no));
            local.skipped_lines.push_back(line_no);
            continue;
        }
        d.X.push_back(std::move(row));
        d.y.push_back(target);
    }
    local.rows_parsed = d.size();
    if (report) *report = local;
    if (d.X.empty()) throw DataError(path + ": no data rows");
    return d;
}

inline void save_csv(const Dataset& d, std::ostream& out) {
    const auto saved = out.precision(17);
    for (const auto& name : d.feature_names) out << name << ',';
    out << d.target_name << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (double v : d.X[i]) out << v << ',';
        out << d.y[i] << '\n';
    }
    out.precision(saved);
}

inline void save_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    save_csv(d, out);
    if (!out) throw DataError("failed writing " + path);
}

} // namespace hoig
