#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "ganlab/errors.hpp"
#include "ganlab/evaluation.hpp"
#include "ganlab/knn.hpp"
#include "ganlab/pointset.hpp"

namespace ganlab {

/// Shortest decimal form that parses back to the exact same double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& token) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw IoError("csv: cannot parse number '" + token + "'");
    return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::ofstream open_out(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

}  // namespace detail

/// PointSet file format: CSV with header x0,...,x{d-1}; block layout and
/// scales travel in a <path>.meta.json sidecar (defaults apply without one).
inline void save_pointset_csv(const PointSet& set, const std::string& path) {
    set.validate();
    std::ofstream out = detail::open_out(path);
    for (std::size_t i = 0; i < set.dim(); ++i) out << (i ? "," : "") << "x" << i;
    out << "\n";
    for (std::size_t r = 0; r < set.size(); ++r) {
        const double* row = set.points.row(r);
        for (std::size_t i = 0; i < set.dim(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
    out.close();

    const bool default_layout = set.blocks.size() == 1 && set.block_scales.empty();
    if (!default_layout) {
        nlohmann::json meta;
        meta["block_layout"] = nlohmann::json::array();
        for (const auto& b : set.blocks) meta["block_layout"].push_back({b.offset, b.width});
        if (!set.block_scales.empty()) meta["block_scales"] = set.block_scales;
        std::ofstream mout = detail::open_out(path + ".meta.json");
        mout << meta.dump(2) << "\n";
    }
}

inline PointSet load_pointset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open point set: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty point set file: " + path);
    const std::size_t dim = detail::split_csv_line(line).size();
    if (dim == 0) throw IoError("point set has no columns: " + path);

    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != dim)
            throw IoError("point set row " + std::to_string(rows + 1) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(dim) + ": " + path);
        for (const auto& c : cells) values.push_back(parse_double(c));
        ++rows;
    }

    PointSet set;
    set.points = Matrix(rows, dim);
    std::copy(values.begin(), values.end(), set.points.data());
    set.blocks = {Block{0, dim}};

    const std::string meta_path = path + ".meta.json";
    if (std::filesystem::exists(meta_path)) {
        std::ifstream min(meta_path);
        nlohmann::json meta;
        try {
            min >> meta;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("cannot parse " + meta_path + ": " + e.what());
        }
        if (meta.contains("block_layout")) {
            set.blocks.clear();
            for (const auto& b : meta["block_layout"])
                set.blocks.push_back({b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>()});
        }
        if (meta.contains("block_scales") && !meta["block_scales"].is_null())
            set.block_scales = meta["block_scales"].get<std::vector<double>>();
    }
    set.validate();
    return set;
}

/// DistanceMatrix as CSV: one row per query, columns j1..jk.
inline void save_distance_matrix_csv(const DistanceMatrix& m, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    for (std::size_t j = 1; j <= m.k(); ++j) out << (j > 1 ? "," : "") << "j" << j;
    out << "\n";
    for (std::size_t i = 0; i < m.queries(); ++i) {
        for (std::size_t j = 0; j < m.k(); ++j)
            out << (j ? "," : "") << format_double(m.entries(i, j));
        out << "\n";
    }
}

/// Pairwise significance codes (+1/0/-1), row method vs column method.
inline void save_comparison_csv(const ComparisonMatrix& m, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "method";
    for (const auto& l : m.labels) out << "," << l;
    out << "\n";
    for (std::size_t a = 0; a < m.methods(); ++a) {
        out << m.labels[a];
        for (std::size_t b = 0; b < m.methods(); ++b) out << "," << m.codes[a][b];
        out << "\n";
    }
}

/// Tallies over runs, cell format plus/zero/minus.
inline void save_tally_csv(const ComparisonMatrix& m, const std::string& path) {
    std::ofstream out = detail::open_out(path);
    out << "method";
    for (const auto& l : m.labels) out << "," << l;
    out << "\n";
    for (std::size_t a = 0; a < m.methods(); ++a) {
        out << m.labels[a];
        for (std::size_t b = 0; b < m.methods(); ++b) {
            const auto& t = m.tallies[a][b];
            out << "," << t.plus << "/" << t.zero << "/" << t.minus;
        }
        out << "\n";
    }
}

struct CurveRow {
    std::string method;
    std::size_t j = 0;
    double value = 0.0;
};

/// Long-format curve table: method,j,dhat. `curves[i]` holds j=1..k for
/// labels[i].
inline void save_curves_csv(const std::vector<std::string>& labels,
                            const std::vector<std::vector<double>>& curves,
                            const std::string& path) {
    if (labels.size() != curves.size())
        throw ContractError("save_curves_csv: label/curve count mismatch");
    std::ofstream out = detail::open_out(path);
    out << "method,j,dhat\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < curves[i].size(); ++j)
            out << labels[i] << "," << (j + 1) << "," << format_double(curves[i][j]) << "\n";
}

inline std::vector<CurveRow> load_curves_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open curve table: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty curve table: " + path);
    std::vector<CurveRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != 3) throw IoError("curve table row needs 3 cells: " + path);
        rows.push_back({cells[0], static_cast<std::size_t>(std::stoull(cells[1])),
                        parse_double(cells[2])});
    }
    return rows;
}

inline DistanceMatrix load_distance_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open distance matrix: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty distance matrix file: " + path);
    const std::size_t k = detail::split_csv_line(line).size();
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != k)
            throw IoError("distance matrix row width mismatch in " + path);
        for (const auto& c : cells) values.push_back(parse_double(c));
        ++rows;
    }
    DistanceMatrix m;
    m.entries = Matrix(rows, k);
    std::copy(values.begin(), values.end(), m.entries.data());
    return m;
}

}  // namespace ganlab
