#pragma once

// Numeric CSV tables: '#' provenance lines, one header line, then rows of
// reals written with 17 significant digits so that values round-trip exactly.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qengine/error.hpp"

namespace qengine {

struct ResultTable {
    std::vector<std::string> comments;  // provenance lines without the leading '#'
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t k = 0; k < columns.size(); ++k)
            if (columns[k] == name) return k;
        throw Error(ErrorCode::Parse, "missing column '" + name + "'");
    }

    std::vector<double> values(const std::string& name) const {
        const auto k = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[k]);
        return out;
    }
};

inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_real(const std::string& s, const std::string& where) {
    if (s.empty()) throw Error(ErrorCode::Parse, where + ": empty field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || (errno == ERANGE && std::isinf(v)))  // subnormals are fine
        throw Error(ErrorCode::Parse, where + ": '" + s + "' is not a number");
    return v;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline std::string to_csv(const ResultTable& t) {
    std::string out;
    for (const auto& c : t.comments) out += "# " + c + "\n";
    for (std::size_t k = 0; k < t.columns.size(); ++k) out += (k ? "," : "") + t.columns[k];
    out += "\n";
    for (const auto& r : t.rows) {
        if (r.size() != t.columns.size()) throw Error(ErrorCode::Parse, "row width differs from column count");
        for (std::size_t k = 0; k < r.size(); ++k) out += (k ? "," : "") + format_real(r[k]);
        out += "\n";
    }
    return out;
}

inline ResultTable parse_csv(const std::string& text, const std::string& origin = "<csv>") {
    ResultTable t;
    std::stringstream in(text);
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto s = detail::trim(line);
        if (s.empty()) continue;
        if (s[0] == '#') {
            t.comments.push_back(detail::trim(s.substr(1)));
            continue;
        }
        auto cells = detail::split_commas(s);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (!have_header) {
            t.columns = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw Error(ErrorCode::Parse, where + ": expected " + std::to_string(t.columns.size()) + " columns, found " +
                                              std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_real(c, where));
        t.rows.push_back(std::move(row));
    }
    if (!have_header) throw Error(ErrorCode::Parse, origin + ": no header line");
    return t;
}

inline void write_csv(const std::string& path, const ResultTable& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Config, "cannot write " + path);
    f << to_csv(t);
}

inline ResultTable read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Parse, "cannot read " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str(), path);
}

}  // namespace qengine
