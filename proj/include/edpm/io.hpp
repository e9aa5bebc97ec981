#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "edpm/errors.hpp"
#include "edpm/gibbs.hpp"
#include "edpm/types.hpp"

namespace edpm {

/// Shortest decimal form that round-trips a double (17 significant digits).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.push_back("");
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw parse_error(where + ": not a number: '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument("trailing characters");
        }
        return v;
    } catch (const std::exception&) {
        throw parse_error(where + ": not an integer: '" + s + "'");
    }
}

} // namespace detail

/// Write a dataset as CSV with header y,x1,...,xd.
inline void store_dataset(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw validation_error("store_dataset: cannot open " + path);
    }
    out << "y";
    for (int l = 0; l < data.d(); ++l) {
        out << ",x" << (l + 1);
    }
    out << "\n";
    for (int i = 0; i < data.n(); ++i) {
        out << fmt17(data.y[i]);
        for (int l = 0; l < data.d(); ++l) {
            out << "," << fmt17(data.x(i, l));
        }
        out << "\n";
    }
}

/// Read a dataset CSV. The header must name column 1 "y" and the rest
/// "x1".."xd"; every data row must carry d+1 numeric fields.
inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw validation_error("load_dataset: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error(path + ":1: empty file, expected header y,x1,...");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const std::vector<std::string> header = detail::split(line, ',');
    if (header.empty() || detail::trim(header[0]) != "y") {
        throw parse_error(path + ":1: first header column must be 'y'");
    }
    const int d = static_cast<int>(header.size()) - 1;
    if (d < 1) {
        throw parse_error(path + ":1: expected at least one covariate column");
    }
    for (int l = 0; l < d; ++l) {
        const std::string want = "x" + std::to_string(l + 1);
        if (detail::trim(header[l + 1]) != want) {
            throw parse_error(path + ":1: header column " +
                              std::to_string(l + 2) + " must be '" + want +
                              "'");
        }
    }
    std::vector<double> ys;
    std::vector<double> xs;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (detail::trim(line).empty()) {
            continue;
        }
        const std::vector<std::string> fields = detail::split(line, ',');
        if (static_cast<int>(fields.size()) != d + 1) {
            throw parse_error(path + ":" + std::to_string(row) + ": expected " +
                              std::to_string(d + 1) + " fields, got " +
                              std::to_string(fields.size()));
        }
        for (int c = 0; c <= d; ++c) {
            const std::string where =
                path + ":" + std::to_string(row) + ": column " +
                std::to_string(c + 1);
            const double v = detail::parse_double(detail::trim(fields[c]), where);
            if (!std::isfinite(v)) {
                throw validation_error(where + ": non-finite value");
            }
            if (c == 0) {
                ys.push_back(v);
            } else {
                xs.push_back(v);
            }
        }
    }
    if (ys.empty()) {
        throw parse_error(path + ": no data rows");
    }
    Dataset data;
    const int n = static_cast<int>(ys.size());
    data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
    data.x.resize(n, d);
    for (int i = 0; i < n; ++i) {
        for (int l = 0; l < d; ++l) {
            data.x(i, l) = xs[static_cast<std::size_t>(i) * d + l];
        }
    }
    data.validate();
    return data;
}

/// Write a chain trace as CSV, one row per kept sweep.
inline void store_trace(const ChainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw validation_error("store_trace: cannot open " + path);
    }
    const int n_alpha =
        trace.records.empty()
            ? 0
            : static_cast<int>(trace.records.front().alpha_psi.size());
    const int n_probe =
        trace.records.empty()
            ? 0
            : static_cast<int>(trace.records.front().ey_probe.size());
    out << "iter,alpha_theta";
    for (int k = 0; k < n_alpha; ++k) {
        out << ",alpha_psi_" << (k + 1);
    }
    out << ",occupied_theta,occupied_pairs";
    for (int p = 0; p < n_probe; ++p) {
        out << ",ey_probe_" << (p + 1);
    }
    out << "\n";
    for (std::size_t r = 0; r < trace.records.size(); ++r) {
        const ChainRecord& rec = trace.records[r];
        out << (r + 1) << "," << fmt17(rec.alpha_theta);
        for (int k = 0; k < n_alpha; ++k) {
            out << "," << fmt17(rec.alpha_psi[k]);
        }
        out << "," << rec.occupied_theta << "," << rec.occupied_pairs;
        for (int p = 0; p < n_probe; ++p) {
            out << "," << fmt17(rec.ey_probe[p]);
        }
        out << "\n";
    }
}

/// Read a trace CSV written by store_trace. Sweep bookkeeping beyond the
/// recorded rows is not stored in the file; sweeps is set to the row count
/// and assignment_ops to zero.
inline ChainTrace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw validation_error("load_trace: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error(path + ":1: empty file, expected trace header");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    const std::vector<std::string> header = detail::split(line, ',');
    int n_alpha = 0;
    int n_probe = 0;
    for (const std::string& raw : header) {
        const std::string h = detail::trim(raw);
        if (h.rfind("alpha_psi_", 0) == 0) {
            ++n_alpha;
        } else if (h.rfind("ey_probe_", 0) == 0) {
            ++n_probe;
        }
    }
    const int expected = 4 + n_alpha + n_probe;
    if (static_cast<int>(header.size()) != expected ||
        detail::trim(header[0]) != "iter" ||
        detail::trim(header[1]) != "alpha_theta") {
        throw parse_error(path + ":1: unrecognized trace header");
    }
    ChainTrace trace;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (detail::trim(line).empty()) {
            continue;
        }
        const std::vector<std::string> fields = detail::split(line, ',');
        if (static_cast<int>(fields.size()) != expected) {
            throw parse_error(path + ":" + std::to_string(row) + ": expected " +
                              std::to_string(expected) + " fields, got " +
                              std::to_string(fields.size()));
        }
        const std::string where = path + ":" + std::to_string(row);
        ChainRecord rec;
        int c = 1;
        rec.alpha_theta = detail::parse_double(fields[c++], where);
        rec.alpha_psi.resize(n_alpha);
        for (int k = 0; k < n_alpha; ++k) {
            rec.alpha_psi[k] = detail::parse_double(fields[c++], where);
        }
        rec.occupied_theta =
            static_cast<int>(detail::parse_int(fields[c++], where));
        rec.occupied_pairs =
            static_cast<int>(detail::parse_int(fields[c++], where));
        rec.ey_probe.resize(n_probe);
        for (int p = 0; p < n_probe; ++p) {
            rec.ey_probe[p] = detail::parse_double(fields[c++], where);
        }
        trace.records.push_back(std::move(rec));
    }
    trace.sweeps = static_cast<int>(trace.records.size());
    trace.assignment_ops = 0;
    return trace;
}

/// Flat key-value configuration file. Lines hold "key value" or
/// "key = value"; '#' starts a comment; keys are unique.
class Config {
  public:
    Config() = default;

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw validation_error("config: cannot open " + path);
        }
        std::stringstream ss;
        ss << in.rdbuf();
        return from_string(ss.str(), path);
    }

    static Config from_string(const std::string& text,
                              const std::string& name = "<config>") {
        Config cfg;
        cfg.name_ = name;
        std::stringstream ss(text);
        std::string line;
        int lineno = 0;
        while (std::getline(ss, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                line = line.substr(0, hash);
            }
            line = detail::trim(line);
            if (line.empty()) {
                continue;
            }
            auto sep = line.find_first_of(" \t=");
            if (sep == std::string::npos) {
                throw parse_error(name + ":" + std::to_string(lineno) +
                                  ": expected 'key value'");
            }
            const std::string key = line.substr(0, sep);
            std::string value = detail::trim(line.substr(sep + 1));
            if (!value.empty() && value.front() == '=') {
                value = detail::trim(value.substr(1));
            }
            if (value.empty()) {
                throw parse_error(name + ":" + std::to_string(lineno) +
                                  ": missing value for key '" + key + "'");
            }
            if (cfg.values_.count(key) != 0) {
                throw parse_error(name + ":" + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
            }
            cfg.values_[key] = value;
            cfg.lines_[key] = lineno;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key,
                           const std::string& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        used_.insert(key);
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        used_.insert(key);
        return detail::parse_double(it->second, where(key));
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        used_.insert(key);
        return detail::parse_int(it->second, where(key));
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        used_.insert(key);
        if (it->second == "true" || it->second == "1") {
            return true;
        }
        if (it->second == "false" || it->second == "0") {
            return false;
        }
        throw parse_error(where(key) + ": expected true/false, got '" +
                          it->second + "'");
    }

    std::vector<double> get_double_list(const std::string& key,
                                        std::vector<double> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        used_.insert(key);
        std::vector<double> out;
        for (const std::string& f : detail::split(it->second, ',')) {
            out.push_back(detail::parse_double(detail::trim(f), where(key)));
        }
        if (out.empty()) {
            throw parse_error(where(key) + ": empty list");
        }
        return out;
    }

    std::vector<int> get_int_list(const std::string& key,
                                  std::vector<int> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return fallback;
        }
        used_.insert(key);
        std::vector<int> out;
        for (const std::string& f : detail::split(it->second, ',')) {
            out.push_back(static_cast<int>(
                detail::parse_int(detail::trim(f), where(key))));
        }
        if (out.empty()) {
            throw parse_error(where(key) + ": empty list");
        }
        return out;
    }

    /// Rejects keys never read by any getter, to catch typos.
    void reject_unknown_keys() const {
        for (const auto& [key, value] : values_) {
            if (used_.count(key) == 0) {
                throw validation_error(where(key) + ": unknown key '" + key +
                                       "'");
            }
        }
    }

  private:
    std::string where(const std::string& key) const {
        auto it = lines_.find(key);
        const int line = it == lines_.end() ? 0 : it->second;
        return name_ + ":" + std::to_string(line);
    }

    std::string name_ = "<config>";
    std::map<std::string, std::string> values_;
    std::map<std::string, int> lines_;
    mutable std::set<std::string> used_;
};

/// Render rows as an aligned text table with two-space column gaps.
inline std::string format_aligned_table(
    const std::vector<std::vector<std::string>>& rows) {
    std::size_t cols = 0;
    for (const auto& row : rows) {
        cols = std::max(cols, row.size());
    }
    std::vector<std::size_t> width(cols, 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            width[c] = std::max(width[c], row[c].size());
        }
    }
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) {
                out += std::string(width[c] - row[c].size() + 2, ' ');
            }
        }
        out += "\n";
    }
    return out;
}

/// Write key-value record lines ("key value") to a file.
inline void store_records(const std::vector<std::pair<std::string, std::string>>& records,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw validation_error("store_records: cannot open " + path);
    }
    for (const auto& [key, value] : records) {
        out << key << " " << value << "\n";
    }
}

} // namespace edpm
