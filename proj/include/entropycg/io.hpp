#pragma once

/// @file io.hpp
/// @brief Flat key=value configs and manifests, CSV series, plain-text
/// solution snapshots, and the one-run-per-directory lock.
///
/// All numeric output is printed with %.17g so files round-trip exactly
/// and identical runs produce bit-identical artifacts.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "entropycg/element_ops.hpp"

namespace entropycg {

inline constexpr const char* kVersion = "1.0.0";

/// %.17g rendering used for every number we persist.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Flat string map with typed accessors; keys mirror CLI flags.
struct KeyValueConfig {
    std::map<std::string, std::string> values;

    bool has(const std::string& key) const { return values.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback = "") const {
        const auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        char* end = nullptr;
        const double v = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0')
            throw std::invalid_argument("config: bad number for '" + key + "': " + it->second);
        return v;
    }

    long long get_int(const std::string& key, long long fallback) const {
        const auto it = values.find(key);
        if (it == values.end()) return fallback;
        char* end = nullptr;
        const long long v = std::strtoll(it->second.c_str(), &end, 10);
        if (end == it->second.c_str() || *end != '\0')
            throw std::invalid_argument("config: bad integer for '" + key + "': " + it->second);
        return v;
    }

    void set(const std::string& key, const std::string& v) { values[key] = v; }
    void set_double(const std::string& key, double v) { values[key] = format_double(v); }
    void set_int(const std::string& key, long long v) { values[key] = std::to_string(v); }
};

namespace detail {
inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace detail

/// Parses "key = value" lines; '#' starts a comment, blanks ignored.
inline KeyValueConfig parse_config_text(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: missing '=' on line " + std::to_string(lineno));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
        cfg.values[key] = val;
    }
    return cfg;
}

inline KeyValueConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Writes sorted key=value lines (std::map iteration order).
inline void write_config_file(const std::string& path, const KeyValueConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write '" + path + "'");
    for (const auto& [k, v] : cfg.values) out << k << " = " << v << "\n";
}

/// CSV with a fixed header; all cells rendered with %.17g.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("csv: cannot write '" + path + "'");
        for (size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
        cols_ = header.size();
    }

    void row(const std::vector<double>& vals) {
        if (vals.size() != cols_) throw std::invalid_argument("csv: column count mismatch");
        for (size_t i = 0; i < vals.size(); ++i) {
            if (i) out_ << ',';
            out_ << format_double(vals[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    size_t cols_ = 0;
};

/// Values of u_h at the global lattice nodes (equals the coefficients
/// for a Lagrange basis; adjacent elements agree by continuity).
inline std::vector<double> nodal_values(const ElementContext& ctx, const std::vector<double>& u) {
    const Mesh& m = ctx.mesh;
    const int n = ctx.n_loc();
    std::vector<double> out(m.n_nodes, 0.0);
    std::vector<double> u_loc(n);
    for (int e = 0; e < m.n_elements; ++e) {
        const auto& nodes = m.element_nodes[e];
        for (int k = 0; k < n; ++k) u_loc[k] = u[nodes[k]];
        for (int j = 0; j < n; ++j) {
            double v = 0.0;
            for (int k = 0; k < n; ++k) v += ctx.blattice(j, k) * u_loc[k];
            out[nodes[j]] = v;
        }
    }
    return out;
}

/// 1D solution CSV: x, coefficient, nodal value.
inline void write_solution_1d(const std::string& path, const ElementContext& ctx,
                              const std::vector<double>& u) {
    const std::vector<double> vals = nodal_values(ctx, u);
    CsvWriter csv(path, {"x", "coefficient", "value"});
    for (int i = 0; i < ctx.mesh.n_nodes; ++i)
        csv.row({ctx.mesh.node_coords[i][0], u[i], vals[i]});
}

/// 2D snapshot: "nx ny p x0 y0 x1 y1" header, then one "x y coefficient
/// value" row per lattice node in x-fastest order.
inline void write_snapshot_2d(const std::string& path, const ElementContext& ctx,
                              const std::vector<double>& u) {
    const Mesh& m = ctx.mesh;
    if (m.dim != 2) throw std::invalid_argument("snapshot: mesh is not 2D");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("snapshot: cannot write '" + path + "'");
    out << m.nodes_per_dir[0] << ' ' << m.nodes_per_dir[1] << ' ' << m.degree << ' '
        << format_double(m.lower[0]) << ' ' << format_double(m.lower[1]) << ' '
        << format_double(m.upper[0]) << ' ' << format_double(m.upper[1]) << '\n';
    const std::vector<double> vals = nodal_values(ctx, u);
    for (int i = 0; i < m.n_nodes; ++i)
        out << format_double(m.node_coords[i][0]) << ' ' << format_double(m.node_coords[i][1])
            << ' ' << format_double(u[i]) << ' ' << format_double(vals[i]) << '\n';
}

/// One run per output directory: exclusive lock file, removed on exit.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::string& dir) {
        std::filesystem::create_directories(dir);
        path_ = dir + "/.entropy_cg.lock";
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            if (errno == EEXIST)
                throw std::runtime_error("output directory is locked by another run: " + dir);
            throw std::runtime_error("cannot create lock file in: " + dir);
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        const ssize_t written = ::write(fd, pid.c_str(), pid.size());
        (void)written;
        ::close(fd);
    }

    ~DirectoryLock() {
        if (!path_.empty()) ::unlink(path_.c_str());
    }

    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::string path_;
};

}  // namespace entropycg
