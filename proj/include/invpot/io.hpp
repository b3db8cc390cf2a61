#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "invpot/errors.hpp"
#include "invpot/fem.hpp"
#include "invpot/mesh.hpp"
#include "invpot/observation.hpp"

namespace invpot::io {

/// Shortest exact decimal form of a double (%.17g round-trips the value).
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// FNV-1a over a string; used to stamp output files with the config they
/// came from.
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// One CSV table: a comment line carrying the config hash, a header, then
/// rows of pre-formatted cells.
struct CsvTable {
    std::string config_hash;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open '" + path.string() + "' for writing");
    os << "# config_hash=" << t.config_hash << "\n";
    for (std::size_t c = 0; c < t.header.size(); ++c) os << (c ? "," : "") << t.header[c];
    os << "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
        os << "\n";
    }
    if (!os) throw ConfigError("write failed for '" + path.string() + "'");
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path.string() + "'");
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("config_hash=");
            if (pos != std::string::npos) t.config_hash = line.substr(pos + 12);
            continue;
        }
        if (!header_seen) {
            t.header = split(line);
            header_seen = true;
        } else {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

inline void write_nodes_csv(const Mesh& m, const std::filesystem::path& path, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = m.dim == 1 ? std::vector<std::string>{"id", "x"} : std::vector<std::string>{"id", "x", "y"};
    for (int i = 0; i < m.node_count(); ++i) {
        std::vector<std::string> row{std::to_string(i), fmt(m.nodes[static_cast<std::size_t>(i)][0])};
        if (m.dim == 2) row.push_back(fmt(m.nodes[static_cast<std::size_t>(i)][1]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline void write_elements_csv(const Mesh& m, const std::filesystem::path& path, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = m.dim == 1 ? std::vector<std::string>{"id", "n0", "n1"} : std::vector<std::string>{"id", "n0", "n1", "n2"};
    for (int e = 0; e < m.element_count(); ++e) {
        const auto& el = m.elements[static_cast<std::size_t>(e)];
        std::vector<std::string> row{std::to_string(e), std::to_string(el[0]), std::to_string(el[1])};
        if (m.dim == 2) row.push_back(std::to_string(el[2]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline void write_points_csv(const PointSet& ps, const std::filesystem::path& path, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = ps.dim == 1 ? std::vector<std::string>{"id", "x"} : std::vector<std::string>{"id", "x", "y"};
    for (int i = 0; i < ps.n(); ++i) {
        std::vector<std::string> row{std::to_string(i), fmt(ps.points[static_cast<std::size_t>(i)][0])};
        if (ps.dim == 2) row.push_back(fmt(ps.points[static_cast<std::size_t>(i)][1]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline void write_field_csv(const NodalField& f, const std::filesystem::path& path, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = {"node_id", "value"};
    for (std::size_t i = 0; i < f.values.size(); ++i) t.rows.push_back({std::to_string(i), fmt(f.values[i])});
    write_csv(path, t);
}

inline void write_observations_csv(const ObservationSet& obs, const std::filesystem::path& path, const std::string& hash) {
    CsvTable t;
    t.config_hash = hash;
    t.header = obs.points.dim == 1 ? std::vector<std::string>{"id", "x", "m"} : std::vector<std::string>{"id", "x", "y", "m"};
    for (int i = 0; i < obs.n(); ++i) {
        std::vector<std::string> row{std::to_string(i), fmt(obs.points.points[static_cast<std::size_t>(i)][0])};
        if (obs.points.dim == 2) row.push_back(fmt(obs.points.points[static_cast<std::size_t>(i)][1]));
        row.push_back(fmt(obs.values[static_cast<std::size_t>(i)]));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

} // namespace invpot::io
