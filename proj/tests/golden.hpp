#pragma once
// Frozen reference values. Set ERGOLAB_UPDATE_GOLDEN=1 to (re)write a file
// from the oracle rows instead of comparing against it.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace golden {

using Rows = std::vector<std::vector<double>>;

inline std::string path(const std::string& name) { return std::string(ERGOLAB_GOLDEN_DIR) + "/" + name; }

inline bool updating() {
    const char* e = std::getenv("ERGOLAB_UPDATE_GOLDEN");
    return e && std::string(e) == "1";
}

inline void write(const std::string& name, const std::string& header, const Rows& rows) {
    std::ofstream os(path(name));
    os << header << '\n';
    char buf[40];
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", r[i]);
            os << (i ? "," : "") << buf;
        }
        os << '\n';
    }
}

inline Rows read(const std::string& name) {
    std::ifstream is(path(name));
    Rows rows;
    std::string line;
    if (!std::getline(is, line)) return rows;
    while (std::getline(is, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

/// Largest |a - b| / max(1, |b|) over all cells; infinity on shape mismatch.
inline double max_rel_diff(const Rows& a, const Rows& b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return INFINITY;
        for (std::size_t j = 0; j < a[i].size(); ++j)
            m = std::max(m, std::fabs(a[i][j] - b[i][j]) / std::max(1.0, std::fabs(b[i][j])));
    }
    return m;
}

}  // namespace golden
