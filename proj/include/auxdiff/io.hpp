#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "auxdiff/common.hpp"
#include "auxdiff/sample_batch.hpp"

namespace auxdiff {

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << content;
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Numeric CSV (no header), one row per sample, full double precision.
inline void write_csv_matrix(const std::string& path, const Matd& m) {
    std::string out;
    out.reserve(m.rows * m.cols * 20);
    char buf[48];
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, c));
            out += buf;
            out += (c + 1 < m.cols) ? ',' : '\n';
        }
    }
    write_text_file(path, out);
}

/// Reads a numeric CSV; a non-numeric first line is treated as a header
/// and skipped.
inline Matd read_csv_matrix(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<Vec> rows;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        Vec row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                row.push_back(std::stod(cell, &pos));
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos])))
                    ++pos;
                if (pos != cell.size()) numeric = false;
            } catch (...) {
                numeric = false;
            }
            if (!numeric) break;
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw IoError("non-numeric cell in " + path);
        }
        first = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw IoError("ragged CSV in " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("empty CSV: " + path);
    Matd m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
    return m;
}

using KvList = std::vector<std::pair<std::string, std::string>>;

/// "key = value" sidecar files.
inline void write_sidecar(const std::string& path, const KvList& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    write_text_file(path, out);
}

inline KvList read_sidecar(const std::string& path) {
    std::istringstream in(read_text_file(path));
    KvList kv;
    std::string line;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

inline void write_sample_batch(const std::string& csv_path, const SampleBatch& batch) {
    write_csv_matrix(csv_path, batch.data);
    KvList kv = {
        {"source", batch.meta.source},
        {"variant", batch.meta.variant},
        {"config_hash", batch.meta.config_hash},
        {"seed", std::to_string(batch.meta.seed)},
        {"steps", std::to_string(batch.meta.steps)},
        {"requested", std::to_string(batch.meta.requested)},
        {"divergence_count", std::to_string(batch.meta.divergence_count)},
    };
    write_sidecar(csv_path + ".meta", kv);
}

inline SampleBatch read_sample_batch(const std::string& csv_path) {
    SampleBatch b;
    b.data = read_csv_matrix(csv_path);
    std::ifstream probe(csv_path + ".meta");
    if (probe) {
        for (const auto& [k, v] : read_sidecar(csv_path + ".meta")) {
            if (k == "source") b.meta.source = v;
            else if (k == "variant") b.meta.variant = v;
            else if (k == "config_hash") b.meta.config_hash = v;
            else if (k == "seed") b.meta.seed = std::stoull(v);
            else if (k == "steps") b.meta.steps = std::stoi(v);
            else if (k == "requested") b.meta.requested = std::stoi(v);
            else if (k == "divergence_count") b.meta.divergence_count = std::stoi(v);
        }
    }
    return b;
}

}  // namespace auxdiff
