#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "auxdiff/common.hpp"

namespace auxdiff {

/// One evaluation record emitted during training.
struct RunLogRow {
    std::string run_id;
    long step = 0;
    std::string variant;
    std::string prediction;
    double sigma_c_sq = 0.0;
    int n = 0;
    std::uint64_t seed = 0;
    double rho = 1.0;
    double loss = 0.0;
    double wd1 = 0.0;
    double mmd = 0.0;
    double ks = 0.0;
    int divergences = 0;
    std::string config_hash;
};

inline const char* kRunLogHeader =
    "run_id,step,variant,prediction,sigma_c_sq,n,seed,rho,loss,wd1,mmd,ks,divergences,config_hash";

inline std::string runlog_row_csv(const RunLogRow& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%ld,%s,%s,%.17g,%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%s",
                  r.run_id.c_str(), r.step, r.variant.c_str(), r.prediction.c_str(), r.sigma_c_sq,
                  r.n, static_cast<unsigned long long>(r.seed), r.rho, r.loss, r.wd1, r.mmd, r.ks,
                  r.divergences, r.config_hash.c_str());
    return buf;
}

inline std::vector<RunLogRow> read_runlog(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open run log: " + path);
    std::vector<RunLogRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line.rfind("run_id,", 0) == 0) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 14) throw IoError("malformed run-log row in " + path);
        RunLogRow r;
        r.run_id = cells[0];
        r.step = std::stol(cells[1]);
        r.variant = cells[2];
        r.prediction = cells[3];
        r.sigma_c_sq = std::stod(cells[4]);
        r.n = std::stoi(cells[5]);
        r.seed = std::stoull(cells[6]);
        r.rho = std::stod(cells[7]);
        r.loss = std::stod(cells[8]);
        r.wd1 = std::stod(cells[9]);
        r.mmd = std::stod(cells[10]);
        r.ks = std::stod(cells[11]);
        r.divergences = std::stoi(cells[12]);
        r.config_hash = cells[13];
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace auxdiff
