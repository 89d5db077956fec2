#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "auxdiff/common.hpp"
#include "auxdiff/denoiser.hpp"

namespace auxdiff {

struct CheckpointMeta {
    std::string variant = "base";
    std::string prediction = "eps";
    std::string schedule_hash;
    long step_count = 0;
    std::uint64_t master_seed = 0;
};

// Checkpoint file layout: a "key = value" text header terminated by a
// "---" line, then each parameter array (W0, b0, W1, b1, ...) as a
// little-endian u64 element count followed by raw little-endian f32 data.
// Round-trips are bit-exact.

namespace detail {
inline void put_array(std::ostream& os, const float* data, std::uint64_t count) {
    os.write(reinterpret_cast<const char*>(&count), sizeof(count));
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
}

inline std::vector<float> get_array(std::istream& is, std::uint64_t expect) {
    std::uint64_t count = 0;
    is.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!is || count != expect) throw IoError("checkpoint: array length mismatch");
    std::vector<float> out(count);
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * 4));
    if (!is) throw IoError("checkpoint: truncated array");
    return out;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const MlpParams<float>& p,
                            const CheckpointMeta& meta) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "auxdiff-checkpoint v1\n";
    os << "n = " << p.n << "\n";
    os << "embed_dim = " << p.embed_dim << "\n";
    os << "t_max = " << p.t_max << "\n";
    os << "layer_dims =";
    for (int d : p.dims) os << ' ' << d;
    os << "\n";
    os << "variant = " << meta.variant << "\n";
    os << "prediction = " << meta.prediction << "\n";
    os << "schedule_hash = " << meta.schedule_hash << "\n";
    os << "step_count = " << meta.step_count << "\n";
    os << "master_seed = " << meta.master_seed << "\n";
    os << "---\n";
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        detail::put_array(os, p.W[l].v.data(), p.W[l].v.size());
        detail::put_array(os, p.b[l].data(), p.b[l].size());
    }
    if (!os) throw IoError("checkpoint write failed: " + path);
}

inline std::pair<MlpParams<float>, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::string line;
    std::getline(is, line);
    if (line != "auxdiff-checkpoint v1") throw IoError("not an auxdiff checkpoint: " + path);

    MlpParams<float> p;
    CheckpointMeta meta;
    while (std::getline(is, line) && line != "---") {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("checkpoint: malformed header line");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "n") p.n = std::stoi(val);
        else if (key == "embed_dim") p.embed_dim = std::stoi(val);
        else if (key == "t_max") p.t_max = std::stoi(val);
        else if (key == "layer_dims") {
            std::istringstream ss(val);
            int d;
            while (ss >> d) p.dims.push_back(d);
        } else if (key == "variant") meta.variant = val;
        else if (key == "prediction") meta.prediction = val;
        else if (key == "schedule_hash") meta.schedule_hash = val;
        else if (key == "step_count") meta.step_count = std::stol(val);
        else if (key == "master_seed") meta.master_seed = std::stoull(val);
    }
    if (line != "---") throw IoError("checkpoint: missing header terminator");
    if (p.dims.size() < 2 || p.dims.front() != p.n + p.embed_dim || p.dims.back() != p.n)
        throw IoError("checkpoint: inconsistent layer dims");
    for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
        const std::size_t in = p.dims[l], out = p.dims[l + 1];
        Mat<float> w(out, in);
        w.v = detail::get_array(is, static_cast<std::uint64_t>(in * out));
        p.W.push_back(std::move(w));
        p.b.push_back(detail::get_array(is, out));
    }
    return {std::move(p), std::move(meta)};
}

}  // namespace auxdiff
