#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "auxdiff/common.hpp"
#include "auxdiff/data_metrics.hpp"
#include "auxdiff/io.hpp"
#include "auxdiff/sampler.hpp"
#include "auxdiff/schedule.hpp"
#include "auxdiff/xi_noise.hpp"

namespace auxdiff {

/// Full experiment description. Files are flat "key = value" sections
/// (or the JSON mirror); any field can be overridden with dotted keys
/// like `model.sigma_c_sq=0.5`.
struct RunConfig {
    // [dataset]
    CylinderConfig dataset;

    // [model]
    ModelVariant variant = ModelVariant::Base;
    PredictionMode prediction = PredictionMode::Eps;
    double sigma_c_sq = 1.0;
    double sigma0 = 1.0;

    // [xi] ("auto" follows the variant: proposed -> correlated_gaussian,
    // everything else -> delta_zero)
    std::string xi_kind = "auto";
    double xi_sigma_c_sq = -1.0;  // negative = follow model.sigma_c_sq

    // [schedule]
    int T = 200;
    double sigma_min = 0.01;
    double sigma_max = 10.0;
    bool balanced = false;
    bool zero_snr = false;

    // [denoiser]
    int embed_dim = 16;

    // [optimizer]
    double lr = 0.001;
    int batch_size = 1024;
    long max_steps = 20000;
    double clip_norm = 1.0;

    // [sampler]
    double clip_lo = -10.0;
    double clip_hi = 10.0;
    int n_samples = 5000;

    // [eval]
    long eval_every_steps = 2000;
    int n_generate = 2000;
    int wd_subsample = 1000;
    std::string mmd_bandwidth_mode = "sqrt_n";

    // [run]
    std::string profile = "desk";
    double scaling_rho = 1.0;
    std::uint64_t master_seed = 1;

    bool operator==(const RunConfig&) const = default;

    void validate() const {
        dataset.validate();
        if (!(sigma0 > 0.0)) throw ConfigError("model.sigma0 must be positive");
        if (sigma_c_sq < 0.0) throw ConfigError("model.sigma_c_sq must be nonnegative");
        if (T < 1) throw ConfigError("schedule.T must be >= 1");
        if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
            throw ConfigError("schedule sigma range invalid");
        if (variant == ModelVariant::ZeroSnr && prediction != PredictionMode::V)
            throw ConfigError("zero_snr requires prediction = v");
        if (variant == ModelVariant::ZeroSnr && !zero_snr)
            throw ConfigError("variant zero_snr requires schedule.zero_snr = true");
        if (variant != ModelVariant::ZeroSnr && zero_snr)
            throw ConfigError("schedule.zero_snr = true requires variant zero_snr");
        if (variant == ModelVariant::Proposed && !balanced)
            throw ConfigError("variant proposed requires schedule.balanced = true");
        if (zero_snr && balanced)
            throw ConfigError("balanced gamma is undefined for zero-SNR schedules");
        if (xi_kind != "auto" && xi_kind != "delta_zero" && xi_kind != "correlated_gaussian")
            throw ConfigError("xi.kind must be auto, delta_zero or correlated_gaussian");
        if (embed_dim < 2 || embed_dim % 2 != 0) throw ConfigError("denoiser.embed_dim must be even");
        if (!(lr > 0.0) || batch_size < 1 || max_steps < 1 || !(clip_norm > 0.0))
            throw ConfigError("optimizer settings invalid");
        if (!(clip_lo < clip_hi)) throw ConfigError("sampler clip range empty");
        if (n_samples < 1 || n_generate < 1 || wd_subsample < 1 || eval_every_steps < 1)
            throw ConfigError("sampler/eval counts must be positive");
        if (!(scaling_rho > 0.0)) throw ConfigError("run.scaling_rho must be positive");
        if (mmd_bandwidth_mode != "sqrt_n") {
            try {
                if (!(std::stod(mmd_bandwidth_mode) > 0.0)) throw ConfigError("");
            } catch (...) {
                throw ConfigError("eval.mmd_bandwidth_mode must be 'sqrt_n' or a positive number");
            }
        }
    }

    XiSpec xi_spec() const {
        const double s = xi_sigma_c_sq >= 0.0 ? xi_sigma_c_sq : sigma_c_sq;
        std::string kind = xi_kind;
        if (kind == "auto")
            kind = (variant == ModelVariant::Proposed) ? "correlated_gaussian" : "delta_zero";
        // The offset baseline draws its eps_c from the same rank-one
        // Gaussian; that draw also goes through XiSpec.
        if (variant == ModelVariant::Offset) kind = "correlated_gaussian";
        return kind == "delta_zero" ? XiSpec::delta_zero(dataset.dim)
                                    : XiSpec::correlated_gaussian(dataset.dim, s);
    }

    ScheduleTables build_tables() const {
        ScheduleTables tb = derive_alpha_tables(build_log_linear_schedule(T, sigma_min, sigma_max),
                                                sigma0);
        if (zero_snr) tb = zero_snr_rescale(tb);
        if (balanced) tb = build_balanced_gamma(tb);
        return tb;
    }

    double mmd_bandwidth() const {
        if (mmd_bandwidth_mode == "sqrt_n") return std::sqrt(static_cast<double>(dataset.dim));
        return std::stod(mmd_bandwidth_mode);
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using KvMap = std::map<std::string, std::string>;

inline void apply_kv(RunConfig& c, const std::string& key, const std::string& val) {
    auto as_bool = [&](const std::string& s) {
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError("expected boolean for " + key + ", got '" + s + "'");
    };
    try {
        if (key == "dataset.size") c.dataset.size = std::stoi(val);
        else if (key == "dataset.dim") c.dataset.dim = std::stoi(val);
        else if (key == "dataset.r") c.dataset.r = std::stod(val);
        else if (key == "dataset.k") c.dataset.k = std::stod(val);
        else if (key == "dataset.seed") c.dataset.seed = std::stoull(val);
        else if (key == "model.variant") c.variant = variant_from_string(val);
        else if (key == "model.prediction") c.prediction = prediction_from_string(val);
        else if (key == "model.sigma_c_sq") c.sigma_c_sq = std::stod(val);
        else if (key == "model.sigma0") c.sigma0 = std::stod(val);
        else if (key == "xi.kind") c.xi_kind = val;
        else if (key == "xi.sigma_c_sq") c.xi_sigma_c_sq = std::stod(val);
        else if (key == "schedule.T") c.T = std::stoi(val);
        else if (key == "schedule.sigma_min") c.sigma_min = std::stod(val);
        else if (key == "schedule.sigma_max") c.sigma_max = std::stod(val);
        else if (key == "schedule.balanced") c.balanced = as_bool(val);
        else if (key == "schedule.zero_snr") c.zero_snr = as_bool(val);
        else if (key == "denoiser.embed_dim") c.embed_dim = std::stoi(val);
        else if (key == "optimizer.lr") c.lr = std::stod(val);
        else if (key == "optimizer.batch_size") c.batch_size = std::stoi(val);
        else if (key == "optimizer.max_steps") c.max_steps = std::stol(val);
        else if (key == "optimizer.clip_norm") c.clip_norm = std::stod(val);
        else if (key == "sampler.clip_lo") c.clip_lo = std::stod(val);
        else if (key == "sampler.clip_hi") c.clip_hi = std::stod(val);
        else if (key == "sampler.n_samples") c.n_samples = std::stoi(val);
        else if (key == "eval.every_steps") c.eval_every_steps = std::stol(val);
        else if (key == "eval.n_generate") c.n_generate = std::stoi(val);
        else if (key == "eval.wd_subsample") c.wd_subsample = std::stoi(val);
        else if (key == "eval.mmd_bandwidth_mode") c.mmd_bandwidth_mode = val;
        else if (key == "run.profile") c.profile = val;
        else if (key == "run.scaling_rho") c.scaling_rho = std::stod(val);
        else if (key == "run.master_seed") c.master_seed = std::stoull(val);
        else throw ConfigError("unknown config key: " + key);
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError("bad value for " + key + ": '" + val + "'");
    }
}

}  // namespace detail

/// Named default bundles. `desk` is the scaled-down profile the acceptance
/// experiments use; `paper` mirrors the full published protocol.
inline void apply_profile(RunConfig& c, const std::string& profile) {
    if (profile == "desk") {
        c.max_steps = 20000;
        c.eval_every_steps = 2000;
        c.n_generate = 2000;
        c.wd_subsample = 1000;
        c.n_samples = 2000;
    } else if (profile == "paper") {
        c.max_steps = 200000;
        c.eval_every_steps = 5000;
        c.n_generate = 5000;
        c.wd_subsample = 1000;
        c.n_samples = 5000;
    } else {
        throw ConfigError("unknown profile: " + profile);
    }
    c.profile = profile;
}

/// Parses the flat INI-style text. Section headers distribute over the
/// following keys; dotted keys are accepted anywhere.
inline RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line, section;
    // First pass: profile selection has to land before other keys so
    // explicit settings win over profile defaults.
    std::vector<std::pair<std::string, std::string>> kvs;
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("malformed config line: " + line);
        std::string key = trim(line.substr(0, eq));
        if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
        kvs.emplace_back(key, trim(line.substr(eq + 1)));
    }
    for (const auto& [k, v] : kvs)
        if (k == "run.profile") apply_profile(c, v);
    for (const auto& [k, v] : kvs)
        if (k != "run.profile") detail::apply_kv(c, k, v);
    return c;
}

inline std::string serialize_config(const RunConfig& c) {
    using detail::fmt_double;
    std::string o;
    o += "[dataset]\n";
    o += "size = " + std::to_string(c.dataset.size) + "\n";
    o += "dim = " + std::to_string(c.dataset.dim) + "\n";
    o += "r = " + fmt_double(c.dataset.r) + "\n";
    o += "k = " + fmt_double(c.dataset.k) + "\n";
    o += "seed = " + std::to_string(c.dataset.seed) + "\n\n";
    o += "[model]\n";
    o += "variant = " + to_string(c.variant) + "\n";
    o += "prediction = " + to_string(c.prediction) + "\n";
    o += "sigma_c_sq = " + fmt_double(c.sigma_c_sq) + "\n";
    o += "sigma0 = " + fmt_double(c.sigma0) + "\n\n";
    o += "[xi]\n";
    o += "kind = " + c.xi_kind + "\n";
    o += "sigma_c_sq = " + fmt_double(c.xi_sigma_c_sq) + "\n\n";
    o += "[schedule]\n";
    o += "T = " + std::to_string(c.T) + "\n";
    o += "sigma_min = " + fmt_double(c.sigma_min) + "\n";
    o += "sigma_max = " + fmt_double(c.sigma_max) + "\n";
    o += std::string("balanced = ") + (c.balanced ? "true" : "false") + "\n";
    o += std::string("zero_snr = ") + (c.zero_snr ? "true" : "false") + "\n\n";
    o += "[denoiser]\n";
    o += "embed_dim = " + std::to_string(c.embed_dim) + "\n\n";
    o += "[optimizer]\n";
    o += "lr = " + fmt_double(c.lr) + "\n";
    o += "batch_size = " + std::to_string(c.batch_size) + "\n";
    o += "max_steps = " + std::to_string(c.max_steps) + "\n";
    o += "clip_norm = " + fmt_double(c.clip_norm) + "\n\n";
    o += "[sampler]\n";
    o += "clip_lo = " + fmt_double(c.clip_lo) + "\n";
    o += "clip_hi = " + fmt_double(c.clip_hi) + "\n";
    o += "n_samples = " + std::to_string(c.n_samples) + "\n\n";
    o += "[eval]\n";
    o += "every_steps = " + std::to_string(c.eval_every_steps) + "\n";
    o += "n_generate = " + std::to_string(c.n_generate) + "\n";
    o += "wd_subsample = " + std::to_string(c.wd_subsample) + "\n";
    o += "mmd_bandwidth_mode = " + c.mmd_bandwidth_mode + "\n\n";
    o += "[run]\n";
    o += "profile = " + c.profile + "\n";
    o += "scaling_rho = " + fmt_double(c.scaling_rho) + "\n";
    o += "master_seed = " + std::to_string(c.master_seed) + "\n";
    return o;
}

/// JSON mirror of the same keys, nested by section.
inline std::string config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["dataset"] = {{"size", c.dataset.size}, {"dim", c.dataset.dim},   {"r", c.dataset.r},
                    {"k", c.dataset.k},       {"seed", c.dataset.seed}};
    j["model"] = {{"variant", to_string(c.variant)},
                  {"prediction", to_string(c.prediction)},
                  {"sigma_c_sq", c.sigma_c_sq},
                  {"sigma0", c.sigma0}};
    j["xi"] = {{"kind", c.xi_kind}, {"sigma_c_sq", c.xi_sigma_c_sq}};
    j["schedule"] = {{"T", c.T},
                     {"sigma_min", c.sigma_min},
                     {"sigma_max", c.sigma_max},
                     {"balanced", c.balanced},
                     {"zero_snr", c.zero_snr}};
    j["denoiser"] = {{"embed_dim", c.embed_dim}};
    j["optimizer"] = {{"lr", c.lr},
                      {"batch_size", c.batch_size},
                      {"max_steps", c.max_steps},
                      {"clip_norm", c.clip_norm}};
    j["sampler"] = {{"clip_lo", c.clip_lo}, {"clip_hi", c.clip_hi}, {"n_samples", c.n_samples}};
    j["eval"] = {{"every_steps", c.eval_every_steps},
                 {"n_generate", c.n_generate},
                 {"wd_subsample", c.wd_subsample},
                 {"mmd_bandwidth_mode", c.mmd_bandwidth_mode}};
    j["run"] = {{"profile", c.profile},
                {"scaling_rho", c.scaling_rho},
                {"master_seed", c.master_seed}};
    return j.dump(2) + "\n";
}

inline RunConfig config_from_json(const std::string& text) {
    RunConfig c;
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.contains("run") && j["run"].contains("profile"))
        apply_profile(c, j["run"]["profile"].get<std::string>());
    for (auto& [section, body] : j.items()) {
        for (auto& [key, val] : body.items()) {
            if (section == "run" && key == "profile") continue;
            std::string s = val.is_string() ? val.get<std::string>() : val.dump();
            detail::apply_kv(c, section + "." + key, s);
        }
    }
    return c;
}

/// Loads .json or INI-style config by extension.
inline RunConfig load_config(const std::string& path) {
    const std::string text = read_text_file(path);
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json") return config_from_json(text);
    return parse_config_text(text);
}

inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a(serialize_config(c)); }

}  // namespace auxdiff
