// Command-line driver: dataset generation, schedule inspection, training,
// sampling, two-sample evaluation, report plots and the verification
// battery. Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "auxdiff/checkpoint.hpp"
#include "auxdiff/config.hpp"
#include "auxdiff/report.hpp"
#include "auxdiff/sampler.hpp"
#include "auxdiff/train.hpp"
#include "auxdiff/verify.hpp"

namespace {

using namespace auxdiff;

RunConfig load_with_overrides(const std::string& config_path,
                              const std::vector<std::string>& sets) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got: " + kv);
        const std::string key = kv.substr(0, eq);
        if (key == "run.profile")
            apply_profile(cfg, kv.substr(eq + 1));
        else
            detail::apply_kv(cfg, key, kv.substr(eq + 1));
    }
    return cfg;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir, int pairs) {
    const auto files = generate_dataset_files(cfg, out_dir, pairs);
    for (const auto& f : files) std::cout << f << "\n";
    return 0;
}

int cmd_schedule(const std::string& kind, int T, double sigma_min, double sigma_max,
                 double sigma0, bool balanced, bool zero_snr, const std::string& out) {
    BetaSchedule bs = (kind == "sd15") ? build_scaled_linear_schedule(T)
                                       : build_log_linear_schedule(T, sigma_min, sigma_max);
    ScheduleTables tb = derive_alpha_tables(bs, sigma0);
    if (zero_snr) tb = zero_snr_rescale(tb);
    if (balanced) tb = build_balanced_gamma(tb);
    const std::string csv = schedule_csv(tb);
    if (out.empty())
        std::cout << csv;
    else
        write_text_file(out, csv);
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& train_csv, const std::string& test_csv,
              const std::string& out_dir) {
    const Matd train_data = read_csv_matrix(train_csv);
    const Matd test_data = read_csv_matrix(test_csv);
    const TrainSummary summary = run_training(cfg, train_data, test_data, out_dir, &std::cerr);
    std::cout << "checkpoint: " << summary.checkpoint_path << "\n";
    std::cout << "runlog: " << out_dir << "/runlog.csv\n";
    std::cout << "skipped_steps: " << summary.skipped_steps << "\n";
    return 0;
}

int cmd_sample(const std::string& checkpoint_path, std::string config_path, int count,
               std::uint64_t seed, const std::string& out) {
    auto [params, meta] = load_checkpoint(checkpoint_path);
    if (config_path.empty()) {
        config_path =
            (std::filesystem::path(checkpoint_path).parent_path() / "config.ini").string();
    }
    RunConfig cfg = load_config(config_path);
    cfg.validate();
    if (hex64(config_hash(cfg)) != meta.schedule_hash)
        std::cerr << "warning: config hash does not match checkpoint provenance\n";

    SamplerConfig scfg;
    scfg.variant = variant_from_string(meta.variant);
    scfg.prediction = prediction_from_string(meta.prediction);
    scfg.clip_lo = cfg.clip_lo;
    scfg.clip_hi = cfg.clip_hi;
    scfg.n_samples = count > 0 ? count : cfg.n_samples;
    scfg.seed = seed;
    SampleBatch batch = generate(params, cfg.build_tables(), cfg.xi_spec(), scfg);
    if (cfg.scaling_rho != 1.0) batch.data = scale_matrix(batch.data, cfg.scaling_rho);
    batch.meta.config_hash = hex64(config_hash(cfg));
    write_sample_batch(out, batch);
    std::cout << "samples: " << batch.data.rows << "\n";
    std::cout << "divergences: " << batch.meta.divergence_count << "\n";
    return 0;
}

int cmd_eval(const std::string& a_path, const std::string& b_path, int wd_subsample,
             std::uint64_t seed, const std::string& bandwidth_mode, double k,
             const std::string& out) {
    SampleBatch a = read_sample_batch(a_path);
    SampleBatch b = read_sample_batch(b_path);
    if (a.data.cols != b.data.cols)
        throw ConfigError("eval: sample files have different dimensions");
    const double h = bandwidth_mode == "sqrt_n" ? std::sqrt(static_cast<double>(a.data.cols))
                                                : std::stod(bandwidth_mode);
    const double wd = wasserstein1(a, b, wd_subsample, seed);
    const double mm = mmd(a, b, h);
    const double ks = ks_vs_uniform(avg_brightness(a), k);
    std::cout << "wd1 " << wd << "\nmmd " << mm << "\nks " << ks << "\ndivergences "
              << a.meta.divergence_count << "\n";
    if (!out.empty()) {
        const bool fresh = !std::filesystem::exists(out);
        std::ofstream f(out, std::ios::app);
        if (!f) throw IoError("cannot open " + out);
        if (fresh) f << "a,b,wd1,mmd,ks,divergences,wd_subsample,seed\n";
        f << a_path << ',' << b_path << ',' << wd << ',' << mm << ',' << ks << ','
          << a.meta.divergence_count << ',' << wd_subsample << ',' << seed << "\n";
    }
    return 0;
}

int cmd_report(const std::vector<std::string>& runlogs, const std::string& hist_test,
               const std::string& hist_gen, double k, int bins, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    if (!runlogs.empty()) {
        std::vector<RunLogRow> rows;
        for (const auto& path : runlogs) {
            auto part = read_runlog(path);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        const auto agg = aggregate_runlogs(rows);
        write_text_file(out_dir + "/aggregate.csv", aggregate_csv(agg));

        // One plot per metric: step on x, median with p10-p90 band per group.
        struct Grp {
            svg::Series wd, mm, ks;
        };
        std::map<std::string, Grp> groups;
        for (const auto& a : agg) {
            char name[160];
            std::snprintf(name, sizeof(name), "%s/%s sc2=%g rho=%g n=%d", a.variant.c_str(),
                          a.prediction.c_str(), a.sigma_c_sq, a.rho, a.n);
            auto& g = groups[name];
            for (auto* s : {&g.wd, &g.mm, &g.ks}) s->name = name;
            g.wd.x.push_back(a.step);
            g.wd.y.push_back(a.wd_med);
            g.wd.y_lo.push_back(a.wd_p10);
            g.wd.y_hi.push_back(a.wd_p90);
            g.mm.x.push_back(a.step);
            g.mm.y.push_back(a.mmd_med);
            g.mm.y_lo.push_back(a.mmd_p10);
            g.mm.y_hi.push_back(a.mmd_p90);
            g.ks.x.push_back(a.step);
            g.ks.y.push_back(a.ks_med);
            g.ks.y_lo.push_back(a.ks_p10);
            g.ks.y_hi.push_back(a.ks_p90);
        }
        std::vector<svg::Series> wd, mm, ks;
        for (auto& [name, g] : groups) {
            wd.push_back(g.wd);
            mm.push_back(g.mm);
            ks.push_back(g.ks);
        }
        write_text_file(out_dir + "/wd1.svg", svg::line_plot("1-Wasserstein vs training step", wd, true));
        write_text_file(out_dir + "/mmd.svg", svg::line_plot("MMD vs training step", mm, true));
        write_text_file(out_dir + "/ks.svg", svg::line_plot("brightness KS vs training step", ks));
        std::cout << out_dir << "/aggregate.csv\n";
    }
    if (!hist_test.empty() || !hist_gen.empty()) {
        if (hist_test.empty() || hist_gen.empty())
            throw ConfigError("report: histogram mode needs both --hist-test and --hist-gen");
        std::vector<std::pair<std::string, Histogram>> series;
        series.emplace_back("test",
                            brightness_histogram(avg_brightness(read_sample_batch(hist_test)), k, bins));
        series.emplace_back("generated",
                            brightness_histogram(avg_brightness(read_sample_batch(hist_gen)), k, bins));
        write_text_file(out_dir + "/brightness_hist.csv", histogram_csv(series));
        write_text_file(out_dir + "/brightness_hist.svg",
                        svg::histogram_plot("average brightness", series));
        std::cout << out_dir << "/brightness_hist.csv\n";
    }
    return 0;
}

int cmd_verify(std::uint64_t seed, const std::string& out) {
    const auto reports = run_all_verifications(seed);
    const std::string table = format_verify_reports(reports);
    std::cout << table;
    if (!out.empty()) write_text_file(out, table);
    for (const auto& r : reports)
        if (!r.pass) return 3;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"auxdiff: discrete-time diffusion with auxiliary noise"};
    app.require_subcommand(1);

    std::string config_path, out, out_dir = ".", train_csv = "data/train.csv",
                               test_csv = "data/test.csv";
    std::vector<std::string> sets, runlogs;
    int pairs = 1, count = 0, T = 200, bins = 10, wd_subsample = 1000;
    double sigma_min = 0.01, sigma_max = 10.0, sigma0 = 1.0, k = 2.0;
    std::uint64_t seed = 1;
    bool balanced = false, zero_snr = false;
    std::string kind = "log_linear", checkpoint, a_path, b_path, bandwidth = "sqrt_n",
                hist_test, hist_gen;

    auto* gen = app.add_subcommand("gen-data", "generate Cylinder train/test datasets");
    gen->add_option("--config", config_path, "config file (.ini or .json)");
    gen->add_option("--set", sets, "dotted-key override, e.g. dataset.dim=200");
    gen->add_option("--out", out_dir, "output directory")->capture_default_str();
    gen->add_option("--pairs", pairs, "number of train/test seed pairs")->capture_default_str();

    auto* sch = app.add_subcommand("schedule", "dump coefficient tables as CSV");
    sch->add_option("--kind", kind, "log_linear or sd15")->capture_default_str();
    sch->add_option("--T", T, "number of steps")->capture_default_str();
    sch->add_option("--sigma-min", sigma_min)->capture_default_str();
    sch->add_option("--sigma-max", sigma_max)->capture_default_str();
    sch->add_option("--sigma0", sigma0)->capture_default_str();
    sch->add_flag("--balanced", balanced, "build balanced gamma/phi/psi/nu");
    sch->add_flag("--zero-snr", zero_snr, "apply terminal-SNR rescale");
    sch->add_option("--out", out, "output CSV (stdout if omitted)");

    auto* tr = app.add_subcommand("train", "run the training loop");
    tr->add_option("--config", config_path, "config file (.ini or .json)");
    tr->add_option("--set", sets, "dotted-key override");
    tr->add_option("--train-csv", train_csv)->capture_default_str();
    tr->add_option("--test-csv", test_csv)->capture_default_str();
    tr->add_option("--out", out_dir, "run directory")->capture_default_str();

    auto* sa = app.add_subcommand("sample", "generate from a checkpoint");
    sa->add_option("--checkpoint", checkpoint)->required();
    sa->add_option("--config", config_path, "defaults to config.ini beside the checkpoint");
    sa->add_option("--count", count, "samples to generate (0 = config value)");
    sa->add_option("--seed", seed)->capture_default_str();
    sa->add_option("--out", out, "output CSV")->required();

    auto* ev = app.add_subcommand("eval", "two-sample metrics between sample files");
    ev->add_option("--a", a_path, "generated samples CSV")->required();
    ev->add_option("--b", b_path, "reference samples CSV")->required();
    ev->add_option("--wd-subsample", wd_subsample)->capture_default_str();
    ev->add_option("--seed", seed)->capture_default_str();
    ev->add_option("--bandwidth", bandwidth, "sqrt_n or a number")->capture_default_str();
    ev->add_option("--k", k, "brightness range for KS")->capture_default_str();
    ev->add_option("--out", out, "append metrics to this CSV");

    auto* rp = app.add_subcommand("report", "aggregate run logs / brightness histograms");
    rp->add_option("--runlog", runlogs, "run-log CSV (repeatable)");
    rp->add_option("--hist-test", hist_test, "test samples CSV for histogram");
    rp->add_option("--hist-gen", hist_gen, "generated samples CSV for histogram");
    rp->add_option("--k", k)->capture_default_str();
    rp->add_option("--bins", bins)->capture_default_str();
    rp->add_option("--out-dir", out_dir)->capture_default_str();

    auto* vf = app.add_subcommand("verify", "run the oracle verification battery");
    vf->add_option("--seed", seed)->capture_default_str();
    vf->add_option("--out", out, "also write the report table to this file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(load_with_overrides(config_path, sets), out_dir, pairs);
        if (sch->parsed()) return cmd_schedule(kind, T, sigma_min, sigma_max, sigma0, balanced, zero_snr, out);
        if (tr->parsed()) {
            RunConfig cfg = load_with_overrides(config_path, sets);
            cfg.validate();
            return cmd_train(cfg, train_csv, test_csv, out_dir);
        }
        if (sa->parsed()) return cmd_sample(checkpoint, config_path, count, seed, out);
        if (ev->parsed()) return cmd_eval(a_path, b_path, wd_subsample, seed, bandwidth, k, out);
        if (rp->parsed()) return cmd_report(runlogs, hist_test, hist_gen, k, bins, out_dir);
        if (vf->parsed()) return cmd_verify(seed, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
