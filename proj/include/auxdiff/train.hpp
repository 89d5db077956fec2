#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "auxdiff/checkpoint.hpp"
#include "auxdiff/config.hpp"
#include "auxdiff/data_metrics.hpp"
#include "auxdiff/denoiser.hpp"
#include "auxdiff/io.hpp"
#include "auxdiff/runlog.hpp"
#include "auxdiff/sampler.hpp"

namespace auxdiff {

struct TrainSummary {
    std::vector<RunLogRow> rows;
    std::string checkpoint_path;
    long skipped_steps = 0;
};

namespace detail {

inline RunLogRow eval_snapshot(const RunConfig& cfg, const MlpParams<float>& params,
                               const ScheduleTables& tb, const XiSpec& spec,
                               const SampleBatch& test, long step, double last_loss,
                               const std::string& run_id, const std::string& hash) {
    SamplerConfig scfg;
    scfg.variant = cfg.variant;
    scfg.prediction = cfg.prediction;
    scfg.clip_lo = cfg.clip_lo;
    scfg.clip_hi = cfg.clip_hi;
    scfg.n_samples = cfg.n_generate;
    scfg.seed = derive_seed(cfg.master_seed, stream::eval_gen, static_cast<std::uint64_t>(step));
    SampleBatch gen = generate(params, tb, spec, scfg);
    if (cfg.scaling_rho != 1.0) gen.data = scale_matrix(gen.data, cfg.scaling_rho);

    RunLogRow row;
    row.run_id = run_id;
    row.step = step;
    row.variant = to_string(cfg.variant);
    row.prediction = to_string(cfg.prediction);
    row.sigma_c_sq = cfg.sigma_c_sq;
    row.n = cfg.dataset.dim;
    row.seed = cfg.master_seed;
    row.rho = cfg.scaling_rho;
    row.loss = last_loss;
    row.divergences = gen.meta.divergence_count;
    if (gen.data.rows > 0) {
        row.wd1 = wasserstein1(gen, test, cfg.wd_subsample,
                               derive_seed(cfg.master_seed, stream::eval_metric,
                                           static_cast<std::uint64_t>(step)));
        row.mmd = mmd(gen, test, cfg.mmd_bandwidth());
        row.ks = ks_vs_uniform(avg_brightness(gen), cfg.dataset.k);
    } else {
        row.wd1 = row.mmd = row.ks = std::nan("");
    }
    row.config_hash = hash;
    return row;
}

}  // namespace detail

/// The experiment loop: sample rows with replacement, build pairs for the
/// configured variant, take clipped Adam steps, and every eval interval
/// generate fresh samples and log 1WD/MMD/KS against the test set.
/// Training data is scaled by 1/rho on entry, generated data by rho before
/// any metric sees it. Non-finite losses skip the update; 100 consecutive
/// skips abort the run.
inline TrainSummary run_training(const RunConfig& cfg, const Matd& train_data,
                                 const Matd& test_data, const std::string& out_dir,
                                 std::ostream* log = nullptr) {
    cfg.validate();
    if (train_data.cols != static_cast<std::size_t>(cfg.dataset.dim) ||
        test_data.cols != static_cast<std::size_t>(cfg.dataset.dim))
        throw ConfigError("run_training: data dimension differs from config");

    std::filesystem::create_directories(out_dir);
    const std::string hash = hex64(config_hash(cfg));
    const std::string run_id = hash.substr(0, 12);
    write_text_file(out_dir + "/config.ini", serialize_config(cfg));
    write_text_file(out_dir + "/config.json", config_to_json(cfg));

    const ScheduleTables tb = cfg.build_tables();
    const XiSpec spec = cfg.xi_spec();
    const int n = cfg.dataset.dim;

    const Matd train_scaled =
        cfg.scaling_rho == 1.0 ? train_data : scale_matrix(train_data, 1.0 / cfg.scaling_rho);
    SampleBatch test;
    test.data = test_data;
    test.meta.source = "dataset";

    MlpParams<float> params = init_params<float>(n, cfg.embed_dim, cfg.master_seed, cfg.T);
    AdamState<float> adam = AdamState<float>::init(params, cfg.lr);

    std::ofstream runlog(out_dir + "/runlog.csv", std::ios::trunc);
    if (!runlog) throw IoError("cannot open run log for writing");
    runlog << kRunLogHeader << "\n";
    TrainSummary summary;
    auto emit = [&](long step, double loss) {
        RunLogRow row =
            detail::eval_snapshot(cfg, params, tb, spec, test, step, loss, run_id, hash);
        runlog << runlog_row_csv(row) << "\n";
        runlog.flush();
        summary.rows.push_back(row);
        if (log)
            *log << "[" << run_id << "] step " << step << " loss " << loss << " wd1 " << row.wd1
                 << " mmd " << row.mmd << " ks " << row.ks << " div " << row.divergences << "\n";
    };

    emit(0, std::nan(""));

    std::vector<TrainingPair> batch(static_cast<std::size_t>(cfg.batch_size));
    Vec x0(n);
    double loss = 0.0;
    int consecutive_skips = 0;
    for (long step = 1; step <= cfg.max_steps; ++step) {
        Rng pick = Rng::substream(cfg.master_seed, stream::batch_select,
                                  static_cast<std::uint64_t>(step));
        for (int j = 0; j < cfg.batch_size; ++j) {
            const auto row = static_cast<std::size_t>(
                pick.uniform_int(0, static_cast<std::int64_t>(train_scaled.rows) - 1));
            const double* src = train_scaled.row(row);
            for (int i = 0; i < n; ++i) x0[i] = src[i];
            Rng pr = Rng::substream(cfg.master_seed, stream::pair,
                                    static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(j));
            batch[static_cast<std::size_t>(j)] =
                make_training_pair(cfg.variant, cfg.prediction, x0, tb, spec, pr);
        }
        auto [l, grads] = loss_and_grad(params, batch);
        loss = l;
        bool ok = std::isfinite(loss);
        if (ok) {
            clip_grad_norm(grads, cfg.clip_norm);
            ok = adam_step(params, grads, adam);
        }
        if (!ok) {
            ++summary.skipped_steps;
            if (++consecutive_skips >= 100)
                throw NumericError("training aborted: 100 consecutive non-finite steps");
        } else {
            consecutive_skips = 0;
        }
        if (log && step % 1000 == 0)
            *log << "[" << run_id << "] step " << step << " loss " << loss << "\n";
        if (step % cfg.eval_every_steps == 0 || step == cfg.max_steps) emit(step, loss);
    }

    CheckpointMeta meta;
    meta.variant = to_string(cfg.variant);
    meta.prediction = to_string(cfg.prediction);
    meta.schedule_hash = hash;
    meta.step_count = cfg.max_steps;
    meta.master_seed = cfg.master_seed;
    summary.checkpoint_path = out_dir + "/checkpoint.bin";
    save_checkpoint(summary.checkpoint_path, params, meta);
    return summary;
}

/// Writes `pairs` train/test dataset pairs (CSV + sidecar), seeds derived
/// from dataset.seed.
inline std::vector<std::string> generate_dataset_files(const RunConfig& cfg,
                                                       const std::string& out_dir, int pairs = 1) {
    cfg.validate();
    if (pairs < 1) throw ConfigError("gen-data: pairs must be >= 1");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> files;
    for (int p = 0; p < pairs; ++p) {
        for (int role = 0; role < 2; ++role) {
            CylinderConfig cc = cfg.dataset;
            cc.seed = derive_seed(cfg.dataset.seed, stream::dataset_file,
                                  static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(role));
            SampleBatch batch = cylinder_dataset(cc);
            batch.meta.config_hash = hex64(config_hash(cfg));
            const std::string name = out_dir + "/" + (role == 0 ? "train" : "test") +
                                     (pairs > 1 ? "_" + std::to_string(p) : "") + ".csv";
            write_sample_batch(name, batch);
            files.push_back(name);
        }
    }
    return files;
}

}  // namespace auxdiff
