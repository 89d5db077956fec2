#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>

#include "auxdiff/checkpoint.hpp"
#include "auxdiff/config.hpp"
#include "auxdiff/io.hpp"
#include "auxdiff/runlog.hpp"

using namespace auxdiff;

namespace {
std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("auxdiff_test_" + name)).string();
}
}  // namespace

TEST_CASE("config round-trips through INI text") {
    RunConfig cfg;
    apply_profile(cfg, "desk");
    cfg.variant = ModelVariant::Proposed;
    cfg.balanced = true;
    cfg.sigma_c_sq = 0.5;
    cfg.dataset.dim = 200;
    cfg.master_seed = 42;
    cfg.scaling_rho = 1.1;
    const RunConfig back = parse_config_text(serialize_config(cfg));
    REQUIRE(back == cfg);
    REQUIRE(config_hash(back) == config_hash(cfg));
}

TEST_CASE("config round-trips through the JSON mirror") {
    RunConfig cfg;
    apply_profile(cfg, "paper");
    cfg.variant = ModelVariant::Offset;
    cfg.sigma_c_sq = 0.05;
    cfg.dataset.dim = 50;
    const RunConfig back = config_from_json(config_to_json(cfg));
    REQUIRE(back == cfg);
}

TEST_CASE("dotted keys and section headers both parse") {
    const RunConfig a = parse_config_text("model.variant = proposed\nschedule.balanced = true\n");
    REQUIRE(a.variant == ModelVariant::Proposed);
    REQUIRE(a.balanced);
    const RunConfig b = parse_config_text("[model]\nvariant = proposed\n[schedule]\nbalanced = true\n");
    REQUIRE(b.variant == ModelVariant::Proposed);
    REQUIRE(b.balanced);
    REQUIRE_THROWS_AS(parse_config_text("nonsense.key = 1\n"), ConfigError);
}

TEST_CASE("profile defaults do not override explicit keys") {
    const RunConfig cfg = parse_config_text(
        "[run]\nprofile = desk\n[optimizer]\nmax_steps = 123\n");
    REQUIRE(cfg.profile == "desk");
    REQUIRE(cfg.max_steps == 123);
    REQUIRE(cfg.n_generate == 2000);  // from the profile
}

TEST_CASE("cross-field validation") {
    RunConfig cfg;
    cfg.variant = ModelVariant::ZeroSnr;
    cfg.prediction = PredictionMode::Eps;
    cfg.zero_snr = true;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg.prediction = PredictionMode::V;
    REQUIRE_NOTHROW(cfg.validate());

    RunConfig prop;
    prop.variant = ModelVariant::Proposed;
    prop.balanced = false;
    REQUIRE_THROWS_AS(prop.validate(), ConfigError);
    prop.balanced = true;
    REQUIRE_NOTHROW(prop.validate());
}

TEST_CASE("xi spec resolution follows the variant") {
    RunConfig cfg;
    cfg.variant = ModelVariant::Base;
    REQUIRE(cfg.xi_spec().kind == XiKind::DeltaZero);
    cfg.variant = ModelVariant::Proposed;
    cfg.balanced = true;
    cfg.sigma_c_sq = 0.7;
    REQUIRE(cfg.xi_spec().kind == XiKind::CorrelatedGaussian);
    REQUIRE(cfg.xi_spec().sigma_c_sq == 0.7);
    cfg.xi_sigma_c_sq = 0.2;  // explicit override wins
    REQUIRE(cfg.xi_spec().sigma_c_sq == 0.2);
}

TEST_CASE("csv matrix round-trip is bit exact") {
    Rng rng(3);
    Matd m(17, 4);
    for (auto& v : m.v) v = rng.normal() * 1e-7;
    const std::string path = tmp_path("m.csv");
    write_csv_matrix(path, m);
    const Matd back = read_csv_matrix(path);
    REQUIRE(back.rows == m.rows);
    REQUIRE(back.cols == m.cols);
    for (std::size_t i = 0; i < m.v.size(); ++i) REQUIRE(back.v[i] == m.v[i]);
    std::remove(path.c_str());
}

TEST_CASE("csv reader skips a header line and rejects ragged rows") {
    const std::string path = tmp_path("h.csv");
    write_text_file(path, "a,b\n1,2\n3,4\n");
    const Matd m = read_csv_matrix(path);
    REQUIRE(m.rows == 2);
    REQUIRE(m.at(1, 1) == 4.0);
    write_text_file(path, "1,2\n3\n");
    REQUIRE_THROWS_AS(read_csv_matrix(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("sample batch sidecar round-trip") {
    SampleBatch b;
    b.data = Matd(2, 2);
    b.data.v = {1, 2, 3, 4};
    b.meta.source = "generated";
    b.meta.variant = "proposed/eps";
    b.meta.seed = 99;
    b.meta.requested = 2;
    b.meta.divergence_count = 1;
    b.meta.config_hash = "abc123";
    const std::string path = tmp_path("b.csv");
    write_sample_batch(path, b);
    const SampleBatch back = read_sample_batch(path);
    REQUIRE(back.data.v == b.data.v);
    REQUIRE(back.meta.source == "generated");
    REQUIRE(back.meta.variant == "proposed/eps");
    REQUIRE(back.meta.seed == 99);
    REQUIRE(back.meta.divergence_count == 1);
    std::remove(path.c_str());
    std::remove((path + ".meta").c_str());
}

TEST_CASE("checkpoint round-trip is bit exact") {
    auto p = init_params<float>(3, 4, 11, 20, {8, 8});
    CheckpointMeta meta;
    meta.variant = "proposed";
    meta.prediction = "v";
    meta.schedule_hash = "deadbeef";
    meta.step_count = 777;
    meta.master_seed = 5;
    const std::string path = tmp_path("ck.bin");
    save_checkpoint(path, p, meta);
    auto [q, back] = load_checkpoint(path);
    REQUIRE(q.n == p.n);
    REQUIRE(q.embed_dim == p.embed_dim);
    REQUIRE(q.t_max == p.t_max);
    REQUIRE(q.dims == p.dims);
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        REQUIRE(std::memcmp(q.W[l].v.data(), p.W[l].v.data(), p.W[l].v.size() * 4) == 0);
        REQUIRE(std::memcmp(q.b[l].data(), p.b[l].data(), p.b[l].size() * 4) == 0);
    }
    REQUIRE(back.variant == "proposed");
    REQUIRE(back.prediction == "v");
    REQUIRE(back.schedule_hash == "deadbeef");
    REQUIRE(back.step_count == 777);
    REQUIRE(back.master_seed == 5);
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
    const std::string path = tmp_path("bad.bin");
    write_text_file(path, "not a checkpoint\n");
    REQUIRE_THROWS_AS(load_checkpoint(path), IoError);
    std::remove(path.c_str());
}

TEST_CASE("runlog rows round-trip") {
    RunLogRow r;
    r.run_id = "abc";
    r.step = 2000;
    r.variant = "proposed";
    r.prediction = "eps";
    r.sigma_c_sq = 1.0;
    r.n = 200;
    r.seed = 3;
    r.rho = 1.1;
    r.loss = 0.25;
    r.wd1 = 1.5;
    r.mmd = 0.01;
    r.ks = 0.04;
    r.divergences = 2;
    r.config_hash = "ffee";
    const std::string path = tmp_path("log.csv");
    write_text_file(path, std::string(kRunLogHeader) + "\n" + runlog_row_csv(r) + "\n");
    const auto rows = read_runlog(path);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].run_id == "abc");
    REQUIRE(rows[0].step == 2000);
    REQUIRE(rows[0].wd1 == 1.5);
    REQUIRE(rows[0].rho == 1.1);
    REQUIRE(rows[0].divergences == 2);
    REQUIRE(rows[0].config_hash == "ffee");
    std::remove(path.c_str());
}
