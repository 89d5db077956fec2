#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "auxdiff/process.hpp"

using namespace auxdiff;

namespace {

ScheduleTables balanced200() {
    static ScheduleTables tb =
        build_balanced_gamma(derive_alpha_tables(build_log_linear_schedule(200, 0.01, 10.0)));
    return tb;
}

}  // namespace

TEST_CASE("forward step evaluates the kernel formula exactly") {
    // alpha_t = 0.99, gamma_t = 0.02 at t = 1
    BetaSchedule bs;
    bs.T = 1;
    bs.beta = {0.0, 0.01};
    auto tb = set_custom_gamma(derive_alpha_tables(bs), {0.0, 0.02});
    const Vec x_prev(4, 1.0), xi(4, 1.0);
    Rng rng(11), clone(11);
    const Vec out = forward_step(x_prev, xi, 1, tb, rng);
    const double mean = std::sqrt(0.99) * 1.02;
    for (int i = 0; i < 4; ++i) {
        const double eps = clone.normal();
        REQUIRE(out[i] == mean + std::sqrt(0.01) * 1.0 * eps);
    }
}

TEST_CASE("forward step with gamma = 0 and sigma0 = 1 is the plain DDPM kernel") {
    auto tb = derive_alpha_tables(build_log_linear_schedule(10, 0.1, 5.0));
    const Vec x_prev = {0.5, -1.0}, xi(2, 1.0);  // gamma is zero, xi must not matter
    Rng rng(3), clone(3);
    const Vec out = forward_step(x_prev, xi, 4, tb, rng);
    for (int i = 0; i < 2; ++i) {
        const double eps = clone.normal();
        REQUIRE(out[i] == std::sqrt(tb.alpha[4]) * x_prev[i] + std::sqrt(tb.beta[4]) * eps);
    }
}

TEST_CASE("closed-form marginal reduces to DDPM for xi = 0") {
    auto tb = balanced200();
    const Vec x0 = {1.0, -2.0}, xi(2, 0.0);
    Rng rng(5), clone(5);
    const Vec out = forward_marginal(x0, xi, 100, tb, rng);
    for (int i = 0; i < 2; ++i) {
        const double eps = clone.normal();
        REQUIRE(out[i] == std::sqrt(tb.alpha_bar[100]) * x0[i] +
                              std::sqrt(1.0 - tb.alpha_bar[100]) * eps);
    }
}

TEST_CASE("terminal marginal approaches N(xi, sigma0^2 I) under the balanced strategy") {
    auto tb = balanced200();
    // coefficient on x0 decays, coefficient on xi approaches 1
    REQUIRE(std::sqrt(tb.alpha_bar[200]) < 0.11);
    REQUIRE(std::sqrt(1.0 - tb.alpha_bar[200]) * tb.psi[200] ==
            Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("sequential chain matches the closed-form marginal in distribution") {
    auto tb = balanced200();
    const int n = 1;
    const long draws = 30000;
    const Vec x0(n, 0.7);
    const Vec xi(n, -0.4);
    const int t_check = 100;

    Rng rng(99);
    double sum = 0.0, sumsq = 0.0;
    Vec x(n);
    for (long d = 0; d < draws; ++d) {
        x = x0;
        for (int t = 1; t <= t_check; ++t) x = forward_step(x, xi, t, tb, rng);
        sum += x[0];
        sumsq += x[0] * x[0];
    }
    const double mean = sum / draws;
    const double var = sumsq / draws - mean * mean;
    const double ab = tb.alpha_bar[t_check];
    const double mean_expect = std::sqrt(ab) * x0[0] + std::sqrt(1.0 - ab) * tb.psi[t_check] * xi[0];
    const double var_expect = 1.0 - ab;
    REQUIRE(std::abs(mean - mean_expect) <= 4.0 * std::sqrt(var / draws));
    REQUIRE(std::abs(var - var_expect) <= 4.0 * var * std::sqrt(2.0 / (draws - 1.0)));
}

TEST_CASE("posterior mean is xi-free under balanced gamma") {
    auto tb = balanced200();
    Rng rng(17);
    const Vec x_t = rng.normal_vec(3), x0 = rng.normal_vec(3);
    const Vec xi_a(3, 2.0), xi_b(3, -5.0);
    for (int t : {2, 57, 200}) {
        auto [mu_a, beta_a] = posterior_params(x_t, x0, xi_a, t, tb);
        auto [mu_b, beta_b] = posterior_params(x_t, x0, xi_b, t, tb);
        for (int i = 0; i < 3; ++i) REQUIRE(mu_a[i] == Catch::Approx(mu_b[i]).margin(1e-9));
        REQUIRE(beta_a == beta_b);
    }
}

TEST_CASE("posterior mean shifts by exactly nu_t * delta_xi for unbalanced gamma") {
    auto base = derive_alpha_tables(build_log_linear_schedule(20, 0.05, 8.0));
    Vec gamma(21, 0.0);
    for (int t = 1; t <= 20; ++t) gamma[t] = 0.01 * t;
    auto tb = set_custom_gamma(base, gamma);
    Rng rng(23);
    const Vec x_t = rng.normal_vec(2), x0 = rng.normal_vec(2);
    const Vec xi_a(2, 1.0), xi_b(2, 3.5);
    const int t = 13;
    auto [mu_a, ba] = posterior_params(x_t, x0, xi_a, t, tb);
    auto [mu_b, bb] = posterior_params(x_t, x0, xi_b, t, tb);
    REQUIRE(std::abs(tb.nu[t]) > 1e-6);  // genuinely unbalanced
    for (int i = 0; i < 2; ++i)
        REQUIRE(mu_b[i] - mu_a[i] == Catch::Approx(tb.nu[t] * 2.5).epsilon(1e-12));
}

TEST_CASE("posterior agrees with the 1-D Gaussian-product oracle") {
    auto tb = balanced200();
    Rng rng(31);
    for (int t : {2, 3, 50, 123, 200}) {
        const double x0 = rng.uniform(-2.0, 2.0);
        const double xi = rng.normal();
        const double x_t = rng.normal();
        // factor 1: q(x_t | x_{t-1}, xi) seen as a Gaussian in x_{t-1}
        const double a = tb.alpha[t];
        const double m1 = x_t / std::sqrt(a) - tb.gamma[t] * xi;
        const double v1 = (1.0 - a) / a * tb.sigma0 * tb.sigma0;
        // factor 2: q(x_{t-1} | x0, xi)
        const double ab_prev = tb.alpha_bar[t - 1];
        const double m2 =
            std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * tb.psi[t - 1] * xi;
        const double v2 = (1.0 - ab_prev) * tb.sigma0 * tb.sigma0;
        const double mu_oracle = (m1 * v2 + m2 * v1) / (v1 + v2);
        const double var_oracle = v1 * v2 / (v1 + v2);

        auto [mu, beta_tilde] = posterior_params({x_t}, {x0}, {xi}, t, tb);
        REQUIRE(mu[0] == Catch::Approx(mu_oracle).margin(1e-12));
        REQUIRE(beta_tilde == Catch::Approx(var_oracle).margin(1e-12));
    }
}

TEST_CASE("posterior rejects t < 2") {
    auto tb = balanced200();
    REQUIRE_THROWS_AS(posterior_params({0.0}, {0.0}, {0.0}, 1, tb), ConfigError);
}

TEST_CASE("mu_from_eps spot values") {
    // alpha_t = 0.9 and alpha_bar_t = 0.5 at t = 2
    BetaSchedule bs;
    bs.T = 2;
    bs.beta = {0.0, 1.0 - 0.5 / 0.9, 0.1};
    auto tb = derive_alpha_tables(bs);
    REQUIRE(tb.alpha[2] == Catch::Approx(0.9).epsilon(1e-14));
    REQUIRE(tb.alpha_bar[2] == Catch::Approx(0.5).epsilon(1e-14));

    const Vec zero(1, 0.0), one(1, 1.0);
    REQUIRE(mu_from_eps(one, zero, 2, tb)[0] == Catch::Approx(1.0 / std::sqrt(0.9)).epsilon(1e-12));
    const double expect = 1.0 / std::sqrt(0.9) - 0.1 / (std::sqrt(0.5) * std::sqrt(0.9));
    REQUIRE(mu_from_eps(one, one, 2, tb)[0] == Catch::Approx(expect).epsilon(1e-12));
}

TEST_CASE("feeding the true noise into mu_from_eps reproduces the posterior mean") {
    auto tb = balanced200();
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const int t = 2 + static_cast<int>(rng.uniform_int(0, tb.T - 2));
        const Vec x0 = rng.normal_vec(2);
        const Vec eps0 = rng.normal_vec(2);
        const Vec xi(2, rng.normal());
        const Vec x_t = marginal_from_eps0(x0, eps0, xi, t, tb);
        Vec eps_hat(2);
        for (int i = 0; i < 2; ++i) eps_hat[i] = tb.sigma0 * eps0[i] + tb.phi[t] * xi[i];
        const Vec mu = mu_from_eps(x_t, eps_hat, t, tb);
        auto [mu_post, bt] = posterior_params(x_t, x0, xi, t, tb);
        for (int i = 0; i < 2; ++i) REQUIRE(mu[i] == Catch::Approx(mu_post[i]).margin(1e-9));
    }
}

TEST_CASE("mu_from_eps refuses zero-SNR tables") {
    auto zs = zero_snr_rescale(derive_alpha_tables(build_log_linear_schedule(50, 0.01, 10.0)));
    REQUIRE_THROWS_AS(mu_from_eps({1.0}, {0.0}, 10, zs), ConfigError);
}

TEST_CASE("mu_from_v coefficient algebra collapses when alpha_t = 1") {
    ScheduleTables tb;
    tb.T = 2;
    tb.sigma0 = 1.0;
    tb.beta = {0.0, 0.5, 0.0};
    tb.alpha = {1.0, 0.5, 1.0};
    tb.alpha_bar = {1.0, 0.5, 0.5};
    tb.sigma_rev_sq = tb.beta;
    const Vec x_t = {3.0}, v_hat = {0.0};
    REQUIRE(mu_from_v(x_t, v_hat, 2, tb)[0] == Catch::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("mu_from_v with the true velocity matches the posterior mean") {
    auto tb = balanced200();
    Rng rng(53);
    for (int trial = 0; trial < 100; ++trial) {
        const int t = 2 + static_cast<int>(rng.uniform_int(0, tb.T - 2));
        const Vec x0 = rng.normal_vec(2);
        const Vec eps0 = rng.normal_vec(2);
        const Vec xi(2, rng.normal());
        const Vec x_t = marginal_from_eps0(x0, eps0, xi, t, tb);
        Vec v_t(2);
        for (int i = 0; i < 2; ++i) {
            const double noise = tb.sigma0 * eps0[i] + tb.psi[t] * xi[i];
            v_t[i] = std::sqrt(tb.alpha_bar[t]) * noise - std::sqrt(1.0 - tb.alpha_bar[t]) * x0[i];
        }
        const Vec mu = mu_from_v(x_t, v_t, t, tb);
        auto [mu_post, bt] = posterior_params(x_t, x0, xi, t, tb);
        for (int i = 0; i < 2; ++i) REQUIRE(mu[i] == Catch::Approx(mu_post[i]).margin(1e-9));

        // x0 reconstruction identity
        for (int i = 0; i < 2; ++i) {
            const double recon =
                std::sqrt(tb.alpha_bar[t]) * x_t[i] - std::sqrt(1.0 - tb.alpha_bar[t]) * v_t[i];
            REQUIRE(recon == Catch::Approx(x0[i]).margin(1e-9));
        }
    }
}

TEST_CASE("reverse_init reduces to N(0, I) for delta-zero xi") {
    auto tb = balanced200();
    Rng rng(61), clone(61);
    auto [x_T, xi] = reverse_init(XiSpec::delta_zero(3), tb, rng);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(xi[i] == 0.0);
        REQUIRE(x_T[i] == clone.normal());
    }
}

TEST_CASE("reverse_init marginal covariance is I + sigma_c^2 ones") {
    auto tb = balanced200();
    const XiSpec spec = XiSpec::correlated_gaussian(2, 1.0);
    Rng rng(71);
    const long N = 40000;
    double s0 = 0, s1 = 0, s00 = 0, s11 = 0, s01 = 0;
    for (long d = 0; d < N; ++d) {
        auto [x, xi] = reverse_init(spec, tb, rng);
        s0 += x[0];
        s1 += x[1];
        s00 += x[0] * x[0];
        s11 += x[1] * x[1];
        s01 += x[0] * x[1];
    }
    const double m0 = s0 / N, m1 = s1 / N;
    const double v0 = s00 / N - m0 * m0;
    const double v1 = s11 / N - m1 * m1;
    const double cov = s01 / N - m0 * m1;
    const double se_var = 2.0 * std::sqrt(2.0 / (N - 1.0));   // var ~ 2
    const double se_cov = 2.0 * std::sqrt(2.0 / (N - 1.0));
    REQUIRE(std::abs(v0 - 2.0) <= 3.0 * se_var);
    REQUIRE(std::abs(v1 - 2.0) <= 3.0 * se_var);
    REQUIRE(std::abs(cov - 1.0) <= 3.0 * se_cov);
}

TEST_CASE("reverse_init variance scales with sigma0") {
    auto tb = derive_alpha_tables(build_log_linear_schedule(10, 0.1, 5.0), 2.0);
    Rng rng(81);
    const long N = 40000;
    double s = 0, ss = 0;
    for (long d = 0; d < N; ++d) {
        auto [x, xi] = reverse_init(XiSpec::delta_zero(1), tb, rng);
        s += x[0];
        ss += x[0] * x[0];
    }
    const double mean = s / N;
    const double var = ss / N - mean * mean;
    REQUIRE(std::abs(var - 4.0) <= 3.0 * 4.0 * std::sqrt(2.0 / (N - 1.0)));
}

TEST_CASE("timestep range checks") {
    auto tb = balanced200();
    Rng rng(1);
    const Vec x(2, 0.0);
    REQUIRE_THROWS_AS(forward_step(x, x, 0, tb, rng), ConfigError);
    REQUIRE_THROWS_AS(forward_step(x, x, 201, tb, rng), ConfigError);
    REQUIRE_THROWS_AS(forward_marginal(x, x, -3, tb, rng), ConfigError);
}
