#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "embias/nullsim.hpp"
#include "embias/stats.hpp"

using namespace embias::nullsim;
using embias::stats::mean;
using embias::stats::stddev_pop;

TEST_CASE("draw_null_sample: deterministic per (seed, stream)") {
    NullConfig cfg;
    cfg.seed = 42;
    const NullSample a = draw_null_sample(cfg, 3);
    const NullSample b = draw_null_sample(cfg, 3);
    CHECK(a.cells == b.cells);
    const NullSample c = draw_null_sample(cfg, 4);
    CHECK(a.cells != c.cells);
    CHECK(a.cells.size() == 16u * 16u);
}

TEST_CASE("draw_null_sample: cell moments match the configured normal") {
    NullConfig cfg;
    cfg.seed = 7;
    cfg.n_sims = 1;
    // pool ~1e6 draws across streams
    std::vector<double> pool;
    pool.reserve(1u << 20);
    for (std::uint64_t s = 0; s < (1u << 20) / 256; ++s) {
        const NullSample smp = draw_null_sample(cfg, s);
        pool.insert(pool.end(), smp.cells.begin(), smp.cells.end());
    }
    CHECK(mean(pool) == Catch::Approx(0.0).margin(0.001));
    CHECK(stddev_pop(pool) == Catch::Approx(0.08).margin(0.001));
}

TEST_CASE("bootstrap_partitions: C(16,8) entries, symmetric about zero") {
    NullConfig cfg;
    cfg.seed = 11;
    const NullSample smp = draw_null_sample(cfg, 0);
    const PartitionDistributions parts = bootstrap_partitions(smp);
    REQUIRE(parts.s_distribution.size() == 12870);
    REQUIRE(parts.effect_distribution.size() == 12870);
    // relabeling symmetry: the complement of each split negates s, so the
    // mean over all partitions is exactly zero up to rounding
    CHECK(mean(parts.s_distribution) == Catch::Approx(0.0).margin(1e-12));
    // effect values are a fixed rescaling of s values within one sample
    const double sd = stddev_pop(word_s_values(smp));
    for (std::size_t i = 0; i < 100; ++i) {
        const double expect = parts.s_distribution[i] / 8.0 / sd;
        CHECK(parts.effect_distribution[i] == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("bootstrap_partitions: identical cells give all-zero s values") {
    NullSample smp;
    smp.n_per_group = 3;
    smp.n_attrs_per_set = 2;
    smp.cells.assign(6 * 4, 0.7);
    const PartitionDistributions parts = bootstrap_partitions(smp);
    CHECK(parts.s_distribution.size() == 20);  // C(6,3)
    for (double v : parts.s_distribution) CHECK(v == 0.0);
    for (double v : parts.effect_distribution) CHECK(v == 0.0);
}

TEST_CASE("run_null_study: reproducible and sized by config") {
    NullConfig cfg;
    cfg.n_sims = 500;
    cfg.seed = 123;
    const SimulationSummary a = run_null_study(cfg);
    const SimulationSummary b = run_null_study(cfg);
    CHECK(a.effect_sizes == b.effect_sizes);
    CHECK(a.s_statistics == b.s_statistics);
    CHECK(a.effect_sizes.size() == 500);
}

TEST_CASE("run_null_study: symmetric null puts half the mass above zero") {
    NullConfig cfg;
    cfg.n_sims = 10000;
    cfg.seed = 9;
    const SimulationSummary s = run_null_study(cfg);
    CHECK(tail_fraction(s.effect_sizes, 0.0, Sidedness::one) == Catch::Approx(0.5).margin(0.02));
    CHECK(tail_fraction(s.effect_sizes, 1e6, Sidedness::two) == 0.0);
}

TEST_CASE("run_null_study: effect-size tail matches the sampling-distribution oracle") {
    // oracle route: per-word s values are exactly N(0, sigma*sqrt(2/n_attrs)),
    // so the effect-size null law can be simulated without the cell layer;
    // the analytic tail P(|e| >= 1.27) equals P(|t_14| >= 3.0756) ~ 0.0082
    NullConfig cfg;
    cfg.n_sims = 20000;
    cfg.seed = 31;
    const SimulationSummary s = run_null_study(cfg);
    const double observed = tail_fraction(s.effect_sizes, 1.27, Sidedness::two);

    embias::rng::StreamRng gen(77, 0);
    const double s_sd = cfg.sigma * std::sqrt(2.0 / cfg.n_attrs_per_set);
    std::size_t hits = 0;
    const int reps = 20000;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> sv(16);
        for (auto& v : sv) v = gen.normal(0.0, s_sd);
        if (std::abs(embias::metrics::effect_size_from(sv, 8)) >= 1.27) ++hits;
    }
    const double oracle = static_cast<double>(hits) / reps;
    CHECK(observed == Catch::Approx(oracle).margin(0.004));
    CHECK(observed == Catch::Approx(0.0082).margin(0.004));
}

TEST_CASE("pre-averaging shrinks spread: partition s values vs raw cells") {
    NullConfig cfg;
    cfg.seed = 13;
    for (std::uint64_t stream = 0; stream < 20; ++stream) {
        const NullSample smp = draw_null_sample(cfg, stream);
        const PartitionDistributions parts = bootstrap_partitions(smp);
        const double raw_sd = stddev_pop(smp.cells);
        CHECK(stddev_pop(parts.s_distribution) <
              raw_sd * 2.0 * static_cast<double>(cfg.n_attrs_per_set));
    }
}

TEST_CASE("tail_fraction counting") {
    const std::vector<double> xs = {-1.0, 0.0, 1.0};
    CHECK(tail_fraction(xs, 1.0, Sidedness::two) == Catch::Approx(2.0 / 3.0));
    CHECK(tail_fraction(xs, -1e308, Sidedness::one) == 1.0);
    CHECK_THROWS_AS(tail_fraction(std::vector<double>{}, 0.0, Sidedness::one), NullSimError);
}

TEST_CASE("tail_fraction on a standard normal sample matches the CDF oracle") {
    embias::rng::StreamRng gen(101, 0);
    std::vector<double> xs(100000);
    for (auto& v : xs) v = gen.normal();
    // 2 * (1 - Phi(1.96)) = 0.04999...
    const double expected = 2.0 * (1.0 - embias::stats::normal_cdf(1.96));
    CHECK(tail_fraction(xs, 1.96, Sidedness::two) == Catch::Approx(expected).margin(0.005));
}

TEST_CASE("welch_t_test: frozen reference values") {
    // scipy.stats.ttest_ind([1..5], [2..6], equal_var=False) and the matching
    // Welch-Satterthwaite interval
    const std::vector<double> a = {1, 2, 3, 4, 5};
    const std::vector<double> b = {2, 3, 4, 5, 6};
    const WelchResult r = welch_t_test(a, b);
    CHECK(r.t == Catch::Approx(-1.0).margin(1e-6));
    CHECK(r.df == Catch::Approx(8.0).margin(1e-6));
    CHECK(r.p == Catch::Approx(0.346593507087).margin(1e-6));
    CHECK(r.ci_low == Catch::Approx(-3.306004135204).margin(1e-6));
    CHECK(r.ci_high == Catch::Approx(1.306004135204).margin(1e-6));
}

TEST_CASE("welch_t_test: identical groups give t=0, p=1, centered CI") {
    const std::vector<double> a = {1, 2, 3, 4};
    const WelchResult r = welch_t_test(a, a);
    CHECK(r.t == 0.0);
    CHECK(r.p == 1.0);
    CHECK(r.ci_low == Catch::Approx(-r.ci_high).margin(1e-12));
}

TEST_CASE("welch_t_test: degenerate variance is an error") {
    const std::vector<double> konst = {2, 2, 2};
    CHECK_THROWS_AS(welch_t_test(konst, konst), NullSimError);
    CHECK_THROWS_AS(welch_t_test(std::vector<double>{1}, konst), NullSimError);
}

TEST_CASE("welch_t_test: p < .05 iff the 95% CI excludes zero") {
    embias::rng::StreamRng gen(2024, 0);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> a(5 + rep % 7), b(4 + rep % 5);
        const double shift = gen.uniform(-0.8, 0.8);
        for (auto& v : a) v = gen.normal(0.0, 1.0);
        for (auto& v : b) v = gen.normal(shift, 1.0);
        const WelchResult r = welch_t_test(a, b);
        const bool significant = r.p < 0.05;
        const bool excludes_zero = r.ci_low > 0.0 || r.ci_high < 0.0;
        CHECK(significant == excludes_zero);
    }
}
