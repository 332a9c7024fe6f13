#pragma once

// Null generative model for the false-confidence demonstration: association
// scores drawn i.i.d. Normal(mu, sigma) for two groups of synthetic protected
// words, reduced to WEAT statistics per sample, with exhaustive bootstrap
// partition distributions, tail fractions and Welch t-tests on the raw draws.
//
// Simulations are reproducible and embarrassingly parallel: sample i is fully
// determined by (seed, stream index i), so worker layout never changes the
// output.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "embias/metrics.hpp"
#include "embias/rng.hpp"
#include "embias/stats.hpp"
#include "embias/util.hpp"

namespace embias::nullsim {

class NullSimError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct NullConfig {
    int n_per_group = 8;      // protected words per group
    int n_attrs_per_set = 8;  // draws against each attribute set per word
    double mu = 0.0;
    double sigma = 0.08;      // about the empirical spread of neutral-word scores
    int n_sims = 10000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_per_group < 2) throw NullSimError("n_per_group must be >= 2");
        if (n_attrs_per_set < 1) throw NullSimError("n_attrs_per_set must be >= 1");
        if (!(sigma > 0.0)) throw NullSimError("sigma must be positive");
        if (n_sims < 1) throw NullSimError("n_sims must be >= 1");
    }
};

// One synthetic dataset: a (2n) x (2 * n_attrs) matrix of scores. Row w holds
// word w's draws, the first n_attrs columns against set A, the rest against B.
struct NullSample {
    int n_per_group = 0;
    int n_attrs_per_set = 0;
    std::vector<double> cells;  // row-major

    std::span<const double> row(int w) const {
        return std::span<const double>(cells.data() +
                                           static_cast<std::size_t>(w) * 2 * n_attrs_per_set,
                                       static_cast<std::size_t>(2) * n_attrs_per_set);
    }
    std::span<const double> draws_a(int w) const { return row(w).first(n_attrs_per_set); }
    std::span<const double> draws_b(int w) const { return row(w).subspan(n_attrs_per_set); }
};

inline NullSample draw_null_sample(const NullConfig& cfg, std::uint64_t stream_index) {
    cfg.validate();
    NullSample s;
    s.n_per_group = cfg.n_per_group;
    s.n_attrs_per_set = cfg.n_attrs_per_set;
    const std::size_t n_cells =
        static_cast<std::size_t>(2 * cfg.n_per_group) * 2 * cfg.n_attrs_per_set;
    s.cells.resize(n_cells);
    rng::StreamRng gen(cfg.seed, stream_index);
    for (auto& c : s.cells) c = gen.normal(cfg.mu, cfg.sigma);
    return s;
}

// Per-word association score: mean of the A draws minus mean of the B draws.
inline std::vector<double> word_s_values(const NullSample& sample) {
    const int n_words = 2 * sample.n_per_group;
    std::vector<double> s(n_words);
    for (int w = 0; w < n_words; ++w) {
        double sa = 0.0, sb = 0.0;
        for (double v : sample.draws_a(w)) sa += v;
        for (double v : sample.draws_b(w)) sb += v;
        s[w] = (sa - sb) / static_cast<double>(sample.n_attrs_per_set);
    }
    return s;
}

struct PartitionDistributions {
    std::vector<double> s_distribution;
    std::vector<double> effect_distribution;
};

// Every equal split of the 2n synthetic words, reduced to its s statistic and
// effect size. The effect denominator (population sd of all per-word scores)
// does not depend on the labeling, so a degenerate zero spread yields zero
// effects rather than an error.
inline PartitionDistributions bootstrap_partitions(const NullSample& sample) {
    const std::vector<double> svals = word_s_values(sample);
    const std::size_t n = svals.size();
    const std::size_t k = static_cast<std::size_t>(sample.n_per_group);
    const std::uint64_t n_parts = metrics::n_exact_partitions(n, k);

    double total = 0.0;
    for (double v : svals) total += v;
    const double sd = stats::stddev_pop(svals);
    const double mean_scale = 1.0 / static_cast<double>(k);

    PartitionDistributions out;
    out.s_distribution.reserve(n_parts);
    out.effect_distribution.reserve(n_parts);
    metrics::for_each_partition(n, k, [&](std::span<const std::size_t> xs) {
        double sx = 0.0;
        for (std::size_t i : xs) sx += svals[i];
        const double stat = 2.0 * sx - total;
        out.s_distribution.push_back(stat);
        out.effect_distribution.push_back(sd == 0.0 ? 0.0 : stat * mean_scale / sd);
    });
    return out;
}

struct SimulationSummary {
    NullConfig config;
    std::vector<double> effect_sizes;   // one per simulation, original labeling
    std::vector<double> s_statistics;
};

// n_sims independent samples, each reduced to its observed statistic and
// effect size (no bootstrap); parallel across stream indices.
inline SimulationSummary run_null_study(const NullConfig& cfg) {
    cfg.validate();
    SimulationSummary out;
    out.config = cfg;
    out.effect_sizes.resize(cfg.n_sims);
    out.s_statistics.resize(cfg.n_sims);
    util::parallel_for(static_cast<std::size_t>(cfg.n_sims), [&](std::size_t i) {
        const NullSample sample = draw_null_sample(cfg, i);
        const std::vector<double> svals = word_s_values(sample);
        const std::size_t k = static_cast<std::size_t>(cfg.n_per_group);
        out.s_statistics[i] = metrics::s_statistic_from(svals, k);
        out.effect_sizes[i] = metrics::effect_size_from(svals, k);
    });
    return out;
}

enum class Sidedness { one, two };

// One-sided: fraction with v >= threshold. Two-sided: fraction with
// |v| >= |threshold|.
inline double tail_fraction(std::span<const double> values, double threshold, Sidedness side) {
    if (values.empty()) throw NullSimError("tail_fraction: empty input");
    std::size_t hits = 0;
    if (side == Sidedness::one) {
        for (double v : values)
            if (v >= threshold) ++hits;
    } else {
        const double t = std::abs(threshold);
        for (double v : values)
            if (std::abs(v) >= t) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 0.0;      // two-sided
    double ci_low = 0.0;   // 95% CI for mean(a) - mean(b)
    double ci_high = 0.0;
};

// Welch unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
inline WelchResult welch_t_test(std::span<const double> group_a, std::span<const double> group_b) {
    if (group_a.size() < 2 || group_b.size() < 2)
        throw NullSimError("welch_t_test: each group needs >= 2 values");
    const double na = static_cast<double>(group_a.size());
    const double nb = static_cast<double>(group_b.size());
    const double ma = stats::mean(group_a);
    const double mb = stats::mean(group_b);
    const double va = stats::variance_sample(group_a);
    const double vb = stats::variance_sample(group_b);
    const double se2 = va / na + vb / nb;
    if (se2 == 0.0) throw NullSimError("welch_t_test: degenerate variance");
    const double se = std::sqrt(se2);
    WelchResult r;
    r.t = (ma - mb) / se;
    r.df = se2 * se2 /
           ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    r.p = stats::student_t_two_sided_p(r.t, r.df);
    const double tq = stats::student_t_quantile(0.975, r.df);
    r.ci_low = (ma - mb) - tq * se;
    r.ci_high = (ma - mb) + tq * se;
    return r;
}

}  // namespace embias::nullsim
