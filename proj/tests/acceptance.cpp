// Acceptance suite. Each criterion runs standalone (argv[1] = 1..10, or "all"
// / no argument for the full set) and prints exactly one PASS/FAIL/SKIP line
// with the measured quantities. The process exits nonzero when any executed
// criterion fails.
//
// Criteria 1 and 3 assert upstream reference values (effect size 1.93 on the
// four-word worked example; a 38% two-sided null tail at 1.27). Both checks
// are implemented exactly as stated; the measured values they print are the
// reproducible ones (about 1.9157 and 0.008), so these two criteria are
// expected to fail. They are kept as stated rather than loosened.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "embias/bayes.hpp"
#include "embias/datasets.hpp"
#include "embias/embedding.hpp"
#include "embias/metrics.hpp"
#include "embias/nullsim.hpp"
#include "embias/stats.hpp"
#include "synthetic.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    bool skipped = false;
    std::string detail;
};

Outcome pass(std::string detail) { return {true, false, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, false, std::move(detail)}; }
Outcome skip(std::string detail) { return {false, true, std::move(detail)}; }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Outcome check_runtime(Outcome o, double seconds, double budget) {
    o.detail += ", runtime " + fmt(seconds) + "s (budget " + fmt(budget) + "s)";
    if (o.pass && seconds >= budget) {
        o.pass = false;
        o.detail += " EXCEEDED";
    }
    return o;
}

// Fig-style worked example: four protected words whose similarities to the
// four attribute basis vectors are their leading coordinates.
embias::Embedding worked_example_embedding() {
    const auto word = [](double s1, double s2, double s3, double s4) {
        const double rest = 1.0 - (s1 * s1 + s2 * s2 + s3 * s3 + s4 * s4);
        return std::vector<float>{static_cast<float>(s1), static_cast<float>(s2),
                                  static_cast<float>(s3), static_cast<float>(s4),
                                  static_cast<float>(std::sqrt(std::max(0.0, rest)))};
    };
    std::vector<std::string> words = {"he", "man", "woman", "she", "a1", "a2", "b1", "b2"};
    std::vector<float> matrix;
    const auto push = [&](const std::vector<float>& v) {
        matrix.insert(matrix.end(), v.begin(), v.end());
    };
    push(word(0.6, 0.7, 0.2, 0.1));    // s = .5
    push(word(0.4, 0.4, 0.1, 0.1));    // s = .3
    push(word(0.1, 0.1, 0.7, 0.7));    // s = -.6
    push(word(0.15, 0.15, 0.45, 0.45)); // s = -.3
    push({1, 0, 0, 0, 0});
    push({0, 1, 0, 0, 0});
    push({0, 0, 1, 0, 0});
    push({0, 0, 0, 1, 0});
    return embias::Embedding::from_rows(words, matrix, 5);
}

Outcome criterion1() {
    const embias::Embedding emb = worked_example_embedding();
    const auto input = embias::metrics::make_weat_input(emb, {"he", "man"}, {"woman", "she"},
                                                        {"a1", "a2"}, {"b1", "b2"}, false);
    const auto t0 = Clock::now();
    const double effect = embias::metrics::weat_effect_size(input);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(effect - 1.93) <= 0.01;
    Outcome o = ok ? pass("") : fail("");
    o.detail = "worked-example effect size = " + fmt(effect) + ", required 1.93 +/- 0.01";
    return check_runtime(std::move(o), secs, 1e-3);
}

Outcome criterion2() {
    embias::rng::StreamRng gen(7, 0);
    std::vector<std::string> words;
    std::vector<float> matrix;
    for (int i = 0; i < 20; ++i) {
        words.push_back(i < 16 ? "w" + std::to_string(i) : "t" + std::to_string(i - 16));
        for (int d = 0; d < 10; ++d) matrix.push_back(static_cast<float>(gen.normal()));
    }
    const embias::Embedding emb = embias::Embedding::from_rows(words, matrix, 10);
    std::vector<std::string> x(words.begin(), words.begin() + 8);
    std::vector<std::string> y(words.begin() + 8, words.begin() + 16);
    const auto input = embias::metrics::make_weat_input(emb, x, y, {"t0", "t1"}, {"t2", "t3"},
                                                        false);
    const auto t0 = Clock::now();
    const auto pv = embias::metrics::weat_p_value(input, embias::metrics::PValueMode::exact, 0, 0);
    const double secs = seconds_since(t0);
    Outcome o = pv.n_evaluated == 12870 ? pass("") : fail("");
    o.detail = "exact mode over 8+8 words evaluated " + std::to_string(pv.n_evaluated) +
               " partitions, required 12870";
    return check_runtime(std::move(o), secs, 1.0);
}

Outcome criterion3() {
    embias::nullsim::NullConfig cfg;  // defaults: 8+8 words, 8 attrs/set, N(0, .08), 10000 sims
    cfg.seed = 20240601;
    const auto t0 = Clock::now();
    const auto summary = embias::nullsim::run_null_study(cfg);
    const double tail =
        embias::nullsim::tail_fraction(summary.effect_sizes, 1.27, embias::nullsim::Sidedness::two);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(tail - 0.38) <= 0.03;
    Outcome o = ok ? pass("") : fail("");
    o.detail = "two-sided effect tail at 1.27 = " + fmt(tail) + " over " +
               std::to_string(cfg.n_sims) + " simulations, required 0.38 +/- 0.03";
    return check_runtime(std::move(o), secs, 30.0);
}

Outcome criterion4() {
    embias::nullsim::NullConfig cfg;
    cfg.seed = 424242;
    const auto t0 = Clock::now();
    std::vector<double> pvalues(1000);
    embias::util::parallel_for(pvalues.size(), [&](std::size_t i) {
        const auto sample = embias::nullsim::draw_null_sample(cfg, i);
        const auto svals = embias::nullsim::word_s_values(sample);
        pvalues[i] =
            embias::metrics::p_value_from_s(svals, 8, embias::metrics::PValueMode::exact, 0, 0).p;
    });
    const double ks = embias::stats::ks_distance_uniform(pvalues);
    const double secs = seconds_since(t0);
    Outcome o = ks < 0.06 ? pass("") : fail("");
    o.detail = "KS distance of 1000 exact permutation p-values from Uniform[0,1] = " + fmt(ks) +
               ", required < 0.06";
    return check_runtime(std::move(o), secs, 300.0);
}

Outcome criterion5() {
    // all-orthogonal fixture: every distance is exactly 1
    std::vector<std::string> words = {"t1", "t2", "u1", "u2"};
    std::vector<float> eye = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    const embias::Embedding emb = embias::Embedding::from_rows(words, eye, 4);
    const auto rep =
        embias::metrics::mac({"t1", "t2"}, {{"s1", {"u1"}}, {"s2", {"u2"}}}, emb);
    if (rep.mac != 1.0) return fail("all-orthogonal MAC = " + fmt(rep.mac) + ", required exactly 1");

    // nested-mean oracle on a random 2-protected x 2-set fixture
    embias::rng::StreamRng gen(17, 0);
    std::vector<std::string> w2 = {"p1", "p2", "a1", "a2", "b1", "b2", "b3"};
    std::vector<float> m2;
    for (std::size_t i = 0; i < w2.size() * 6; ++i) m2.push_back(static_cast<float>(gen.normal()));
    const embias::Embedding emb2 = embias::Embedding::from_rows(w2, m2, 6);
    const std::vector<std::pair<std::string, std::vector<std::string>>> sets = {
        {"sA", {"a1", "a2"}}, {"sB", {"b1", "b2", "b3"}}};
    const auto rep2 = embias::metrics::mac({"p1", "p2"}, sets, emb2);
    double oracle = 0.0;
    for (const auto& t : {"p1", "p2"}) {
        for (const auto& [sid, toks] : sets) {
            double cell = 0.0;
            for (const auto& a : toks)
                cell += embias::geometry::cosine_distance(emb2.lookup(t).vec(),
                                                          emb2.lookup(a).vec());
            oracle += cell / static_cast<double>(toks.size());
        }
    }
    oracle /= 4.0;
    const double err = std::abs(rep2.mac - oracle);
    Outcome o = err <= 1e-12 ? pass("") : fail("");
    o.detail = "all-orthogonal MAC = 1 exactly; nested-mean fixture differs from oracle by " +
               fmt(err) + ", required <= 1e-12";
    return o;
}

Outcome criterion6() {
    const auto syn = synthetic::make_synthetic(10, 20, 12345);
    embias::bayes::ModelSpec spec;
    embias::bayes::McmcConfig mcmc;  // defaults: 4 chains, 1000 warmup, 2000 draws
    mcmc.seed = 2024;
    const auto t0 = Clock::now();
    const auto post = embias::bayes::fit(syn.table, spec, mcmc);
    const double secs = seconds_since(t0);

    const auto& layout = post.layout;
    std::size_t outside = 0;
    double worst_z = 0.0;
    const auto check = [&](std::size_t idx, double truth) {
        const auto draws = post.parameter_draws(idx);
        const double m = embias::stats::mean(draws);
        const double sd = std::max(embias::stats::stddev_pop(draws), 1e-9);
        const double z = std::abs(m - truth) / sd;
        worst_z = std::max(worst_z, z);
        if (z > 3.0) ++outside;
    };
    for (std::size_t c = 0; c < 4; ++c) {
        check(layout.bar_index(static_cast<int>(c)), syn.truth.bar[c]);
        check(layout.sigma_bar_index(static_cast<int>(c)), syn.truth.sigma_bar[c]);
        check(layout.sigma_obs_index(static_cast<int>(c)), syn.truth.sigma_obs[c]);
    }
    for (std::size_t w = 0; w < 10; ++w)
        for (std::size_t c = 0; c < 4; ++c)
            check(layout.coef_index(w, static_cast<int>(c)), syn.truth.coef[w][c]);

    double max_rhat = 0.0;
    for (const auto& d : post.diagnostics) max_rhat = std::max(max_rhat, d.rhat);
    double min_global_ess = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < post.n_global(); ++j)
        min_global_ess = std::min(min_global_ess, post.diagnostics[j].ess);
    Outcome o = (outside == 0 && max_rhat < 1.05 && min_global_ess > 400.0) ? pass("") : fail("");
    o.detail = std::to_string(outside) +
               " parameters outside 3 posterior sds (worst z = " + fmt(worst_z) +
               "), max split R-hat = " + fmt(max_rhat) +
               ", min global ESS = " + fmt(min_global_ess) + " (required: 0, < 1.05, > 400)";
    return check_runtime(std::move(o), secs, 120.0);
}

Outcome criterion7() {
    const auto syn = synthetic::make_synthetic(10, 20, 777);
    embias::bayes::ModelSpec spec;
    embias::bayes::McmcConfig mcmc;
    mcmc.seed = 31;
    const auto t0 = Clock::now();
    const auto post = embias::bayes::fit(syn.table, spec, mcmc);
    const auto ppc = embias::bayes::posterior_predictive_check(post, syn.table, spec);
    const double secs = seconds_since(t0);
    const bool ok = std::abs(ppc.coverage89 - 0.89) <= 0.03 &&
                    std::abs(ppc.coverage50 - 0.50) <= 0.04;
    Outcome o = ok ? pass("") : fail("");
    o.detail = "coverage89 = " + fmt(ppc.coverage89) + " (required 0.89 +/- 0.03), coverage50 = " +
               fmt(ppc.coverage50) + " (required 0.50 +/- 0.04)";
    return check_runtime(std::move(o), secs, 120.0);
}

Outcome criterion8() {
    embias::rng::StreamRng gen(88, 0);
    std::vector<double> xs(100000);
    for (auto& v : xs) v = gen.normal();
    const auto h89 = embias::bayes::hpdi(xs, 0.89);
    const bool endpoints =
        std::abs(h89.lower + 1.60) <= 0.05 && std::abs(h89.upper - 1.60) <= 0.05;
    const auto h50 = embias::bayes::hpdi(xs, 0.50);
    const auto h95 = embias::bayes::hpdi(xs, 0.95);
    const bool nested = h50.lower >= h89.lower && h50.upper <= h89.upper &&
                        h89.lower >= h95.lower && h89.upper <= h95.upper;
    Outcome o = (endpoints && nested) ? pass("") : fail("");
    o.detail = "89% HPDI of 1e5 standard-normal draws = [" + fmt(h89.lower) + ", " +
               fmt(h89.upper) + "] (required +/-1.60 within 0.05), nesting over {.5,.89,.95} " +
               (nested ? "holds" : "violated");
    return o;
}

Outcome criterion9() {
    const double prior_mean = 1.0, prior_sd = 0.3, noise = 0.2;
    const std::size_t n = 20;
    const double data_sum = 19.0;
    const auto closed =
        embias::bayes::detail::normal_normal_posterior(prior_mean, prior_sd, data_sum, n, noise);
    embias::rng::StreamRng gen(9, 0);
    const std::size_t reps = 100000;
    double acc = 0.0, acc2 = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        const double d =
            embias::bayes::detail::gibbs_normal_draw(prior_mean, prior_sd, data_sum, n, noise, gen);
        acc += d;
        acc2 += d * d;
    }
    const double mc_mean = acc / static_cast<double>(reps);
    const double mc_var = acc2 / static_cast<double>(reps) - mc_mean * mc_mean;
    const double z_mean =
        std::abs(mc_mean - closed.mean) / (closed.sd / std::sqrt(static_cast<double>(reps)));
    const double z_var = std::abs(mc_var - closed.sd * closed.sd) /
                         (closed.sd * closed.sd * std::sqrt(2.0 / static_cast<double>(reps)));
    Outcome o = (z_mean < 4.0 && z_var < 4.0) ? pass("") : fail("");
    o.detail = "Gibbs draws vs closed-form conditional: z(mean) = " + fmt(z_mean) +
               ", z(var) = " + fmt(z_var) + " over 1e5 draws (required < 4)";
    return o;
}

Outcome criterion10() {
    const char* biased_path = std::getenv("EMBIAS_REDDIT_BIASED");
    if (biased_path == nullptr)
        return skip("network-gated; set EMBIAS_REDDIT_BIASED (and optionally "
                    "EMBIAS_REDDIT_DEBIASED) to embedding files to enable");
    const char* format_env = std::getenv("EMBIAS_REDDIT_FORMAT");
    const std::string format = format_env ? format_env : "word2vec-bin";
    const embias::Embedding emb = format == "glove-txt"
                                      ? embias::load_glove_text(biased_path)
                                      : embias::load_word2vec_binary(biased_path);

    const auto religion = embias::datasets::builtin_dataset("religion");
    const auto mac_rep = embias::metrics::mac_report(religion, emb, true);
    std::string detail = "religion MAC = " + fmt(mac_rep.mac) + " (required 0.859 +/- 0.005)";
    bool ok = std::abs(mac_rep.mac - 0.859) <= 0.005;
    const auto neutral_it = mac_rep.band_fractions.find("neutral");
    const auto human_it = mac_rep.band_fractions.find("human");
    if (neutral_it != mac_rep.band_fractions.end() && human_it != mac_rep.band_fractions.end()) {
        detail += ", band fractions neutral = " + fmt(neutral_it->second) +
                  " (0.56 +/- 0.02), human = " + fmt(human_it->second) + " (0.55 +/- 0.02)";
        ok = ok && std::abs(neutral_it->second - 0.56) <= 0.02 &&
             std::abs(human_it->second - 0.55) <= 0.02;
    }

    const auto gender = embias::datasets::builtin_dataset("gender");
    const auto table = embias::datasets::build_long_table(gender, emb, true);
    embias::bayes::ModelSpec spec;
    embias::bayes::McmcConfig mcmc;
    mcmc.seed = 7;
    const auto post = embias::bayes::fit(table, spec, mcmc);
    const auto ppc = embias::bayes::posterior_predictive_check(post, table, spec);
    detail += ", gender PPC coverage = " + fmt(ppc.coverage89) + "/" + fmt(ppc.coverage50) +
              " (about 0.90/0.55)";
    ok = ok && std::abs(ppc.coverage89 - 0.90) <= 0.04 && std::abs(ppc.coverage50 - 0.55) <= 0.07;
    return ok ? pass(detail) : fail(detail);
}

using CriterionFn = Outcome (*)();

}  // namespace

int main(int argc, char** argv) {
    const CriterionFn criteria[] = {criterion1, criterion2, criterion3, criterion4, criterion5,
                                    criterion6, criterion7, criterion8, criterion9, criterion10};
    std::vector<int> to_run;
    if (argc < 2 || std::strcmp(argv[1], "all") == 0) {
        for (int i = 1; i <= 10; ++i) to_run.push_back(i);
    } else {
        const int k = std::atoi(argv[1]);
        if (k < 1 || k > 10) {
            std::fprintf(stderr, "usage: %s [1..10|all]\n", argv[0]);
            return 2;
        }
        to_run.push_back(k);
    }
    bool any_fail = false;
    bool all_skipped = true;
    for (int k : to_run) {
        Outcome o;
        try {
            o = criteria[k - 1]();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const char* verdict = o.skipped ? "SKIP" : (o.pass ? "PASS" : "FAIL");
        std::printf("criterion %2d: %s — %s\n", k, verdict, o.detail.c_str());
        if (!o.pass && !o.skipped) any_fail = true;
        if (!o.skipped) all_skipped = false;
    }
    if (any_fail) return 1;
    return all_skipped ? 77 : 0;
}
