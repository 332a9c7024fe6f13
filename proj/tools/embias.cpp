// embias: bias measurement for static word embeddings.
//
// Subcommands: weat, mac, nullsim, fit, ppc, compare, dump-table, directbias.
// Every run writes a JSON report plus a manifest with the resolved
// configuration and input digests; CSV tables and SVG plots are opt-in.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "embias/bayes.hpp"
#include "embias/cli_config.hpp"
#include "embias/datasets.hpp"
#include "embias/embedding.hpp"
#include "embias/geometry.hpp"
#include "embias/metrics.hpp"
#include "embias/nullsim.hpp"
#include "embias/report.hpp"
#include "embias/svg.hpp"
#include "embias/version.hpp"

namespace fs = std::filesystem;
using embias::cli::RunConfig;
using embias::report::ordered_json;

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_error = 1;
constexpr int k_exit_nonconverged = 3;

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for digest");
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    for (;;) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
        if (!in) break;
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

class StageTimer {
  public:
    explicit StageTimer(std::map<std::string, double>& sink) : sink_(sink) {}
    template <typename F>
    auto time(const std::string& stage, F&& fn) {
        std::fprintf(stderr, "[embias] %s...\n", stage.c_str());
        const auto t0 = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            sink_[stage] = seconds_since(t0);
        } else {
            auto result = fn();
            sink_[stage] = seconds_since(t0);
            return result;
        }
    }

  private:
    static double seconds_since(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    std::map<std::string, double>& sink_;
};

embias::Embedding load_embedding(const std::string& path, const std::string& format) {
    if (format == "word2vec-bin") return embias::load_word2vec_binary(path);
    return embias::load_glove_text(path);
}

embias::datasets::BiasDataset load_dataset(const RunConfig& cfg) {
    if (!cfg.dataset.empty()) return embias::datasets::builtin_dataset(cfg.dataset);
    return embias::datasets::load_dataset(cfg.dataset_file);
}

std::string dataset_label(const RunConfig& cfg) {
    return !cfg.dataset.empty() ? cfg.dataset : cfg.dataset_file;
}

// Two protected classes for WEAT: --classes wins, a two-class dataset needs
// no flag, anything else is an error naming the available classes.
std::pair<std::string, std::string> pick_classes(const embias::datasets::BiasDataset& ds,
                                                 const RunConfig& cfg) {
    const auto classes = ds.class_ids();
    if (!cfg.classes.empty()) {
        const auto comma = cfg.classes.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("--classes expects '<classX>,<classY>'");
        return {cfg.classes.substr(0, comma), cfg.classes.substr(comma + 1)};
    }
    if (classes.size() == 2) return {classes[0], classes[1]};
    std::string available;
    for (const auto& c : classes) available += available.empty() ? c : ", " + c;
    throw std::runtime_error("dataset '" + ds.name + "' has " + std::to_string(classes.size()) +
                             " classes; pick two with --classes (available: " + available + ")");
}

embias::bayes::ModelSpec model_spec(const RunConfig& cfg) {
    embias::bayes::ModelSpec spec;
    spec.noise = cfg.shared_sigma ? embias::bayes::NoiseStructure::shared
                                  : embias::bayes::NoiseStructure::per_category;
    return spec;
}

embias::bayes::McmcConfig mcmc_config(const RunConfig& cfg) {
    embias::bayes::McmcConfig m;
    m.chains = cfg.chains;
    m.warmup = cfg.warmup;
    m.draws = cfg.draws;
    m.seed = cfg.seed;
    return m;
}

std::vector<embias::svg::IntervalEntry> interval_entries(const embias::bayes::Posterior& post,
                                                         double mass) {
    std::vector<embias::svg::IntervalEntry> entries;
    for (const auto& s : embias::bayes::summarize(post, mass))
        entries.push_back({s.name, s.interval.lower, s.mean, s.interval.upper, 0});
    return entries;
}

int run(const RunConfig& cfg) {
    const fs::path outdir(cfg.output_dir);
    fs::create_directories(outdir);

    embias::report::RunManifest manifest;
    manifest.subcommand = cfg.subcommand;
    manifest.resolved_config = cfg.to_json();
    StageTimer timer(manifest.timings_seconds);
    int exit_code = k_exit_ok;

    if (cfg.subcommand == "nullsim") {
        embias::nullsim::NullConfig nc;
        nc.n_per_group = cfg.n_per_group;
        nc.n_attrs_per_set = cfg.n_attrs_per_set;
        nc.mu = cfg.mu;
        nc.sigma = cfg.sigma;
        nc.n_sims = cfg.n_sims;
        nc.seed = cfg.seed;
        const auto summary =
            timer.time("simulate", [&] { return embias::nullsim::run_null_study(nc); });
        timer.time("emit", [&] {
            embias::report::write_json(outdir / "nullsim.json",
                                       embias::report::nullsim_json(summary, cfg.tail_at));
            if (cfg.emit_csv)
                embias::report::atomic_write(outdir / "nullsim_sims.csv",
                                             embias::report::nullsim_csv(summary));
            if (cfg.emit_svg) {
                embias::report::atomic_write(
                    outdir / "nullsim_effect_hist.svg",
                    embias::svg::histogram(summary.effect_sizes, 60,
                                           "null-model effect sizes (" +
                                               std::to_string(cfg.n_sims) + " simulations)",
                                           {-cfg.tail_at, cfg.tail_at}));
                embias::report::atomic_write(
                    outdir / "nullsim_s_hist.svg",
                    embias::svg::histogram(summary.s_statistics, 60, "null-model s statistics"));
                // single-sample bootstrap view: every equal split of one draw
                const auto sample = embias::nullsim::draw_null_sample(nc, 0);
                const auto parts = embias::nullsim::bootstrap_partitions(sample);
                embias::report::atomic_write(
                    outdir / "nullsim_bootstrap_s_hist.svg",
                    embias::svg::histogram(parts.s_distribution, 60,
                                           "bootstrap s statistics of one null sample"));
                embias::report::atomic_write(
                    outdir / "nullsim_bootstrap_effect_hist.svg",
                    embias::svg::histogram(parts.effect_distribution, 60,
                                           "bootstrap effect sizes of one null sample"));
            }
        });
    } else {
        const auto ds = load_dataset(cfg);
        if (!cfg.dataset_file.empty())
            manifest.input_digests[cfg.dataset_file] = sha256_file(cfg.dataset_file);
        std::vector<embias::Embedding> embs;
        timer.time("load_embeddings", [&] {
            for (const auto& path : cfg.embeddings) {
                embs.push_back(load_embedding(path, cfg.format));
                manifest.input_digests[path] = sha256_file(path);
            }
        });
        const embias::Embedding& emb = embs.front();

        if (cfg.subcommand == "weat") {
            const auto [cx, cy] = pick_classes(ds, cfg);
            const auto input = embias::metrics::weat_input_from_dataset(ds, emb, cx, cy,
                                                                        cfg.skip_missing);
            const auto mode = cfg.p_mode == "exact" ? embias::metrics::PValueMode::exact
                                                    : embias::metrics::PValueMode::sampled;
            const auto rep = timer.time("weat", [&] {
                return embias::metrics::run_weat(input, mode, cfg.p_samples, cfg.seed,
                                                 cfg.conservative_p);
            });
            manifest.skipped_tokens = rep.skipped;
            timer.time("emit", [&] {
                embias::report::write_json(outdir / "weat.json",
                                           embias::report::weat_json(rep, dataset_label(cfg), cx, cy));
                if (cfg.emit_csv)
                    embias::report::atomic_write(outdir / "weat_s.csv",
                                                 embias::report::weat_csv(rep));
                if (cfg.emit_svg && mode == embias::metrics::PValueMode::exact) {
                    std::vector<double> svals;
                    for (const auto& t : input.x)
                        svals.push_back(embias::metrics::weat_s_word(t, input.a, input.b, emb));
                    for (const auto& t : input.y)
                        svals.push_back(embias::metrics::weat_s_word(t, input.a, input.b, emb));
                    double total = 0.0;
                    for (double v : svals) total += v;
                    std::vector<double> partition_stats;
                    embias::metrics::for_each_partition(
                        svals.size(), input.x.size(), [&](std::span<const std::size_t> xs) {
                            double sx = 0.0;
                            for (std::size_t i : xs) sx += svals[i];
                            partition_stats.push_back(2.0 * sx - total);
                        });
                    embias::report::atomic_write(
                        outdir / "weat_partitions.svg",
                        embias::svg::histogram(partition_stats, 60,
                                               "s statistic over all equal splits",
                                               {rep.s_statistic}));
                }
            });
        } else if (cfg.subcommand == "mac") {
            const auto rep = timer.time(
                "mac", [&] { return embias::metrics::mac_report(ds, emb, cfg.skip_missing); });
            manifest.skipped_tokens = rep.skipped;
            timer.time("emit", [&] {
                embias::report::write_json(outdir / "mac.json",
                                           embias::report::mac_json(rep, dataset_label(cfg)));
                if (cfg.emit_csv)
                    embias::report::atomic_write(outdir / "mac_pairs.csv",
                                                 embias::report::mac_csv(rep));
                if (cfg.emit_svg) {
                    const auto table = embias::datasets::build_long_table(ds, emb, cfg.skip_missing);
                    std::map<std::string, std::vector<double>> sims;
                    for (const auto& r : table.rows)
                        sims[std::string(embias::datasets::to_string(r.category))].push_back(
                            1.0 - r.distance);
                    std::vector<embias::svg::Series> series;
                    for (const auto& [cat, xs] : sims) {
                        double lo = xs[0], hi = xs[0];
                        for (double v : xs) {
                            lo = std::min(lo, v);
                            hi = std::max(hi, v);
                        }
                        embias::svg::Series s;
                        s.label = cat;
                        s.x.resize(128);
                        for (std::size_t g = 0; g < s.x.size(); ++g)
                            s.x[g] = lo + (hi - lo) * static_cast<double>(g) / 127.0;
                        s.y = embias::stats::gaussian_kde(xs, s.x);
                        series.push_back(std::move(s));
                    }
                    embias::report::atomic_write(
                        outdir / "mac_density.svg",
                        embias::svg::curve_plot(series, "similarity densities by category"));
                }
            });
        } else if (cfg.subcommand == "dump-table") {
            const auto table = timer.time("build_table", [&] {
                return embias::datasets::build_long_table(ds, emb, cfg.skip_missing);
            });
            manifest.skipped_tokens = table.skipped_tokens;
            timer.time("emit", [&] {
                embias::report::atomic_write(outdir / "table.csv",
                                             embias::datasets::long_table_csv(table));
            });
        } else if (cfg.subcommand == "directbias") {
            const auto classes = ds.class_ids();
            if (classes.size() != 2)
                throw std::runtime_error("directbias needs a two-class dataset with paired words");
            auto first = ds.protected_of_class(classes[0]);
            auto second = ds.protected_of_class(classes[1]);
            if (first.size() != second.size())
                throw std::runtime_error("directbias: classes list different word counts (" +
                                         std::to_string(first.size()) + " vs " +
                                         std::to_string(second.size()) + "), cannot pair by index");
            std::vector<std::string> skipped;
            std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
            for (std::size_t i = 0; i < first.size(); ++i) {
                const auto a = emb.lookup(first[i]);
                const auto b = emb.lookup(second[i]);
                if (!a.found() || !b.found()) {
                    if (!cfg.skip_missing)
                        throw std::runtime_error("pair (" + first[i] + ", " + second[i] +
                                                 ") has a token missing from the embedding");
                    if (!a.found()) skipped.push_back(first[i]);
                    if (!b.found()) skipped.push_back(second[i]);
                    continue;
                }
                pairs.emplace_back(std::vector<double>(a.vec().begin(), a.vec().end()),
                                   std::vector<double>(b.vec().begin(), b.vec().end()));
            }
            if (pairs.empty()) throw std::runtime_error("directbias: no resolvable pairs");
            std::vector<std::vector<double>> neutral_vecs;
            for (const auto& t : ds.neutral) {
                const auto r = emb.lookup(t);
                if (r.found()) {
                    neutral_vecs.emplace_back(r.vec().begin(), r.vec().end());
                } else if (cfg.skip_missing) {
                    skipped.push_back(t);
                } else {
                    throw std::runtime_error("neutral token '" + t + "' missing from the embedding");
                }
            }
            if (neutral_vecs.empty()) throw std::runtime_error("directbias: no resolvable neutral words");
            const double value = timer.time("directbias", [&] {
                const auto dir = embias::geometry::principal_direction(pairs);
                return embias::geometry::direct_bias(neutral_vecs, dir, cfg.bias_c);
            });
            manifest.skipped_tokens = skipped;
            timer.time("emit", [&] {
                embias::report::write_json(
                    outdir / "directbias.json",
                    embias::report::directbias_json(value, cfg.bias_c, neutral_vecs.size(),
                                                    dataset_label(cfg), skipped));
            });
        } else if (cfg.subcommand == "fit" || cfg.subcommand == "ppc") {
            const auto table = timer.time("build_table", [&] {
                return embias::datasets::build_long_table(ds, emb, cfg.skip_missing);
            });
            manifest.skipped_tokens = table.skipped_tokens;
            const auto spec = model_spec(cfg);
            const auto post = timer.time(
                "fit", [&] { return embias::bayes::fit(table, spec, mcmc_config(cfg)); });
            if (!post.converged()) {
                std::fprintf(stderr, "[embias] warning: convergence thresholds not met\n");
                if (!cfg.allow_nonconverged) exit_code = k_exit_nonconverged;
            }
            timer.time("emit", [&] {
                embias::report::write_json(outdir / "diagnostics.json",
                                           embias::report::fit_diagnostics_json(post, cfg.hpdi_mass));
                embias::report::atomic_write(outdir / "posterior_draws.csv",
                                             embias::report::posterior_csv(post));
                if (cfg.emit_svg)
                    embias::report::atomic_write(
                        outdir / "interval_plot.svg",
                        embias::svg::interval_plot(interval_entries(post, cfg.hpdi_mass),
                                                   "posterior means with HPDIs"));
            });
            if (cfg.subcommand == "ppc") {
                const auto ppc = timer.time("ppc", [&] {
                    return embias::bayes::posterior_predictive_check(post, table, spec);
                });
                timer.time("emit_ppc", [&] {
                    embias::report::write_json(outdir / "ppc.json", embias::report::ppc_json(ppc));
                    if (cfg.emit_svg) {
                        std::vector<embias::svg::Series> series;
                        series.push_back({"predicted", ppc.density.grid, ppc.density.predicted});
                        series.push_back({"observed", ppc.density.grid, ppc.density.observed});
                        embias::report::atomic_write(
                            outdir / "ppc_density.svg",
                            embias::svg::curve_plot(series, "predicted vs observed distances"));
                    }
                });
            }
        } else if (cfg.subcommand == "compare") {
            const auto spec = model_spec(cfg);
            const auto table_before = timer.time("build_table_before", [&] {
                return embias::datasets::build_long_table(ds, embs[0], cfg.skip_missing);
            });
            const auto table_after = timer.time("build_table_after", [&] {
                return embias::datasets::build_long_table(ds, embs[1], cfg.skip_missing);
            });
            const auto before = timer.time("fit_before", [&] {
                return embias::bayes::fit(table_before, spec, mcmc_config(cfg));
            });
            const auto after = timer.time("fit_after", [&] {
                return embias::bayes::fit(table_after, spec, mcmc_config(cfg));
            });
            if (!before.converged() || !after.converged()) {
                std::fprintf(stderr, "[embias] warning: convergence thresholds not met\n");
                if (!cfg.allow_nonconverged) exit_code = k_exit_nonconverged;
            }
            const auto rep = timer.time("compare", [&] {
                return embias::bayes::compare(before, after, cfg.hpdi_mass);
            });
            timer.time("emit", [&] {
                embias::report::write_json(outdir / "compare.json",
                                           embias::report::compare_json(rep));
                if (cfg.emit_svg) {
                    std::vector<embias::svg::IntervalEntry> entries;
                    for (const auto& e : rep.parameters) {
                        entries.push_back({e.name + " (before)", e.hpdi_before.lower,
                                           e.mean_before, e.hpdi_before.upper, 0});
                        entries.push_back({e.name + " (after)", e.hpdi_after.lower, e.mean_after,
                                           e.hpdi_after.upper, 1});
                    }
                    embias::report::atomic_write(
                        outdir / "compare_intervals.svg",
                        embias::svg::interval_plot(entries, "posterior intervals before vs after"));
                }
            });
        } else {
            throw std::runtime_error("unhandled subcommand '" + cfg.subcommand + "'");
        }
    }

    embias::report::write_json(outdir / "manifest.json", manifest.to_json());
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    if (args.size() == 2 && (args[1] == "--version" || args[1] == "-V")) {
        std::printf("embias %s\n", embias::k_version);
        return k_exit_ok;
    }
    RunConfig cfg;
    try {
        cfg = embias::cli::parse_config(args);
    } catch (const embias::cli::HelpRequest& e) {
        std::printf("%s\n", e.what());
        return k_exit_ok;
    } catch (const embias::cli::UsageError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return k_exit_error;
    }
    try {
        return run(cfg);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return k_exit_error;
    }
}
