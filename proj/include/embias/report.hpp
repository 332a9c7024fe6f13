#pragma once

// Report emission: JSON documents, CSV tables and the run manifest. Every
// float is rounded to 9 significant decimals before serialization so that
// reruns of an identical configuration are byte-identical; files are written
// atomically (temp file + rename).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "embias/bayes.hpp"
#include "embias/datasets.hpp"
#include "embias/metrics.hpp"
#include "embias/nullsim.hpp"
#include "embias/version.hpp"

namespace embias::report {

using nlohmann::ordered_json;

class ReportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Round to 9 significant decimals through the shortest round-trip text form.
inline double round_sig9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline ordered_json num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return round_sig9(v);
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ReportError("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ReportError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ReportError("rename failed for '" + path.string() + "': " + ec.message());
}

inline void write_json(const std::filesystem::path& path, const ordered_json& doc) {
    atomic_write(path, doc.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Manifest

struct RunManifest {
    std::string subcommand;
    ordered_json resolved_config;                 // full flags after defaulting
    std::map<std::string, std::string> input_digests;  // path -> hex digest
    std::vector<std::string> skipped_tokens;
    std::map<std::string, double> timings_seconds;

    ordered_json to_json() const {
        ordered_json j;
        j["tool"] = "embias";
        j["version"] = k_version;
        j["subcommand"] = subcommand;
        j["config"] = resolved_config;
        j["input_digests"] = input_digests;
        j["skipped_tokens"] = skipped_tokens;
        ordered_json t;
        for (const auto& [k, v] : timings_seconds) t[k] = num(v);
        j["timings_seconds"] = t;
        return j;
    }
};

// ---------------------------------------------------------------------------
// JSON report builders

inline ordered_json weat_json(const metrics::WeatReport& r, const std::string& dataset,
                              const std::string& class_x, const std::string& class_y) {
    ordered_json j;
    j["report"] = "weat";
    j["dataset"] = dataset;
    j["class_x"] = class_x;
    j["class_y"] = class_y;
    ordered_json s;
    for (const auto& [tok, v] : r.s_per_word) s[tok] = num(v);
    j["s_per_word"] = s;
    j["s_statistic"] = num(r.s_statistic);
    j["effect_size"] = num(r.effect_size);
    j["p_value"] = num(r.p_value);
    j["p_mode"] = r.p_mode == metrics::PValueMode::exact ? "exact" : "sampled";
    j["conservative_p"] = r.conservative;
    j["n_partitions_evaluated"] = r.n_partitions_evaluated;
    j["skipped_tokens"] = r.skipped;
    return j;
}

inline std::string weat_csv(const metrics::WeatReport& r) {
    std::string out = "token,s_value\n";
    char buf[40];
    for (const auto& [tok, v] : r.s_per_word) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        out += tok + "," + buf + "\n";
    }
    return out;
}

inline ordered_json mac_json(const metrics::MacReport& r, const std::string& dataset) {
    ordered_json j;
    j["report"] = "mac";
    j["dataset"] = dataset;
    j["mac"] = num(r.mac);
    j["band"] = num(r.band);
    ordered_json bf;
    for (const auto& [cat, v] : r.band_fractions) bf[cat] = num(v);
    j["band_fractions"] = bf;
    ordered_json pairs = ordered_json::array();
    for (const auto& p : r.s_per_pair) {
        ordered_json e;
        e["protected"] = p.protected_token;
        e["attribute_set"] = p.set_id;
        e["mean_distance"] = num(p.value);
        pairs.push_back(e);
    }
    j["s_per_pair"] = pairs;
    j["skipped_tokens"] = r.skipped;
    return j;
}

inline std::string mac_csv(const metrics::MacReport& r) {
    std::string out = "protected,attribute_set,mean_distance\n";
    char buf[40];
    for (const auto& p : r.s_per_pair) {
        std::snprintf(buf, sizeof(buf), "%.9g", p.value);
        out += p.protected_token + "," + p.set_id + "," + buf + "\n";
    }
    return out;
}

inline ordered_json nullsim_json(const nullsim::SimulationSummary& s, double tail_at) {
    ordered_json j;
    j["report"] = "nullsim";
    ordered_json cfg;
    cfg["n_per_group"] = s.config.n_per_group;
    cfg["n_attrs_per_set"] = s.config.n_attrs_per_set;
    cfg["mu"] = num(s.config.mu);
    cfg["sigma"] = num(s.config.sigma);
    cfg["n_sims"] = s.config.n_sims;
    cfg["seed"] = s.config.seed;
    j["config"] = cfg;
    j["effect_size_mean"] = num(stats::mean(s.effect_sizes));
    j["effect_size_sd"] = num(stats::stddev_pop(s.effect_sizes));
    j["s_statistic_mean"] = num(stats::mean(s.s_statistics));
    j["s_statistic_sd"] = num(stats::stddev_pop(s.s_statistics));
    j["tail_threshold"] = num(tail_at);
    j["effect_tail_fraction_two_sided"] =
        num(nullsim::tail_fraction(s.effect_sizes, tail_at, nullsim::Sidedness::two));
    return j;
}

inline std::string nullsim_csv(const nullsim::SimulationSummary& s) {
    std::string out = "effect_size,s_statistic\n";
    char b1[40], b2[40];
    for (std::size_t i = 0; i < s.effect_sizes.size(); ++i) {
        std::snprintf(b1, sizeof(b1), "%.9g", s.effect_sizes[i]);
        std::snprintf(b2, sizeof(b2), "%.9g", s.s_statistics[i]);
        out += std::string(b1) + "," + b2 + "\n";
    }
    return out;
}

inline ordered_json hpdi_json(const bayes::Hpdi& h) {
    ordered_json j;
    j["lower"] = num(h.lower);
    j["upper"] = num(h.upper);
    j["mass"] = num(h.mass);
    return j;
}

inline ordered_json fit_diagnostics_json(const bayes::Posterior& post, double mass) {
    ordered_json j;
    j["report"] = "fit";
    j["chains"] = post.config.chains;
    j["warmup"] = post.config.warmup;
    j["draws_per_chain"] = post.config.draws;
    j["seed"] = post.config.seed;
    j["noise_structure"] =
        post.layout.shared_noise() ? "shared" : "per_category";
    j["converged"] = post.converged();
    j["rhat_threshold"] = num(post.rhat_threshold);
    j["ess_threshold_global"] = num(post.ess_threshold);
    const auto summaries = bayes::summarize(post, mass);
    ordered_json params = ordered_json::array();
    for (const auto& s : summaries) {
        ordered_json e;
        e["name"] = s.name;
        e["mean"] = num(s.mean);
        e["hpdi"] = hpdi_json(s.interval);
        e["rhat"] = num(s.rhat);
        e["ess"] = num(s.ess);
        params.push_back(e);
    }
    j["parameters"] = params;
    ordered_json acc = ordered_json::array();
    for (const auto& chain : post.scale_acceptance) {
        ordered_json a = ordered_json::array();
        for (double v : chain) a.push_back(num(v));
        acc.push_back(a);
    }
    j["scale_acceptance_rates"] = acc;
    return j;
}

// Posterior draws as CSV: chain column, then one column per parameter.
inline std::string posterior_csv(const bayes::Posterior& post) {
    std::string out = "chain";
    for (const auto& n : post.layout.parameter_names()) out += "," + n;
    out += "\n";
    char buf[40];
    for (std::size_t c = 0; c < post.chain_draws.size(); ++c) {
        for (std::size_t d = 0; d < post.draws_per_chain(); ++d) {
            out += std::to_string(c);
            for (std::size_t p = 0; p < post.n_parameters(); ++p) {
                std::snprintf(buf, sizeof(buf), "%.9g", post.value(c, d, p));
                out += ",";
                out += buf;
            }
            out += "\n";
        }
    }
    return out;
}

inline ordered_json ppc_json(const bayes::PpcResult& r) {
    ordered_json j;
    j["report"] = "ppc";
    j["coverage89"] = num(r.coverage89);
    j["coverage50"] = num(r.coverage50);
    ordered_json d;
    ordered_json grid = ordered_json::array(), pred = ordered_json::array(),
                 obs = ordered_json::array();
    for (double v : r.density.grid) grid.push_back(num(v));
    for (double v : r.density.predicted) pred.push_back(num(v));
    for (double v : r.density.observed) obs.push_back(num(v));
    d["grid"] = grid;
    d["predicted"] = pred;
    d["observed"] = obs;
    j["predicted_density_summary"] = d;
    return j;
}

inline ordered_json compare_json(const bayes::ComparisonReport& r) {
    ordered_json j;
    j["report"] = "compare";
    j["mass"] = num(r.mass);
    ordered_json params = ordered_json::array();
    for (const auto& e : r.parameters) {
        ordered_json o;
        o["name"] = e.name;
        o["mean_before"] = num(e.mean_before);
        o["mean_after"] = num(e.mean_after);
        o["shift"] = num(e.shift);
        o["hpdi_before"] = hpdi_json(e.hpdi_before);
        o["hpdi_after"] = hpdi_json(e.hpdi_after);
        o["overlap"] = e.overlap;
        params.push_back(o);
    }
    j["parameters"] = params;
    ordered_json gap;
    gap["before"] = ordered_json{{"mean", num(r.gap_before.mean)},
                                 {"hpdi", hpdi_json(r.gap_before.interval)}};
    gap["after"] = ordered_json{{"mean", num(r.gap_after.mean)},
                                {"hpdi", hpdi_json(r.gap_after.interval)}};
    gap["abs_gap_change"] = num(r.abs_gap_change);
    j["associated_vs_different_gap"] = gap;
    return j;
}

inline ordered_json directbias_json(double value, double c, std::size_t n_neutral,
                                    const std::string& dataset,
                                    const std::vector<std::string>& skipped) {
    ordered_json j;
    j["report"] = "directbias";
    j["dataset"] = dataset;
    j["c"] = num(c);
    j["direct_bias"] = num(value);
    j["n_neutral_words"] = n_neutral;
    j["skipped_tokens"] = skipped;
    return j;
}

}  // namespace embias::report
