#pragma once

// Command-line surface shared by the embias tool and its tests. parse_config
// validates a full argv and either returns a resolved RunConfig or throws a
// UsageError that lists every violation it found.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "embias/version.hpp"

namespace embias::cli {

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised for --help/-h; carries the rendered help text.
class HelpRequest : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string subcommand;

    std::vector<std::string> embeddings;
    std::string format = "word2vec-bin";  // word2vec-bin | glove-txt
    std::string dataset;                  // builtin name
    std::string dataset_file;             // JSON path
    bool skip_missing = false;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    bool emit_csv = false;
    bool emit_svg = false;

    // weat
    std::string classes;  // "classX,classY" for datasets with more than two classes
    std::string p_mode = "exact";
    std::uint64_t p_samples = 10000;
    bool conservative_p = false;

    // nullsim
    int n_per_group = 8;
    int n_attrs_per_set = 8;
    double mu = 0.0;
    double sigma = 0.08;
    int n_sims = 10000;
    double tail_at = 1.27;

    // fit / ppc / compare
    int chains = 4;
    int warmup = 1000;
    int draws = 2000;
    bool shared_sigma = false;
    bool allow_nonconverged = false;
    double hpdi_mass = 0.89;

    // directbias
    double bias_c = 1.0;

    bool uses_embedding() const { return subcommand != "nullsim"; }
    bool uses_dataset() const { return subcommand != "nullsim"; }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["subcommand"] = subcommand;
        j["embeddings"] = embeddings;
        j["format"] = format;
        j["dataset"] = dataset;
        j["dataset_file"] = dataset_file;
        j["skip_missing"] = skip_missing;
        j["seed"] = seed;
        j["output_dir"] = output_dir;
        j["emit_csv"] = emit_csv;
        j["emit_svg"] = emit_svg;
        if (subcommand == "weat") {
            j["classes"] = classes;
            j["p_mode"] = p_mode;
            j["p_samples"] = p_samples;
            j["conservative_p"] = conservative_p;
        }
        if (subcommand == "nullsim") {
            j["n_per_group"] = n_per_group;
            j["n_attrs_per_set"] = n_attrs_per_set;
            j["mu"] = mu;
            j["sigma"] = sigma;
            j["n_sims"] = n_sims;
            j["tail_at"] = tail_at;
        }
        if (subcommand == "fit" || subcommand == "ppc" || subcommand == "compare") {
            j["chains"] = chains;
            j["warmup"] = warmup;
            j["draws"] = draws;
            j["shared_sigma"] = shared_sigma;
            j["allow_nonconverged"] = allow_nonconverged;
            j["hpdi_mass"] = hpdi_mass;
        }
        if (subcommand == "directbias") j["bias_c"] = bias_c;
        return j;
    }
};

inline const std::vector<std::string>& subcommand_names() {
    static const std::vector<std::string> names = {"weat", "mac",     "nullsim",    "fit",
                                                   "ppc",  "compare", "dump-table", "directbias"};
    return names;
}

// argv includes the program name in position 0.
inline RunConfig parse_config(std::vector<std::string> argv) {
    RunConfig cfg;
    CLI::App app{"bias measurement for static word embeddings"};
    app.require_subcommand(1);

    const auto add_common = [&](CLI::App* sub, bool with_embedding, bool with_dataset) {
        if (with_embedding)
            sub->add_option("--embedding", cfg.embeddings, "embedding file (repeat for compare)");
        sub->add_option("--format", cfg.format, "embedding file format")
            ->check(CLI::IsMember({"word2vec-bin", "glove-txt"}))
            ->capture_default_str();
        if (with_dataset) {
            sub->add_option("--dataset", cfg.dataset, "builtin dataset name");
            sub->add_option("--dataset-file", cfg.dataset_file, "dataset JSON file");
            sub->add_flag("--skip-missing", cfg.skip_missing,
                          "drop unresolvable tokens instead of failing");
        }
        sub->add_option("--seed", cfg.seed, "master RNG seed")->capture_default_str();
        sub->add_option("--output-dir", cfg.output_dir, "output directory")->capture_default_str();
        sub->add_flag("--emit-csv", cfg.emit_csv, "also write CSV tables");
        sub->add_flag("--emit-svg", cfg.emit_svg, "also write SVG plots");
    };
    const auto add_mcmc = [&](CLI::App* sub) {
        sub->add_option("--chains", cfg.chains)->capture_default_str();
        sub->add_option("--warmup", cfg.warmup)->capture_default_str();
        sub->add_option("--draws", cfg.draws)->capture_default_str();
        sub->add_flag("--shared-sigma", cfg.shared_sigma, "one observation noise for all categories");
        sub->add_flag("--allow-nonconverged", cfg.allow_nonconverged,
                      "exit 0 even when convergence thresholds fail");
        sub->add_option("--hpdi-mass", cfg.hpdi_mass)->capture_default_str();
    };

    CLI::App* weat = app.add_subcommand("weat", "WEAT effect size and permutation p-value");
    add_common(weat, true, true);
    weat->add_option("--classes", cfg.classes, "protected classes as '<classX>,<classY>'");
    weat->add_option("--p-mode", cfg.p_mode)->check(CLI::IsMember({"exact", "sampled"}))
        ->capture_default_str();
    weat->add_option("--p-samples", cfg.p_samples)->capture_default_str();
    weat->add_flag("--conservative-p", cfg.conservative_p,
                   "count '>=' with the observed split included");

    CLI::App* mac = app.add_subcommand("mac", "MAC and band-fraction diagnostics");
    add_common(mac, true, true);

    CLI::App* nullsim = app.add_subcommand("nullsim", "null-model simulation study");
    add_common(nullsim, false, false);
    nullsim->add_option("--n-per-group", cfg.n_per_group)->capture_default_str();
    nullsim->add_option("--n-attrs", cfg.n_attrs_per_set)->capture_default_str();
    nullsim->add_option("--mu", cfg.mu)->capture_default_str();
    nullsim->add_option("--sigma", cfg.sigma)->capture_default_str();
    nullsim->add_option("--n-sims", cfg.n_sims)->capture_default_str();
    nullsim->add_option("--tail-at", cfg.tail_at)->capture_default_str();

    CLI::App* fit = app.add_subcommand("fit", "hierarchical posterior over cosine distances");
    add_common(fit, true, true);
    add_mcmc(fit);

    CLI::App* ppc = app.add_subcommand("ppc", "fit + posterior predictive check");
    add_common(ppc, true, true);
    add_mcmc(ppc);

    CLI::App* compare = app.add_subcommand("compare", "posterior comparison of two embeddings");
    add_common(compare, true, true);
    add_mcmc(compare);

    CLI::App* dump = app.add_subcommand("dump-table", "emit the long-format analysis table");
    add_common(dump, true, true);

    CLI::App* direct = app.add_subcommand("directbias", "projection bias on the neutral list");
    add_common(direct, true, true);
    direct->add_option("--bias-c", cfg.bias_c, "strictness exponent")->capture_default_str();

    if (argv.empty()) throw UsageError("no arguments");
    std::vector<std::string> args(argv.begin() + 1, argv.end());
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        std::string help = app.help();
        for (const auto& name : subcommand_names())
            if (app.got_subcommand(name)) help = app.get_subcommand(name)->help();
        throw HelpRequest(help);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    for (const auto& name : subcommand_names())
        if (app.got_subcommand(name)) cfg.subcommand = name;

    std::vector<std::string> problems;
    if (cfg.uses_dataset()) {
        if (cfg.dataset.empty() && cfg.dataset_file.empty())
            problems.push_back("exactly one dataset source required: --dataset or --dataset-file");
        if (!cfg.dataset.empty() && !cfg.dataset_file.empty())
            problems.push_back("--dataset and --dataset-file conflict; give exactly one");
    }
    if (cfg.uses_embedding()) {
        const std::size_t want = cfg.subcommand == "compare" ? 2 : 1;
        if (cfg.embeddings.size() != want)
            problems.push_back(cfg.subcommand + " requires exactly " + std::to_string(want) +
                               " --embedding argument" + (want == 2 ? "s (before, after)" : ""));
    }
    if (cfg.subcommand == "weat" && cfg.p_mode == "sampled" && cfg.p_samples < 100)
        problems.push_back("--p-samples must be >= 100 in sampled mode");
    if (cfg.chains < 2) problems.push_back("--chains must be >= 2");
    if (cfg.draws < 1) problems.push_back("--draws must be >= 1");
    if (cfg.warmup < 0) problems.push_back("--warmup must be >= 0");
    if (!(cfg.hpdi_mass > 0.0 && cfg.hpdi_mass < 1.0))
        problems.push_back("--hpdi-mass must be in (0,1)");
    if (!(cfg.bias_c > 0.0)) problems.push_back("--bias-c must be positive");

    if (!problems.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        throw UsageError(msg);
    }
    return cfg;
}

}  // namespace embias::cli
