#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "embias/report.hpp"
#include "embias/svg.hpp"

namespace fs = std::filesystem;
using namespace embias;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("round_sig9 keeps nine significant decimals") {
    CHECK(report::round_sig9(0.1) == 0.1);
    CHECK(report::round_sig9(1.23456789012345) == Catch::Approx(1.23456789).margin(1e-12));
    CHECK(report::round_sig9(-9876543.2109876) == Catch::Approx(-9876543.21).margin(1e-6));
    const auto j = report::num(2.0 / 3.0);
    CHECK(j.dump() == "0.666666667");
    CHECK(report::num(std::nan("")).is_null());
}

TEST_CASE("atomic_write replaces content and leaves no temp file") {
    const fs::path dir = fs::temp_directory_path() / "embias_report_test";
    fs::create_directories(dir);
    const fs::path p = dir / "out.txt";
    report::atomic_write(p, "first");
    report::atomic_write(p, "second");
    CHECK(slurp(p) == "second");
    CHECK_FALSE(fs::exists(p.string() + ".tmp"));
}

TEST_CASE("weat json and csv carry the report fields") {
    metrics::WeatReport r;
    r.s_per_word = {{"he", 0.5}, {"she", -0.3}};
    r.s_statistic = 0.85;
    r.effect_size = 1.9156829773846376;
    r.p_value = 1.0 / 3.0;
    r.p_mode = metrics::PValueMode::exact;
    r.n_partitions_evaluated = 6;
    const auto j = report::weat_json(r, "toy", "x", "y");
    CHECK(j.at("report") == "weat");
    CHECK(j.at("effect_size").get<double>() == Catch::Approx(1.91568298));
    CHECK(j.at("p_mode") == "exact");
    CHECK(j.at("n_partitions_evaluated") == 6);
    const std::string csv = report::weat_csv(r);
    CHECK(csv.rfind("token,s_value\n", 0) == 0);
    CHECK(csv.find("he,0.5\n") != std::string::npos);
}

TEST_CASE("manifest serializes config, digests and timings") {
    report::RunManifest m;
    m.subcommand = "mac";
    m.resolved_config = {{"dataset", "religion"}};
    m.input_digests["emb.bin"] = "abc123";
    m.skipped_tokens = {"ghost"};
    m.timings_seconds["load"] = 0.125;
    const auto j = m.to_json();
    CHECK(j.at("tool") == "embias");
    CHECK(j.at("version") == std::string(k_version));
    CHECK(j.at("subcommand") == "mac");
    CHECK(j.at("input_digests").at("emb.bin") == "abc123");
    CHECK(j.at("timings_seconds").at("load").get<double>() == Catch::Approx(0.125));
}

TEST_CASE("identical inputs serialize to identical bytes") {
    nullsim::NullConfig cfg;
    cfg.n_sims = 50;
    cfg.seed = 5;
    const auto s1 = nullsim::run_null_study(cfg);
    const auto s2 = nullsim::run_null_study(cfg);
    CHECK(report::nullsim_json(s1, 1.27).dump() == report::nullsim_json(s2, 1.27).dump());
    CHECK(report::nullsim_csv(s1) == report::nullsim_csv(s2));
}

TEST_CASE("svg rendering is deterministic and well-formed") {
    std::vector<double> values;
    embias::rng::StreamRng gen(3, 0);
    for (int i = 0; i < 500; ++i) values.push_back(gen.normal());
    const std::string h1 = svg::histogram(values, 40, "demo", {1.0});
    const std::string h2 = svg::histogram(values, 40, "demo", {1.0});
    CHECK(h1 == h2);
    CHECK(h1.rfind("<svg", 0) == 0);
    CHECK(h1.find("</svg>") != std::string::npos);

    std::vector<svg::IntervalEntry> entries = {{"a_bar", 0.8, 0.9, 1.0, 0},
                                               {"d_bar", 0.85, 0.95, 1.05, 1}};
    const std::string iv = svg::interval_plot(entries, "intervals");
    CHECK(iv.find("a_bar") != std::string::npos);

    svg::Series s;
    s.label = "density";
    s.x = {0.0, 0.5, 1.0};
    s.y = {0.1, 0.9, 0.2};
    const std::string cp = svg::curve_plot({s}, "curve <&>");
    CHECK(cp.find("&lt;&amp;&gt;") != std::string::npos);
}

TEST_CASE("posterior csv: header has chain plus one column per parameter") {
    // two tiny hand-built chains over a one-word layout
    datasets::LongTable table;
    table.rows = {{"w", "x", datasets::AssociationCategory::associated, 0.9},
                  {"w", "n", datasets::AssociationCategory::neutral, 1.0},
                  {"w", "h", datasets::AssociationCategory::human, 1.0},
                  {"w", "d", datasets::AssociationCategory::different, 1.1}};
    bayes::ModelSpec spec;
    bayes::Posterior post;
    post.layout = bayes::ModelLayout::from_table(table, spec);
    post.spec = spec;
    post.config.chains = 2;
    post.config.draws = 2;
    post.config.warmup = 0;
    const std::size_t n = post.layout.size();
    post.chain_draws = {std::vector<double>(2 * n, 0.5), std::vector<double>(2 * n, 0.75)};
    const std::string csv = report::posterior_csv(post);
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header.rfind("chain,a_bar,d_bar,h_bar,n_bar,sigma_bar_a", 0) == 0);
    CHECK(header.find("a[w]") != std::string::npos);
    // 1 header + 4 draw lines
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
