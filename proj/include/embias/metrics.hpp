#pragma once

// Classical single-number bias metrics: per-word WEAT association scores, the
// WEAT s statistic and standardized effect size, permutation p-values (exact
// enumeration or sampled), MAC, and the band-fraction diagnostics used to
// compare similarity distributions against the +/-(1-MAC) band.
//
// The s-value level arithmetic (effect size, partition enumeration) is shared
// with the null-model simulator, which feeds synthetic association scores
// through the identical code path.

#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "embias/datasets.hpp"
#include "embias/embedding.hpp"
#include "embias/geometry.hpp"
#include "embias/rng.hpp"
#include "embias/stats.hpp"

namespace embias::metrics {

class MetricError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t k_max_exact_partitions = 2'000'000;

// ---------------------------------------------------------------------------
// s-value level arithmetic (embedding-free)

// Test statistic: sum of the first n_x s-values minus sum of the rest.
inline double s_statistic_from(std::span<const double> svalues, std::size_t n_x) {
    if (n_x == 0 || n_x >= svalues.size())
        throw MetricError("s_statistic_from: group split out of range");
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < svalues.size(); ++i) (i < n_x ? sx : sy) += svalues[i];
    return sx - sy;
}

// Standardized effect size: difference of group means over the population
// standard deviation of all s-values. Throws when the spread is zero.
inline double effect_size_from(std::span<const double> svalues, std::size_t n_x) {
    if (n_x == 0 || n_x >= svalues.size())
        throw MetricError("effect_size_from: group split out of range");
    const std::size_t n_y = svalues.size() - n_x;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < svalues.size(); ++i) (i < n_x ? sx : sy) += svalues[i];
    const double sd = stats::stddev_pop(svalues);
    if (sd == 0.0) throw MetricError("undefined effect size: all s-values are equal");
    return (sx / static_cast<double>(n_x) - sy / static_cast<double>(n_y)) / sd;
}

// Number of ordered equal-split assignments of 2n items, guarded.
inline std::uint64_t n_exact_partitions(std::size_t n_total, std::size_t n_x) {
    std::uint64_t c = 0;
    try {
        c = stats::binomial(n_total, n_x, k_max_exact_partitions);
    } catch (const std::overflow_error&) {
        throw MetricError("exact enumeration too large: C(" + std::to_string(n_total) + "," +
                          std::to_string(n_x) + ") exceeds " +
                          std::to_string(k_max_exact_partitions));
    }
    return c;
}

// Calls fn once per subset of size k of {0..n-1}, in lexicographic order. The
// subset holds the indices assigned to the X side; the first call is the
// identity assignment {0..k-1}.
template <typename F>
void for_each_partition(std::size_t n, std::size_t k, F&& fn) {
    if (k == 0 || k >= n) throw MetricError("for_each_partition: need 0 < k < n");
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        fn(std::span<const std::size_t>(idx));
        // advance to the next combination
        std::size_t i = k;
        while (i > 0) {
            --i;
            if (idx[i] != i + n - k) break;
            if (i == 0) return;
        }
        if (idx[i] == i + n - k) return;
        ++idx[i];
        for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

// ---------------------------------------------------------------------------
// Embedding-backed WEAT

struct WeatInput {
    std::vector<std::string> x, y;          // protected groups, |x| == |y|
    std::vector<std::string> a, b;          // attribute sets
    const Embedding* embedding = nullptr;
    std::vector<std::string> skipped;       // filled when a skip policy dropped tokens
};

enum class PValueMode { exact, sampled };

struct WeatReport {
    std::map<std::string, double> s_per_word;
    double s_statistic = 0.0;
    double effect_size = 0.0;
    double p_value = 0.0;
    PValueMode p_mode = PValueMode::exact;
    std::uint64_t n_partitions_evaluated = 0;
    bool conservative = false;
    std::vector<std::string> skipped;
};

namespace detail {

inline std::span<const float> require(const Embedding& emb, const std::string& token) {
    LookupResult r = emb.lookup(token);
    if (!r.found()) throw MetricError("token '" + token + "' not found in embedding");
    return r.vec();
}

inline std::vector<std::string> resolve_list(const Embedding& emb,
                                             const std::vector<std::string>& tokens,
                                             bool skip_missing, const char* what,
                                             std::vector<std::string>& skipped) {
    std::vector<std::string> kept;
    for (const auto& t : tokens) {
        if (emb.lookup(t).found()) {
            kept.push_back(t);
        } else if (skip_missing) {
            skipped.push_back(t);
        } else {
            throw MetricError("token '" + t + "' (" + what + ") not found in embedding");
        }
    }
    if (kept.empty()) throw MetricError(std::string(what) + " set is empty after skipping");
    return kept;
}

}  // namespace detail

// Association difference of one word: mean similarity to A minus mean
// similarity to B.
inline double weat_s_word(const std::string& token, const std::vector<std::string>& a,
                          const std::vector<std::string>& b, const Embedding& emb) {
    if (a.empty() || b.empty()) throw MetricError("weat_s_word: empty attribute set");
    const auto tv = detail::require(emb, token);
    double sa = 0.0, sb = 0.0;
    for (const auto& t : a) sa += geometry::cosine_similarity(tv, detail::require(emb, t));
    for (const auto& t : b) sb += geometry::cosine_similarity(tv, detail::require(emb, t));
    return sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
}

inline void validate(const WeatInput& in) {
    if (in.embedding == nullptr) throw MetricError("WeatInput: missing embedding");
    if (in.x.empty() || in.x.size() != in.y.size())
        throw MetricError("WeatInput: |X| and |Y| must be equal and >= 1");
    if (in.a.empty() || in.b.empty()) throw MetricError("WeatInput: attribute sets must be non-empty");
}

// Builds a WeatInput from token lists, applying the missing-token policy.
// Skipping must leave |X| == |Y|; equal group sizes are part of the test.
inline WeatInput make_weat_input(const Embedding& emb, std::vector<std::string> x,
                                 std::vector<std::string> y, std::vector<std::string> a,
                                 std::vector<std::string> b, bool skip_missing) {
    WeatInput in;
    in.embedding = &emb;
    in.x = detail::resolve_list(emb, x, skip_missing, "X", in.skipped);
    in.y = detail::resolve_list(emb, y, skip_missing, "Y", in.skipped);
    in.a = detail::resolve_list(emb, a, skip_missing, "A", in.skipped);
    in.b = detail::resolve_list(emb, b, skip_missing, "B", in.skipped);
    if (in.x.size() != in.y.size())
        throw MetricError("skipping left unequal protected groups (" + std::to_string(in.x.size()) +
                          " vs " + std::to_string(in.y.size()) + ")");
    validate(in);
    return in;
}

inline std::vector<double> weat_s_values(const WeatInput& in) {
    std::vector<double> s;
    s.reserve(in.x.size() + in.y.size());
    for (const auto& t : in.x) s.push_back(weat_s_word(t, in.a, in.b, *in.embedding));
    for (const auto& t : in.y) s.push_back(weat_s_word(t, in.a, in.b, *in.embedding));
    return s;
}

inline double weat_effect_size(const WeatInput& in) {
    validate(in);
    return effect_size_from(weat_s_values(in), in.x.size());
}

struct PValueResult {
    double p = 0.0;
    std::uint64_t n_evaluated = 0;
};

// Fraction of equal-size relabelings with a strictly greater s statistic.
// Exact mode enumerates every C(2n, n) ordered assignment, the observed one
// included; strict '>' is the source convention and permits p = 0. The
// conservative variant counts '>=' with the observed assignment included, so
// its minimum is 1/n_evaluated.
inline PValueResult p_value_from_s(std::span<const double> svalues, std::size_t n_x,
                                   PValueMode mode, std::uint64_t n_samples, std::uint64_t seed,
                                   bool conservative = false) {
    const double total = std::accumulate(svalues.begin(), svalues.end(), 0.0);
    const double observed = s_statistic_from(svalues, n_x);
    PValueResult out;
    if (mode == PValueMode::exact) {
        const std::uint64_t n_parts = n_exact_partitions(svalues.size(), n_x);
        std::uint64_t hits = 0;
        for_each_partition(svalues.size(), n_x, [&](std::span<const std::size_t> xs) {
            double sx = 0.0;
            for (std::size_t i : xs) sx += svalues[i];
            const double stat = 2.0 * sx - total;
            if (conservative ? stat >= observed : stat > observed) ++hits;
        });
        out.p = static_cast<double>(hits) / static_cast<double>(n_parts);
        out.n_evaluated = n_parts;
        return out;
    }
    if (n_samples < 100) throw MetricError("sampled mode requires n_samples >= 100");
    rng::StreamRng gen(seed, 0);
    std::vector<std::size_t> idx(svalues.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::uint64_t hits = 0;
    for (std::uint64_t s = 0; s < n_samples; ++s) {
        gen.shuffle(idx);
        double sx = 0.0;
        for (std::size_t i = 0; i < n_x; ++i) sx += svalues[idx[i]];
        const double stat = 2.0 * sx - total;
        if (conservative ? stat >= observed : stat > observed) ++hits;
    }
    if (conservative) {
        out.p = static_cast<double>(hits + 1) / static_cast<double>(n_samples + 1);
        out.n_evaluated = n_samples + 1;
    } else {
        out.p = static_cast<double>(hits) / static_cast<double>(n_samples);
        out.n_evaluated = n_samples;
    }
    return out;
}

inline PValueResult weat_p_value(const WeatInput& in, PValueMode mode, std::uint64_t n_samples,
                                 std::uint64_t seed, bool conservative = false) {
    validate(in);
    return p_value_from_s(weat_s_values(in), in.x.size(), mode, n_samples, seed, conservative);
}

inline WeatReport run_weat(const WeatInput& in, PValueMode mode, std::uint64_t n_samples,
                           std::uint64_t seed, bool conservative = false) {
    validate(in);
    const std::vector<double> s = weat_s_values(in);
    WeatReport rep;
    for (std::size_t i = 0; i < in.x.size(); ++i) rep.s_per_word[in.x[i]] = s[i];
    for (std::size_t i = 0; i < in.y.size(); ++i) rep.s_per_word[in.y[i]] = s[in.x.size() + i];
    rep.s_statistic = s_statistic_from(s, in.x.size());
    rep.effect_size = effect_size_from(s, in.x.size());
    const PValueResult pv = p_value_from_s(s, in.x.size(), mode, n_samples, seed, conservative);
    rep.p_value = pv.p;
    rep.n_partitions_evaluated = pv.n_evaluated;
    rep.p_mode = mode;
    rep.conservative = conservative;
    rep.skipped = in.skipped;
    return rep;
}

// ---------------------------------------------------------------------------
// MAC

struct MacPair {
    std::string protected_token;
    std::string set_id;
    double value;  // mean cosine distance of the word to the set
};

struct MacReport {
    std::vector<MacPair> s_per_pair;
    double mac = 0.0;
    double band = 0.0;  // 1 - mac, the similarity band the source work implies
    // fraction of similarities with |sim| <= band, keyed by category name;
    // filled when the report is computed from a full dataset
    std::map<std::string, double> band_fractions;
    std::vector<std::string> skipped;
};

// Mean cosine distance from the token to the members of one attribute set.
inline double mac_s(const std::string& token, const std::vector<std::string>& attr_set,
                    const Embedding& emb) {
    if (attr_set.empty()) throw MetricError("mac_s: empty attribute set");
    const auto tv = detail::require(emb, token);
    double acc = 0.0;
    for (const auto& t : attr_set) acc += geometry::cosine_distance(tv, detail::require(emb, t));
    return acc / static_cast<double>(attr_set.size());
}

// MAC over explicit lists: mean over all (protected word, attribute set)
// pairs of mac_s.
inline MacReport mac(const std::vector<std::string>& protected_tokens,
                     const std::vector<std::pair<std::string, std::vector<std::string>>>& sets,
                     const Embedding& emb) {
    if (protected_tokens.empty()) throw MetricError("mac: empty protected list");
    if (sets.empty()) throw MetricError("mac: no attribute sets");
    MacReport rep;
    double acc = 0.0;
    for (const auto& t : protected_tokens) {
        for (const auto& [sid, tokens] : sets) {
            const double v = mac_s(t, tokens, emb);
            rep.s_per_pair.push_back({t, sid, v});
            acc += v;
        }
    }
    rep.mac = acc / static_cast<double>(rep.s_per_pair.size());
    rep.band = 1.0 - rep.mac;
    return rep;
}

// Fraction of values v with |v| <= band.
inline double band_fraction(std::span<const double> similarities, double band) {
    if (similarities.empty()) throw MetricError("band_fraction: empty input");
    if (!(band > 0.0)) throw MetricError("band_fraction: band must be positive");
    std::size_t hits = 0;
    for (double v : similarities)
        if (std::abs(v) <= band) ++hits;
    return static_cast<double>(hits) / static_cast<double>(similarities.size());
}

// Dataset-level MAC report: MAC over the stereotype attribute sets plus the
// per-category band fractions of similarities (1 - distance) against the
// +/-(1 - MAC) band.
inline MacReport mac_report(const datasets::BiasDataset& ds, const Embedding& emb,
                            bool skip_missing) {
    const datasets::LongTable table = datasets::build_long_table(ds, emb, skip_missing);

    MacReport rep;
    // per-pair means over stereotype rows, grouped via the dataset's sets
    std::map<std::string, const datasets::AttributeSet*> set_of_token;
    for (const auto& s : ds.attribute_sets)
        for (const auto& t : s.tokens) set_of_token[t] = &s;

    std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> cells;
    std::map<std::string, std::vector<double>> sims_by_category;
    for (const auto& row : table.rows) {
        sims_by_category[std::string(datasets::to_string(row.category))].push_back(1.0 -
                                                                                   row.distance);
        if (row.category == datasets::AssociationCategory::associated ||
            row.category == datasets::AssociationCategory::different) {
            const auto it = set_of_token.find(row.attribute_token);
            if (it == set_of_token.end()) continue;
            auto& cell = cells[{row.protected_token, it->second->id}];
            cell.first += row.distance;
            cell.second += 1;
        }
    }
    double acc = 0.0;
    for (const auto& [key, cell] : cells) {
        const double v = cell.first / static_cast<double>(cell.second);
        rep.s_per_pair.push_back({key.first, key.second, v});
        acc += v;
    }
    if (rep.s_per_pair.empty()) throw MetricError("mac_report: no stereotype rows");
    rep.mac = acc / static_cast<double>(rep.s_per_pair.size());
    rep.band = 1.0 - rep.mac;
    // the band is read as a magnitude around similarity 0; a MAC above 1
    // still yields a usable |1 - MAC| band, a MAC of exactly 1 yields none
    const double magnitude = std::abs(rep.band);
    if (magnitude > 0.0) {
        for (const auto& [cat, sims] : sims_by_category)
            rep.band_fractions[cat] = band_fraction(sims, magnitude);
    }
    rep.skipped = table.skipped_tokens;
    return rep;
}

// WEAT groups for a dataset: X/A from class_x, Y/B from class_y. Attribute
// sets sharing a class are pooled.
inline WeatInput weat_input_from_dataset(const datasets::BiasDataset& ds, const Embedding& emb,
                                         const std::string& class_x, const std::string& class_y,
                                         bool skip_missing) {
    const auto classes = ds.class_ids();
    const auto has = [&](const std::string& c) {
        return std::find(classes.begin(), classes.end(), c) != classes.end();
    };
    if (!has(class_x) || !has(class_y) || class_x == class_y)
        throw MetricError("weat needs two distinct classes of dataset '" + ds.name + "'");
    return make_weat_input(emb, ds.protected_of_class(class_x), ds.protected_of_class(class_y),
                           ds.attributes_of_class(class_x), ds.attributes_of_class(class_y),
                           skip_missing);
}

}  // namespace embias::metrics
