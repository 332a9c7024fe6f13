#pragma once

// Hierarchical model of cosine distances. Each row's distance is normal
// around the coefficient selected by its (protected word, category) cell;
// per-word coefficients are normal around category-level means, which carry
// Normal(1, .3) priors; every scale parameter carries an Exponential(2)
// prior. Observation noise is one sigma per association category by default
// (a shared-sigma variant exists for sensitivity analysis).
//
// Fitting is Metropolis-within-Gibbs: all location parameters are
// conditionally conjugate and get exact Gibbs draws; the scale parameters
// move by adaptive random walks on log sigma (target acceptance .44,
// adaptation frozen after warmup). Chains are independent streams of
// (seed, chain index) and may run in parallel.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "embias/datasets.hpp"
#include "embias/rng.hpp"
#include "embias/stats.hpp"
#include "embias/util.hpp"

namespace embias::bayes {

class BayesError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using datasets::AssociationCategory;
using datasets::LongTable;

enum class NoiseStructure { per_category, shared };

struct ModelSpec {
    double hyper_mean = 1.0;
    double hyper_sd = 0.3;
    double sd_rate = 2.0;
    NoiseStructure noise = NoiseStructure::per_category;

    void validate() const {
        if (!(hyper_sd > 0.0)) throw BayesError("hyper_sd must be positive");
        if (!(sd_rate > 0.0)) throw BayesError("sd_rate must be positive");
    }
};

struct McmcConfig {
    int chains = 4;
    int warmup = 1000;
    int draws = 2000;
    std::uint64_t seed = 0;
};

// Narrowest sample window containing ceil(mass * n) sorted draws; first
// window on ties.
struct Hpdi {
    double lower = 0.0;
    double upper = 0.0;
    double mass = 0.0;
};

inline Hpdi hpdi(std::span<const double> samples, double mass) {
    if (samples.empty()) throw BayesError("hpdi: empty sample set");
    if (!(mass > 0.0 && mass < 1.0)) throw BayesError("hpdi: mass must be in (0,1)");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    std::size_t m = static_cast<std::size_t>(
        std::ceil(mass * static_cast<double>(n) * (1.0 - 1e-12)));
    m = std::clamp<std::size_t>(m, 1, n);
    std::size_t best = 0;
    double best_width = xs[m - 1] - xs[0];
    for (std::size_t i = 1; i + m <= n; ++i) {
        const double width = xs[i + m - 1] - xs[i];
        if (width < best_width) {
            best_width = width;
            best = i;
        }
    }
    return {xs[best], xs[best + m - 1], mass};
}

namespace detail {

inline constexpr int k_n_categories = 4;

inline char category_letter(int cat) { return "adhn"[cat]; }

}  // namespace detail

// Parameter indexing for one table: global parameters first (4 category
// means, 4 category spreads, then observation noise), followed by the four
// coefficients of each protected word in sorted token order.
class ModelLayout {
  public:
    static ModelLayout from_table(const LongTable& table, const ModelSpec& spec) {
        ModelLayout l;
        std::set<std::string> words;
        for (const auto& r : table.rows) words.insert(r.protected_token);
        l.protected_words_.assign(words.begin(), words.end());
        l.shared_noise_ = spec.noise == NoiseStructure::shared;
        return l;
    }

    const std::vector<std::string>& protected_words() const { return protected_words_; }
    std::size_t n_protected() const { return protected_words_.size(); }
    bool shared_noise() const { return shared_noise_; }
    std::size_t n_sigma_obs() const { return shared_noise_ ? 1 : detail::k_n_categories; }

    std::size_t size() const {
        return 4 * n_protected() + 4 + 4 + n_sigma_obs();
    }

    std::size_t bar_index(int cat) const { return static_cast<std::size_t>(cat); }
    std::size_t sigma_bar_index(int cat) const { return 4 + static_cast<std::size_t>(cat); }
    std::size_t sigma_obs_index(int cat) const {
        return 8 + (shared_noise_ ? 0 : static_cast<std::size_t>(cat));
    }
    std::size_t coef_index(std::size_t word, int cat) const {
        return 8 + n_sigma_obs() + word * 4 + static_cast<std::size_t>(cat);
    }

    std::size_t word_index(const std::string& token) const {
        const auto it = std::lower_bound(protected_words_.begin(), protected_words_.end(), token);
        if (it == protected_words_.end() || *it != token)
            throw BayesError("protected word '" + token + "' is not part of this model");
        return static_cast<std::size_t>(it - protected_words_.begin());
    }

    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names;
        names.reserve(size());
        for (int c = 0; c < 4; ++c) names.push_back(std::string(1, detail::category_letter(c)) + "_bar");
        for (int c = 0; c < 4; ++c)
            names.push_back(std::string("sigma_bar_") + detail::category_letter(c));
        if (shared_noise_) {
            names.push_back("sigma_obs");
        } else {
            for (auto cat : datasets::k_categories)
                names.push_back("sigma_obs_" + std::string(datasets::to_string(cat)));
        }
        for (const auto& w : protected_words_)
            for (int c = 0; c < 4; ++c)
                names.push_back(std::string(1, detail::category_letter(c)) + "[" + w + "]");
        return names;
    }

    bool operator==(const ModelLayout& other) const {
        return protected_words_ == other.protected_words_ && shared_noise_ == other.shared_noise_;
    }

  private:
    std::vector<std::string> protected_words_;
    bool shared_noise_ = false;
};

using ParameterVector = std::vector<double>;

// Joint log density, likelihood plus all priors, with no constants dropped.
// Returns -infinity for any non-positive scale parameter.
inline double log_posterior(const ModelLayout& layout, std::span<const double> theta,
                            const LongTable& table, const ModelSpec& spec) {
    spec.validate();
    if (theta.size() != layout.size())
        throw BayesError("parameter vector has dimension " + std::to_string(theta.size()) +
                         ", model expects " + std::to_string(layout.size()));
    for (int c = 0; c < 4; ++c)
        if (!(theta[layout.sigma_bar_index(c)] > 0.0))
            return -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < layout.n_sigma_obs(); ++j)
        if (!(theta[8 + j] > 0.0)) return -std::numeric_limits<double>::infinity();

    double lp = 0.0;
    for (const auto& row : table.rows) {
        const int cat = static_cast<int>(row.category);
        const double mu = theta[layout.coef_index(layout.word_index(row.protected_token), cat)];
        const double sigma = theta[layout.sigma_obs_index(cat)];
        lp += stats::normal_log_pdf(row.distance, mu, sigma);
    }
    for (std::size_t w = 0; w < layout.n_protected(); ++w)
        for (int c = 0; c < 4; ++c)
            lp += stats::normal_log_pdf(theta[layout.coef_index(w, c)], theta[layout.bar_index(c)],
                                        theta[layout.sigma_bar_index(c)]);
    for (int c = 0; c < 4; ++c)
        lp += stats::normal_log_pdf(theta[layout.bar_index(c)], spec.hyper_mean, spec.hyper_sd);
    for (int c = 0; c < 4; ++c)
        lp += std::log(spec.sd_rate) - spec.sd_rate * theta[layout.sigma_bar_index(c)];
    for (std::size_t j = 0; j < layout.n_sigma_obs(); ++j)
        lp += std::log(spec.sd_rate) - spec.sd_rate * theta[8 + j];
    return lp;
}

namespace detail {

struct NormalPosterior {
    double mean = 0.0;
    double sd = 0.0;
};

// Closed-form posterior of a normal mean under a normal prior and n
// observations with known noise sd (precision-weighted mean).
inline NormalPosterior normal_normal_posterior(double prior_mean, double prior_sd, double data_sum,
                                               std::size_t n_obs, double noise_sd) {
    const double prior_prec = 1.0 / (prior_sd * prior_sd);
    const double data_prec = static_cast<double>(n_obs) / (noise_sd * noise_sd);
    const double prec = prior_prec + data_prec;
    NormalPosterior p;
    p.mean = (prior_mean * prior_prec + data_sum / (noise_sd * noise_sd)) / prec;
    p.sd = std::sqrt(1.0 / prec);
    return p;
}

inline double gibbs_normal_draw(double prior_mean, double prior_sd, double data_sum,
                                std::size_t n_obs, double noise_sd, rng::StreamRng& gen) {
    const NormalPosterior p = normal_normal_posterior(prior_mean, prior_sd, data_sum, n_obs, noise_sd);
    return gen.normal(p.mean, p.sd);
}

// Per-cell sufficient statistics; the sampler never touches raw rows again.
struct TableIndex {
    std::size_t n_words = 0;
    std::vector<std::size_t> n;      // [word*4 + cat]
    std::vector<double> sum;
    std::vector<double> sumsq;
    std::array<std::size_t, 4> n_cat{};

    static TableIndex build(const ModelLayout& layout, const LongTable& table) {
        TableIndex ix;
        ix.n_words = layout.n_protected();
        ix.n.assign(ix.n_words * 4, 0);
        ix.sum.assign(ix.n_words * 4, 0.0);
        ix.sumsq.assign(ix.n_words * 4, 0.0);
        for (const auto& row : table.rows) {
            const std::size_t w = layout.word_index(row.protected_token);
            const int c = static_cast<int>(row.category);
            const std::size_t cell = w * 4 + static_cast<std::size_t>(c);
            ix.n[cell] += 1;
            ix.sum[cell] += row.distance;
            ix.sumsq[cell] += row.distance * row.distance;
            ix.n_cat[static_cast<std::size_t>(c)] += 1;
        }
        return ix;
    }

    // sum over words of Sum (y - mu_cell)^2 for one category
    double sse(const ModelLayout& layout, std::span<const double> theta, int cat) const {
        double acc = 0.0;
        for (std::size_t w = 0; w < n_words; ++w) {
            const std::size_t cell = w * 4 + static_cast<std::size_t>(cat);
            if (n[cell] == 0) continue;
            const double mu = theta[layout.coef_index(w, cat)];
            acc += sumsq[cell] - 2.0 * mu * sum[cell] +
                   static_cast<double>(n[cell]) * mu * mu;
        }
        return acc;
    }
};

}  // namespace detail

struct ParameterDiagnostics {
    double rhat = 1.0;
    double ess = 0.0;
};

struct Posterior {
    ModelLayout layout;
    ModelSpec spec;
    McmcConfig config;
    // chain_draws[c] holds draws * size() values, draw-major
    std::vector<std::vector<double>> chain_draws;
    std::vector<ParameterDiagnostics> diagnostics;           // per parameter, layout order
    std::vector<std::vector<double>> scale_acceptance;       // [chain][scale param]
    double rhat_threshold = 1.05;
    double ess_threshold = 400.0;

    std::size_t n_parameters() const { return layout.size(); }
    std::size_t draws_per_chain() const { return static_cast<std::size_t>(config.draws); }
    std::size_t total_draws() const { return draws_per_chain() * chain_draws.size(); }

    double value(std::size_t chain, std::size_t draw, std::size_t param) const {
        return chain_draws[chain][draw * n_parameters() + param];
    }

    std::vector<double> parameter_draws(std::size_t param) const {
        std::vector<double> out;
        out.reserve(total_draws());
        for (std::size_t c = 0; c < chain_draws.size(); ++c)
            for (std::size_t d = 0; d < draws_per_chain(); ++d) out.push_back(value(c, d, param));
        return out;
    }

    // Global parameters are the first 8 + n_sigma_obs entries.
    std::size_t n_global() const { return 8 + layout.n_sigma_obs(); }

    bool converged() const {
        for (std::size_t j = 0; j < n_parameters(); ++j) {
            if (diagnostics[j].rhat > rhat_threshold) return false;
            if (diagnostics[j].ess < 100.0) return false;
        }
        for (std::size_t j = 0; j < n_global(); ++j)
            if (diagnostics[j].ess < ess_threshold) return false;
        return true;
    }
};

// ---------------------------------------------------------------------------
// Convergence diagnostics (rank-normalized split R-hat and bulk ESS)

namespace diag {

// Ranks with ties averaged, mapped through the normal quantile function.
inline std::vector<std::vector<double>> rank_normalize(
    const std::vector<std::vector<double>>& sequences) {
    std::size_t total = 0;
    for (const auto& s : sequences) total += s.size();
    struct Item {
        double v;
        std::size_t seq, pos;
    };
    std::vector<Item> items;
    items.reserve(total);
    for (std::size_t s = 0; s < sequences.size(); ++s)
        for (std::size_t i = 0; i < sequences[s].size(); ++i)
            items.push_back({sequences[s][i], s, i});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.v < b.v; });

    std::vector<std::vector<double>> out(sequences.size());
    for (std::size_t s = 0; s < sequences.size(); ++s) out[s].resize(sequences[s].size());
    const double denom = static_cast<double>(total) + 0.25;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].v == items[i].v) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j - 1)) + 1.0;
        const double z = stats::normal_quantile((avg_rank - 0.375) / denom);
        for (std::size_t k = i; k < j; ++k) out[items[k].seq][items[k].pos] = z;
        i = j;
    }
    return out;
}

struct SequenceMoments {
    double w = 0.0;         // mean within-sequence sample variance
    double var_plus = 0.0;  // pooled variance estimate
    std::size_t m = 0, n = 0;
};

inline SequenceMoments moments(const std::vector<std::vector<double>>& seqs) {
    SequenceMoments mo;
    mo.m = seqs.size();
    mo.n = seqs.front().size();
    std::vector<double> means(mo.m);
    double w = 0.0;
    for (std::size_t s = 0; s < mo.m; ++s) {
        means[s] = stats::mean(seqs[s]);
        if (mo.n > 1) w += stats::variance_sample(seqs[s]);
    }
    mo.w = w / static_cast<double>(mo.m);
    const double b_over_n = mo.m > 1 ? stats::variance_sample(means) : 0.0;
    mo.var_plus = mo.w * (static_cast<double>(mo.n) - 1.0) / static_cast<double>(mo.n) + b_over_n;
    return mo;
}

inline double split_rhat_of(const std::vector<std::vector<double>>& seqs) {
    const SequenceMoments mo = moments(seqs);
    if (mo.w <= 0.0 || mo.var_plus <= 0.0) return 1.0;
    return std::sqrt(mo.var_plus / mo.w);
}

// Bulk effective sample size with Geyer's initial monotone sequence.
inline double ess_of(const std::vector<std::vector<double>>& seqs) {
    const SequenceMoments mo = moments(seqs);
    const std::size_t m = mo.m, n = mo.n;
    const double mn = static_cast<double>(m * n);
    if (n < 4 || mo.var_plus <= 0.0 || mo.w <= 0.0) return mn;

    std::vector<double> means(m);
    for (std::size_t s = 0; s < m; ++s) means[s] = stats::mean(seqs[s]);
    const auto acov = [&](std::size_t t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < m; ++s) {
            double a = 0.0;
            for (std::size_t i = 0; i + t < n; ++i)
                a += (seqs[s][i] - means[s]) * (seqs[s][i + t] - means[s]);
            acc += a / static_cast<double>(n);
        }
        return acc / static_cast<double>(m);
    };
    const auto rho = [&](std::size_t t) { return 1.0 - (mo.w - acov(t)) / mo.var_plus; };

    // tau = -1 + 2 * sum of the monotone non-increasing positive pair sums
    double prev_pair = rho(0) + rho(1);
    if (prev_pair <= 0.0) return mn;
    double tau = -1.0 + 2.0 * prev_pair;
    for (std::size_t t = 2; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);  // enforce monotone non-increasing
        tau += 2.0 * pair;
        prev_pair = pair;
    }
    tau = std::max(tau, 1e-12);
    return std::min(mn, mn / tau);
}

// Splits every chain's draws for one parameter into equal halves (the middle
// draw is dropped when the count is odd).
inline std::vector<std::vector<double>> split_sequences(const Posterior& post, std::size_t param) {
    std::vector<std::vector<double>> seqs;
    const std::size_t n = post.draws_per_chain();
    const std::size_t half = n / 2;
    for (std::size_t c = 0; c < post.chain_draws.size(); ++c) {
        if (half == 0) {
            seqs.push_back({post.value(c, 0, param)});
            continue;
        }
        std::vector<double> a, b;
        a.reserve(half);
        b.reserve(half);
        for (std::size_t d = 0; d < half; ++d) a.push_back(post.value(c, d, param));
        for (std::size_t d = n - half; d < n; ++d) b.push_back(post.value(c, d, param));
        seqs.push_back(std::move(a));
        seqs.push_back(std::move(b));
    }
    return seqs;
}

inline ParameterDiagnostics diagnose(const Posterior& post, std::size_t param) {
    ParameterDiagnostics d;
    auto seqs = split_sequences(post, param);
    // degenerate: all sequences constant and equal
    bool constant = true;
    const double first = seqs.front().front();
    for (const auto& s : seqs)
        for (double v : s)
            if (v != first) {
                constant = false;
                break;
            }
    if (constant) {
        d.rhat = 1.0;
        d.ess = static_cast<double>(post.total_draws());
        return d;
    }
    const auto z = rank_normalize(seqs);
    d.rhat = split_rhat_of(z);
    d.ess = ess_of(z);
    return d;
}

}  // namespace diag

// ---------------------------------------------------------------------------
// Fitting

namespace detail {

struct ScaleState {
    double log_step = std::log(0.25);
    std::uint64_t proposals = 0, accepts = 0;
};

struct ChainResult {
    std::vector<double> draws;             // draws * n_params
    std::vector<double> acceptance_rates;  // per scale parameter
};

inline ChainResult run_chain(const ModelLayout& layout, const TableIndex& ix,
                             const ModelSpec& spec, const McmcConfig& mcmc, int chain) {
    rng::StreamRng gen(mcmc.seed, static_cast<std::uint64_t>(chain));
    const std::size_t P = layout.n_protected();
    const std::size_t n_scales = 4 + layout.n_sigma_obs();
    ParameterVector theta(layout.size(), 0.0);

    // empirical starting point: cell means jittered per chain, scales at
    // empirical spreads
    std::array<std::vector<double>, 4> cell_means;
    for (int c = 0; c < 4; ++c) {
        for (std::size_t w = 0; w < P; ++w) {
            const std::size_t cell = w * 4 + static_cast<std::size_t>(c);
            if (ix.n[cell] > 0)
                cell_means[static_cast<std::size_t>(c)].push_back(ix.sum[cell] /
                                                                  static_cast<double>(ix.n[cell]));
        }
    }
    std::array<double, 4> cat_mean{}, cat_spread{}, resid_sd{};
    for (int c = 0; c < 4; ++c) {
        const auto& ms = cell_means[static_cast<std::size_t>(c)];
        cat_mean[static_cast<std::size_t>(c)] = ms.empty() ? spec.hyper_mean : stats::mean(ms);
        cat_spread[static_cast<std::size_t>(c)] =
            ms.size() >= 2 ? std::max(stats::stddev_sample(ms), 0.05) : 0.1;
        double sse = 0.0;
        std::size_t n_res = 0;
        for (std::size_t w = 0; w < P; ++w) {
            const std::size_t cell = w * 4 + static_cast<std::size_t>(c);
            if (ix.n[cell] == 0) continue;
            const double mu = ix.sum[cell] / static_cast<double>(ix.n[cell]);
            sse += ix.sumsq[cell] - 2.0 * mu * ix.sum[cell] + static_cast<double>(ix.n[cell]) * mu * mu;
            n_res += ix.n[cell];
        }
        resid_sd[static_cast<std::size_t>(c)] =
            n_res > 1 ? std::max(std::sqrt(sse / static_cast<double>(n_res)), 0.05) : 0.1;
    }
    for (int c = 0; c < 4; ++c) {
        theta[layout.bar_index(c)] = cat_mean[static_cast<std::size_t>(c)] + gen.uniform(-0.05, 0.05);
        theta[layout.sigma_bar_index(c)] = cat_spread[static_cast<std::size_t>(c)];
    }
    if (layout.shared_noise()) {
        double pooled = 0.0;
        for (int c = 0; c < 4; ++c) pooled += resid_sd[static_cast<std::size_t>(c)];
        theta[layout.sigma_obs_index(0)] = pooled / 4.0;
    } else {
        for (int c = 0; c < 4; ++c)
            theta[layout.sigma_obs_index(c)] = resid_sd[static_cast<std::size_t>(c)];
    }
    for (std::size_t w = 0; w < P; ++w) {
        for (int c = 0; c < 4; ++c) {
            const std::size_t cell = w * 4 + static_cast<std::size_t>(c);
            const double base = ix.n[cell] > 0 ? ix.sum[cell] / static_cast<double>(ix.n[cell])
                                               : cat_mean[static_cast<std::size_t>(c)];
            theta[layout.coef_index(w, c)] = base + gen.uniform(-0.05, 0.05);
        }
    }

    std::vector<ScaleState> scales(n_scales);
    const int total_iters = mcmc.warmup + mcmc.draws;
    ChainResult result;
    result.draws.reserve(static_cast<std::size_t>(mcmc.draws) * layout.size());

    // scale index map: [0..3] sigma_bar, [4..] sigma_obs
    const auto scale_param_index = [&](std::size_t s) {
        return s < 4 ? layout.sigma_bar_index(static_cast<int>(s)) : 8 + (s - 4);
    };

    for (int iter = 0; iter < total_iters; ++iter) {
        const bool adapting = iter < mcmc.warmup;

        // per-word coefficients: conjugate normal-normal
        for (std::size_t w = 0; w < P; ++w) {
            for (int c = 0; c < 4; ++c) {
                const std::size_t cell = w * 4 + static_cast<std::size_t>(c);
                const double noise = theta[layout.sigma_obs_index(c)];
                theta[layout.coef_index(w, c)] = gibbs_normal_draw(
                    theta[layout.bar_index(c)], theta[layout.sigma_bar_index(c)], ix.sum[cell],
                    ix.n[cell], noise, gen);
            }
        }
        // category means: P coefficient "observations" + hyper prior
        for (int c = 0; c < 4; ++c) {
            double coef_sum = 0.0;
            for (std::size_t w = 0; w < P; ++w) coef_sum += theta[layout.coef_index(w, c)];
            theta[layout.bar_index(c)] = gibbs_normal_draw(spec.hyper_mean, spec.hyper_sd, coef_sum,
                                                           P, theta[layout.sigma_bar_index(c)], gen);
        }
        // scale parameters: adaptive random walk on log sigma. Several
        // sub-steps per sweep; the conditioning sums are fixed while the
        // locations stay put, so extra moves cost nothing and cut the
        // autocorrelation time of the scale chains.
        constexpr int k_scale_substeps = 4;
        for (std::size_t s = 0; s < n_scales; ++s) {
            const std::size_t pi = scale_param_index(s);

            double n_obs = 0.0, sse = 0.0;
            if (s < 4) {
                const int c = static_cast<int>(s);
                n_obs = static_cast<double>(P);
                const double bar = theta[layout.bar_index(c)];
                for (std::size_t w = 0; w < P; ++w) {
                    const double d = theta[layout.coef_index(w, c)] - bar;
                    sse += d * d;
                }
            } else if (layout.shared_noise()) {
                for (int c = 0; c < 4; ++c) {
                    n_obs += static_cast<double>(ix.n_cat[static_cast<std::size_t>(c)]);
                    sse += ix.sse(layout, theta, c);
                }
            } else {
                const int c = static_cast<int>(s - 4);
                n_obs = static_cast<double>(ix.n_cat[static_cast<std::size_t>(c)]);
                sse = ix.sse(layout, theta, c);
            }

            const auto log_target = [&](double sg) {
                // likelihood + Exp prior + Jacobian of the log transform
                return -n_obs * std::log(sg) - sse / (2.0 * sg * sg) - spec.sd_rate * sg +
                       std::log(sg);
            };
            for (int sub = 0; sub < k_scale_substeps; ++sub) {
                const double sigma = theta[pi];
                const double step = std::exp(scales[s].log_step);
                const double proposal = sigma * std::exp(step * gen.normal());
                const double log_alpha = log_target(proposal) - log_target(sigma);
                const double alpha = std::min(1.0, std::exp(log_alpha));
                const bool accept = std::log(gen.uniform01() + 1e-300) < log_alpha;
                if (accept) theta[pi] = proposal;
                if (adapting) {
                    const double gamma = 1.0 / std::pow(static_cast<double>(iter) + 10.0, 0.6);
                    scales[s].log_step += gamma * (alpha - 0.44);
                    scales[s].log_step = std::clamp(scales[s].log_step, -8.0, 3.0);
                } else {
                    scales[s].proposals += 1;
                    if (accept) scales[s].accepts += 1;
                }
            }
        }

        if (iter >= mcmc.warmup)
            result.draws.insert(result.draws.end(), theta.begin(), theta.end());
    }

    result.acceptance_rates.resize(n_scales);
    for (std::size_t s = 0; s < n_scales; ++s)
        result.acceptance_rates[s] =
            scales[s].proposals == 0
                ? 0.0
                : static_cast<double>(scales[s].accepts) / static_cast<double>(scales[s].proposals);
    return result;
}

}  // namespace detail

// Draws from the posterior. Deterministic given the seed; chains run in
// parallel on independent streams. Non-convergence is flagged in the result,
// never silently dropped.
inline Posterior fit(const LongTable& table, const ModelSpec& spec, const McmcConfig& mcmc) {
    spec.validate();
    if (mcmc.chains < 2) throw BayesError("fit: at least 2 chains required");
    if (mcmc.draws < 1) throw BayesError("fit: draws must be >= 1");
    if (mcmc.warmup < 0) throw BayesError("fit: warmup must be >= 0");
    if (table.rows.empty()) throw BayesError("fit: empty table");

    const ModelLayout layout = ModelLayout::from_table(table, spec);
    const detail::TableIndex ix = detail::TableIndex::build(layout, table);

    // every category present in the table must cover every protected word
    for (int c = 0; c < 4; ++c) {
        if (ix.n_cat[static_cast<std::size_t>(c)] == 0) continue;
        for (std::size_t w = 0; w < layout.n_protected(); ++w) {
            if (ix.n[w * 4 + static_cast<std::size_t>(c)] == 0)
                throw BayesError("protected word '" + layout.protected_words()[w] +
                                 "' has no rows in category '" +
                                 std::string(datasets::to_string(datasets::k_categories[
                                     static_cast<std::size_t>(c)])) +
                                 "'");
        }
    }

    Posterior post;
    post.layout = layout;
    post.spec = spec;
    post.config = mcmc;
    post.chain_draws.resize(static_cast<std::size_t>(mcmc.chains));
    post.scale_acceptance.resize(static_cast<std::size_t>(mcmc.chains));
    util::parallel_for(static_cast<std::size_t>(mcmc.chains), [&](std::size_t c) {
        detail::ChainResult r = detail::run_chain(layout, ix, spec, mcmc, static_cast<int>(c));
        post.chain_draws[c] = std::move(r.draws);
        post.scale_acceptance[c] = std::move(r.acceptance_rates);
    });

    post.diagnostics.resize(layout.size());
    for (std::size_t j = 0; j < layout.size(); ++j) post.diagnostics[j] = diag::diagnose(post, j);
    return post;
}

// ---------------------------------------------------------------------------
// Posterior predictive check

struct DensitySummary {
    std::vector<double> grid;
    std::vector<double> predicted;
    std::vector<double> observed;
};

struct PpcResult {
    double coverage89 = 0.0;
    double coverage50 = 0.0;
    DensitySummary density;
};

// Replicates every row's distance across the posterior draws, reports the
// fraction of observed values inside the per-row 89% and 50% HPDIs of the
// replicates, and a density overlay of predictions against observations.
inline PpcResult posterior_predictive_check(const Posterior& post, const LongTable& table,
                                            const ModelSpec& spec) {
    if (!(ModelLayout::from_table(table, spec) == post.layout))
        throw BayesError("posterior/table mismatch: protected words or noise structure differ");
    const ModelLayout& layout = post.layout;
    const std::size_t n_rows = table.rows.size();
    const std::size_t n_draws = post.total_draws();
    if (n_rows == 0) throw BayesError("ppc: empty table");

    struct RowRef {
        std::size_t coef, sigma;
        double y;
    };
    std::vector<RowRef> refs;
    refs.reserve(n_rows);
    for (const auto& row : table.rows) {
        const int c = static_cast<int>(row.category);
        refs.push_back({layout.coef_index(layout.word_index(row.protected_token), c),
                        layout.sigma_obs_index(c), row.distance});
    }

    // flattened draw access, chain-major
    std::vector<const std::vector<double>*> chains;
    for (const auto& cd : post.chain_draws) chains.push_back(&cd);
    const std::size_t per_chain = post.draws_per_chain();
    const std::size_t n_params = post.n_parameters();

    std::vector<unsigned char> in89(n_rows, 0), in50(n_rows, 0);
    const std::size_t density_stride = std::max<std::size_t>(1, n_draws / 40);
    std::vector<std::vector<double>> density_chunks(n_rows);

    util::parallel_for(n_rows, [&](std::size_t r) {
        rng::StreamRng gen(post.config.seed ^ 0x70706300ull, r);
        std::vector<double> reps(n_draws);
        std::size_t k = 0;
        for (std::size_t c = 0; c < chains.size(); ++c) {
            const std::vector<double>& cd = *chains[c];
            for (std::size_t d = 0; d < per_chain; ++d, ++k) {
                const double mu = cd[d * n_params + refs[r].coef];
                const double sg = cd[d * n_params + refs[r].sigma];
                reps[k] = gen.normal(mu, sg);
            }
        }
        for (std::size_t i = 0; i < reps.size(); i += density_stride)
            density_chunks[r].push_back(reps[i]);
        const Hpdi h89 = hpdi(reps, 0.89);
        const Hpdi h50 = hpdi(reps, 0.50);
        in89[r] = (refs[r].y >= h89.lower && refs[r].y <= h89.upper) ? 1 : 0;
        in50[r] = (refs[r].y >= h50.lower && refs[r].y <= h50.upper) ? 1 : 0;
    });

    PpcResult out;
    double c89 = 0.0, c50 = 0.0;
    for (std::size_t r = 0; r < n_rows; ++r) {
        c89 += in89[r];
        c50 += in50[r];
    }
    out.coverage89 = c89 / static_cast<double>(n_rows);
    out.coverage50 = c50 / static_cast<double>(n_rows);

    std::vector<double> predicted;
    for (auto& chunk : density_chunks)
        predicted.insert(predicted.end(), chunk.begin(), chunk.end());
    std::vector<double> observed;
    observed.reserve(n_rows);
    for (const auto& r : refs) observed.push_back(r.y);

    double lo = observed.front(), hi = observed.front();
    for (double v : predicted) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (double v : observed) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double pad = 0.05 * (hi - lo + 1e-9);
    out.density.grid.resize(128);
    for (std::size_t g = 0; g < out.density.grid.size(); ++g)
        out.density.grid[g] =
            lo - pad + (hi - lo + 2 * pad) * static_cast<double>(g) / 127.0;
    out.density.predicted = stats::gaussian_kde(predicted, out.density.grid);
    out.density.observed = stats::gaussian_kde(observed, out.density.grid);
    return out;
}

// ---------------------------------------------------------------------------
// Summaries and comparison

struct ParamSummary {
    std::string name;
    double mean = 0.0;
    Hpdi interval;
    double rhat = 1.0;
    double ess = 0.0;
};

inline std::vector<ParamSummary> summarize(const Posterior& post, double mass) {
    const auto names = post.layout.parameter_names();
    std::vector<ParamSummary> out;
    out.reserve(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const std::vector<double> xs = post.parameter_draws(j);
        ParamSummary s;
        s.name = names[j];
        s.mean = stats::mean(xs);
        s.interval = post.total_draws() == 1 ? Hpdi{xs[0], xs[0], mass} : hpdi(xs, mass);
        s.rhat = post.diagnostics[j].rhat;
        s.ess = post.diagnostics[j].ess;
        out.push_back(std::move(s));
    }
    return out;
}

struct ComparisonEntry {
    std::string name;
    double mean_before = 0.0;
    double mean_after = 0.0;
    double shift = 0.0;  // after - before
    Hpdi hpdi_before, hpdi_after;
    bool overlap = true;
};

struct GapSummary {
    double mean = 0.0;
    Hpdi interval;
};

struct ComparisonReport {
    double mass = 0.89;
    std::vector<ComparisonEntry> parameters;
    GapSummary gap_before, gap_after;  // a_bar - d_bar draws
    double abs_gap_change = 0.0;       // |gap after| - |gap before|, posterior means
};

inline ComparisonReport compare(const Posterior& before, const Posterior& after, double mass) {
    const auto names_b = before.layout.parameter_names();
    const auto names_a = after.layout.parameter_names();
    if (names_b != names_a) {
        std::string missing;
        for (const auto& n : names_b)
            if (std::find(names_a.begin(), names_a.end(), n) == names_a.end())
                missing += missing.empty() ? n : ", " + n;
        for (const auto& n : names_a)
            if (std::find(names_b.begin(), names_b.end(), n) == names_b.end())
                missing += missing.empty() ? n : ", " + n;
        throw BayesError("posterior structures differ; unmatched parameters: " +
                         (missing.empty() ? std::string("(ordering)") : missing));
    }
    ComparisonReport rep;
    rep.mass = mass;
    for (std::size_t j = 0; j < names_b.size(); ++j) {
        const std::vector<double> xb = before.parameter_draws(j);
        const std::vector<double> xa = after.parameter_draws(j);
        ComparisonEntry e;
        e.name = names_b[j];
        e.mean_before = stats::mean(xb);
        e.mean_after = stats::mean(xa);
        e.shift = e.mean_after - e.mean_before;
        e.hpdi_before = xb.size() == 1 ? Hpdi{xb[0], xb[0], mass} : hpdi(xb, mass);
        e.hpdi_after = xa.size() == 1 ? Hpdi{xa[0], xa[0], mass} : hpdi(xa, mass);
        e.overlap = !(e.hpdi_after.upper < e.hpdi_before.lower ||
                      e.hpdi_before.upper < e.hpdi_after.lower);
        rep.parameters.push_back(std::move(e));
    }
    const auto gap_summary = [&](const Posterior& p) {
        std::vector<double> gap;
        gap.reserve(p.total_draws());
        const std::size_t a = p.layout.bar_index(0);
        const std::size_t d = p.layout.bar_index(1);
        for (std::size_t c = 0; c < p.chain_draws.size(); ++c)
            for (std::size_t i = 0; i < p.draws_per_chain(); ++i)
                gap.push_back(p.value(c, i, a) - p.value(c, i, d));
        GapSummary g;
        g.mean = stats::mean(gap);
        g.interval = gap.size() == 1 ? Hpdi{gap[0], gap[0], mass} : hpdi(gap, mass);
        return g;
    };
    rep.gap_before = gap_summary(before);
    rep.gap_after = gap_summary(after);
    rep.abs_gap_change = std::abs(rep.gap_after.mean) - std::abs(rep.gap_before.mean);
    return rep;
}

}  // namespace embias::bayes
