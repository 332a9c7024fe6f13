#pragma once

// Vector arithmetic underneath every bias measure: cosine similarity and
// distance, the dominant direction of a set of difference vectors, and
// projection-based direct bias.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace embias::geometry {

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Unit vector; Euclidean norm 1 within 1e-12.
struct Direction {
    std::vector<double> unit;
};

namespace detail {

template <typename A, typename B>
void check_same_length(const A& a, const B& b) {
    if (a.size() != b.size())
        throw GeometryError("vector length mismatch: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
    if (a.empty()) throw GeometryError("empty vectors");
}

}  // namespace detail

// Cosine similarity, clamped to [-1, 1] to absorb rounding. All arithmetic in
// double regardless of the input element type.
template <typename A, typename B>
double cosine_similarity(const A& a, const B& b) {
    detail::check_same_length(a, b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = static_cast<double>(a[i]);
        const double y = static_cast<double>(b[i]);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) throw GeometryError("zero-norm input to cosine similarity");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// 1 - cosine similarity, in [0, 2].
template <typename A, typename B>
double cosine_distance(const A& a, const B& b) {
    return 1.0 - cosine_similarity(a, b);
}

// Dominant eigenvector of D^T D where D stacks the uncentered pair
// differences (first - second). Power iteration from the deterministic start
// (1,..,1)/sqrt(dim), tolerance 1e-10 on successive angular change, at most
// 1000 iterations. Sign is fixed so the first nonzero coordinate is positive.
// Throws when the top two eigenvalues tie (direction not identifiable).
inline Direction principal_direction(
    const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
    if (pairs.empty()) throw GeometryError("principal_direction: no pairs");
    const std::size_t dim = pairs.front().first.size();
    if (dim == 0) throw GeometryError("principal_direction: zero-dimensional vectors");

    std::vector<std::vector<double>> diffs;
    diffs.reserve(pairs.size());
    bool any_nonzero = false;
    for (const auto& [lhs, rhs] : pairs) {
        detail::check_same_length(lhs, rhs);
        if (lhs.size() != dim) throw GeometryError("principal_direction: inconsistent dimensions");
        std::vector<double> d(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            d[i] = lhs[i] - rhs[i];
            if (d[i] != 0.0) any_nonzero = true;
        }
        diffs.push_back(std::move(d));
    }
    if (!any_nonzero) throw GeometryError("principal_direction: all difference vectors are zero");

    // Gram matrix G = D^T D, dim x dim.
    std::vector<double> gram(dim * dim, 0.0);
    for (const auto& d : diffs)
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) gram[i * dim + j] += d[i] * d[j];

    const auto apply = [&](const std::vector<double>& v) {
        std::vector<double> out(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) acc += gram[i * dim + j] * v[j];
            out[i] = acc;
        }
        return out;
    };
    const auto norm = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x * x;
        return std::sqrt(acc);
    };
    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i) trace += gram[i * dim + i];

    // Power iteration; when `deflate` is set the iterate is re-projected off
    // that unit vector every step, yielding the next eigenpair. Norms below
    // the thresholds are projection round-off, not signal.
    const auto power_iterate = [&](std::vector<double> v, const std::vector<double>* deflate,
                                   double& lambda_out) {
        constexpr double tol = 1e-10;
        constexpr int max_iter = 1000;
        const auto project_off = [&](std::vector<double>& x) {
            double proj = 0.0;
            for (std::size_t i = 0; i < dim; ++i) proj += x[i] * (*deflate)[i];
            for (std::size_t i = 0; i < dim; ++i) x[i] -= proj * (*deflate)[i];
        };
        if (deflate) project_off(v);
        double nv = norm(v);
        if (nv <= 1e-8) {
            // start lies in the removed subspace; restart from a basis vector
            std::fill(v.begin(), v.end(), 0.0);
            std::size_t best = 0;
            for (std::size_t i = 1; i < dim; ++i)
                if (gram[i * dim + i] > gram[best * dim + best]) best = i;
            v[best] = 1.0;
            if (deflate) project_off(v);
            nv = norm(v);
            if (nv <= 1e-8) {
                lambda_out = 0.0;
                return v;
            }
        }
        for (auto& x : v) x /= nv;
        for (int it = 0; it < max_iter; ++it) {
            std::vector<double> w = apply(v);
            if (deflate) project_off(w);
            const double nw = norm(w);
            if (nw <= trace * 1e-14) {
                lambda_out = 0.0;  // v is annihilated up to round-off
                return v;
            }
            for (auto& x : w) x /= nw;
            // successive angular change, measured as the chord between unit
            // iterates (the Gram matrix is PSD, so consecutive iterates never
            // flip orientation); for small angles chord and angle coincide
            double chord2 = 0.0;
            for (std::size_t i = 0; i < dim; ++i) chord2 += (w[i] - v[i]) * (w[i] - v[i]);
            const double change = std::sqrt(chord2);
            v = std::move(w);
            if (change <= tol) {
                std::vector<double> gv = apply(v);
                double lambda = 0.0;
                for (std::size_t i = 0; i < dim; ++i) lambda += v[i] * gv[i];
                lambda_out = lambda;
                return v;
            }
        }
        throw GeometryError("principal_direction: power iteration did not converge");
    };

    const std::vector<double> start(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    double lambda1 = 0.0;
    std::vector<double> top = power_iterate(start, nullptr, lambda1);
    double lambda2 = 0.0;
    (void)power_iterate(start, &top, lambda2);

    // The deterministic start can sit in a lower eigenspace, in which case the
    // deflated run finds a larger eigenvalue; restart from the dominant
    // diagonal's basis vector.
    if (lambda2 > lambda1 * (1.0 + 1e-12)) {
        std::vector<double> e0(dim, 0.0);
        std::size_t best = 0;
        for (std::size_t i = 1; i < dim; ++i)
            if (gram[i * dim + i] > gram[best * dim + best]) best = i;
        e0[best] = 1.0;
        top = power_iterate(e0, nullptr, lambda1);
        (void)power_iterate(start, &top, lambda2);
    }
    if (lambda1 <= 0.0 || (lambda1 - lambda2) / lambda1 < 1e-6)
        throw GeometryError("principal_direction: degenerate tie between top eigenvalues");

    for (std::size_t i = 0; i < dim; ++i) {
        if (std::abs(top[i]) > 1e-12) {
            if (top[i] < 0.0)
                for (auto& x : top) x = -x;
            break;
        }
    }
    return Direction{std::move(top)};
}

// Mean of |cos(w, dir)|^c over the words; in [0, 1]. c sets how strictly
// partial alignment is discounted; callers default it to 1.
inline double direct_bias(const std::vector<std::vector<double>>& words, const Direction& dir,
                          double c = 1.0) {
    if (words.empty()) throw GeometryError("direct_bias: empty word list");
    if (!(c > 0.0)) throw GeometryError("direct_bias: c must be positive");
    double acc = 0.0;
    for (const auto& w : words) acc += std::pow(std::abs(cosine_similarity(w, dir.unit)), c);
    return acc / static_cast<double>(words.size());
}

}  // namespace embias::geometry
