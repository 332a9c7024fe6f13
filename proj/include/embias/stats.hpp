#pragma once

// Scalar statistics and the small set of special functions the analyses need
// (normal pdf/cdf/quantile, regularized incomplete beta for Student-t tails,
// binomial coefficients, Kolmogorov-Smirnov distance against Uniform[0,1]).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace embias::stats {

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

// Population variance (divide by N).
inline double variance_pop(std::span<const double> xs) {
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size());
}

// Sample variance (divide by N-1).
inline double variance_sample(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("variance_sample: need at least 2 values");
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size() - 1);
}

inline double stddev_pop(std::span<const double> xs) { return std::sqrt(variance_pop(xs)); }
inline double stddev_sample(std::span<const double> xs) { return std::sqrt(variance_sample(xs)); }

inline double normal_log_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sigma) - 0.5 * z * z;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Inverse standard normal CDF: Acklam's rational approximation refined with
// one Halley step, giving close to full double precision.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
    return x;
}

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("incomplete_beta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::betacf(a, b, x) / a;
    return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_cdf: df must be positive");
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double half_tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - half_tail : half_tail;
}

// Two-sided tail probability P(|T_df| >= |t|).
inline double student_t_two_sided_p(double t, double df) {
    if (t == 0.0) return 1.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

// Upper quantile by bisection; p in (0,1).
inline double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile: p in (0,1)");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -student_t_quantile(1.0 - p, df);
    double lo = 0.0;
    double hi = 1.0;
    while (student_t_cdf(hi, df) < p && hi < 1e12) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Exact binomial coefficient; throws when the value exceeds the guard.
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k,
                              std::uint64_t guard = std::numeric_limits<std::uint64_t>::max() / 2) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    // c * (n-k+i) / i is exact at every step; 128-bit intermediate avoids overflow.
    unsigned __int128 c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > static_cast<unsigned __int128>(guard))
            throw std::overflow_error("binomial: coefficient exceeds guard");
    }
    return static_cast<std::uint64_t>(c);
}

// Gaussian kernel density estimate on a fixed grid (Silverman-style
// bandwidth); deterministic, used for density plots and PPC summaries.
inline std::vector<double> gaussian_kde(std::span<const double> values,
                                        std::span<const double> grid) {
    if (values.empty()) throw std::invalid_argument("gaussian_kde: empty sample");
    const double n = static_cast<double>(values.size());
    const double sd = values.size() > 1 ? stddev_sample(values) : 1.0;
    const double bw = std::max(0.9 * sd * std::pow(n, -0.2), 1e-6);
    std::vector<double> out(grid.size(), 0.0);
    const double norm = 1.0 / (n * bw * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double v : values) {
            const double z = (grid[g] - v) / bw;
            acc += std::exp(-0.5 * z * z);
        }
        out[g] = acc * norm;
    }
    return out;
}

// Kolmogorov-Smirnov distance of a sample from Uniform[0,1].
inline double ks_distance_uniform(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("ks_distance_uniform: empty input");
    std::vector<double> xs(values.begin(), values.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fi = std::clamp(xs[i], 0.0, 1.0);
        d = std::max(d, (static_cast<double>(i) + 1.0) / n - fi);
        d = std::max(d, fi - static_cast<double>(i) / n);
    }
    return d;
}

}  // namespace embias::stats
