#pragma once

// Reproducible random streams. A stream is addressed by (master seed, stream
// index); parallel workers own disjoint streams so aggregation order never
// changes results. Uniform and normal variates are generated from raw engine
// output rather than std::*_distribution, whose algorithms the standard
// leaves unspecified.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace embias::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xD1B54A32D192ED03ull * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b >> 1);
}

class StreamRng {
  public:
    StreamRng(std::uint64_t master_seed, std::uint64_t stream_index)
        : gen_(derive_stream_seed(master_seed, stream_index)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Marsaglia's polar method (one spare cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double v1 = 0.0, v2 = 0.0, s = 0.0;
        do {
            v1 = 2.0 * uniform01() - 1.0;
            v2 = 2.0 * uniform01() - 1.0;
            s = v1 * v1 + v2 * v2;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v2 * f;
        have_spare_ = true;
        return v1 * f;
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("StreamRng::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = gen_();
            if (r >= threshold) return r % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::swap(xs[i - 1], xs[below(i)]);
        }
    }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace embias::rng
