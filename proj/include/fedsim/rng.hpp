#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "fedsim/common.hpp"

namespace fedsim {

// SplitMix64 finalizer. Used to derive independent per-run streams from a
// master seed and a run counter, so run k never depends on runs 1..k-1.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t counter) {
    std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic generator. Distributions are hand-rolled on top of
// mt19937_64 because the std distributions are implementation-defined.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), unbiased via rejection
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // K ~ Geom(p) with P(K = k) = (1-p)^k p, k = 0, 1, 2, ...
    std::int64_t geometric(double p) {
        if (p <= 0.0 || p > 1.0) throw invalid_config("geometric: p must be in (0,1]");
        if (p == 1.0) return 0;
        double u = uniform();
        while (u <= 0.0) u = uniform();  // guard log(0)
        return static_cast<std::int64_t>(std::floor(std::log(u) / std::log1p(-p)));
    }

    // m-subset of {0,...,n-1}, uniform over all C(n,m) subsets.
    // Partial Fisher-Yates, result sorted so downstream reductions are
    // order-deterministic.
    std::vector<int> subset(int n, int m) {
        if (m < 1 || m > n) throw invalid_input("subset: need 1 <= m <= n");
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        for (int i = 0; i < m; ++i) {
            const int j = i + static_cast<int>(uniform_index(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[i], pool[j]);
        }
        std::vector<int> out(pool.begin(), pool.begin() + m);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace fedsim
