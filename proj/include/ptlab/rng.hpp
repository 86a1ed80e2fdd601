#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ptlab {

// Deterministic random source. Sampling is implemented here instead of with
// std::*_distribution so that streams are identical across standard library
// implementations (mt19937_64 itself is fully specified; the distributions
// are not).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    uint64_t uniform_u64(uint64_t n);

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the paired value is cached.
    double normal();

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Stable sub-stream seed for a named purpose ("corpus", "train", ...).
uint64_t derive_seed(uint64_t base, const std::string& label);

}  // namespace ptlab
