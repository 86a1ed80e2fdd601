#include "ptlab/rng.hpp"

#include <cmath>
#include <cstring>

#include "ptlab/digest.hpp"

namespace ptlab {

uint64_t Rng::uniform_u64(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = gen_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u1;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

uint64_t derive_seed(uint64_t base, const std::string& label) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(base >> (8 * i));
    uint64_t h = fnv1a64(bytes, 8);
    h = fnv1a64(label.data(), label.size(), h);
    return h;
}

}  // namespace ptlab
