#pragma once

#include <cstdint>
#include <stdexcept>

#include "sla/matrix.hpp"

namespace sla {

// xoshiro256** 1.0 seeded through splitmix64. Constants are pinned so the
// stream is reproducible across platforms and toolchains; none of the
// standard-library distributions are used because their output is
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

// Matrix with i.i.d. entries uniform in [-scale, scale], consumed row-major
// from the generator stream.
inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("random_matrix: empty shape");
    if (!(scale >= 0.0)) throw std::invalid_argument("random_matrix: scale must be >= 0");
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.uniform(-scale, scale);
    return m;
}

}  // namespace sla
