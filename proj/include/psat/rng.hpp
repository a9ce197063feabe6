#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace psat {

// Deterministic RNG wrapper. All randomness in the project flows through
// this type so that a given seed reproduces bit-identical results across
// runs and platforms (the raw mt19937_64 stream is pinned by the standard;
// the mappings below avoid implementation-defined distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Uniform double in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    std::uint64_t raw() { return gen_(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace psat
