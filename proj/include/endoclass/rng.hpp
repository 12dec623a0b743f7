#pragma once

#include <cstdint>
#include <random>

namespace endoclass {

// splitmix64 finalizer; used to derive independent seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Deterministic RNG. mt19937_64 has a standard-mandated output sequence and
// the uniform draws below are built from its raw bits, so a given seed yields
// identical streams on every platform. Never use std::*_distribution here:
// their algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Private stream for one (seed, stream_tag, index) triple. Streams are
    // independent of draw order elsewhere, which is what makes per-sample
    // augmentation safe to parallelize.
    static Rng derive(std::uint64_t seed, std::uint64_t stream_tag, std::uint64_t index) {
        return Rng(mix64(mix64(seed) ^ mix64(stream_tag ^ mix64(index))));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) {
        auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace endoclass
