#pragma once

#include <cstdint>
#include <random>

namespace numgen {

// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Seed splitting rule shared by every stage:
//   derive_seed(m, i) = splitmix64(m ^ splitmix64(i + 0x9E3779B97F4A7C15))
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

// Portable random stream. The engine is std::mt19937_64 (fully specified by the
// standard); the distributions are implemented here because the std:: ones are
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();

    // Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller; the second variate is cached.
    double normal();

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace numgen
