#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cvqrng {

/// Deterministic random stream built on mt19937_64.
///
/// Uniform and normal variates are derived from the raw 64-bit output with
/// fixed algorithms (53-bit mantissa fill, Marsaglia polar method), so a given
/// seed yields the same doubles on every standard library implementation.
/// Not suitable for cryptographic use.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for a named module, optionally indexed (per block, per thread).
    static RngStream substream(std::uint64_t global_seed, std::string_view name,
                               std::uint64_t index = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Uniform in [0, 2*pi).
    double phase();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// splitmix64 finalizer; used to derive substream seeds.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace cvqrng
