#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace firecast {

/// Explicit, seedable generator. Draws go through the helpers below rather
/// than <random> distributions so sequences are identical across standard
/// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform on (0, 1].
    double uniform_open_zero() { return 1.0 - uniform(); }
    double exponential(double rate);
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent child seed from (seed, stream).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct KsResult {
    double statistic{0.0};
    double p_value{1.0};
};

/// One-sample Kolmogorov-Smirnov test against Exp(rate), with the asymptotic
/// Kolmogorov distribution and Stephens' small-sample correction.
[[nodiscard]] KsResult ks_test_exponential(std::span<const double> samples, double rate);

/// P(K > x) for the Kolmogorov distribution.
[[nodiscard]] double kolmogorov_survival(double x);

[[nodiscard]] double median(std::vector<double> values);

/// 64-bit FNV-1a, used for artifact and config fingerprints.
[[nodiscard]] std::uint64_t fnv1a64(std::span<const char> bytes);

}  // namespace firecast
