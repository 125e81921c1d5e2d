#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vne_admit {

/// SplitMix64 finalizer; used to derive independent seeds from (parent, key) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) noexcept {
    return mix64(mix64(parent) ^ mix64(key + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) noexcept {
    for (auto k : path) parent = derive_seed(parent, k);
    return parent;
}

/// Named sub-streams of a simulation run.
enum class Stream : std::uint64_t {
    arrivals = 1,
    embedder = 2,
    exploration = 3,
    replay = 4,
    init = 5,
    layout = 6,
};

/// Seedable generator that can be split into statistically independent children.
class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    Rng split(std::uint64_t key) const { return Rng(derive_seed(seed_, key)); }
    Rng split(Stream s) const { return split(static_cast<std::uint64_t>(s)); }

    /// Uniform integer on the closed range [lo, hi].
    template <typename Int>
    Int uniform_int(Int lo, Int hi) {
        return std::uniform_int_distribution<Int>(lo, hi)(engine_);
    }

    /// Uniform real on [lo, hi).
    double uniform_real(double lo = 0.0, double hi = 1.0) {
        return std::uniform_real_distribution<double>(lo, hi)(engine_);
    }

    double normal(double mean, double stddev) {
        return std::normal_distribution<double>(mean, stddev)(engine_);
    }

    bool bernoulli(double p) { return uniform_real() < p; }

    std::mt19937_64& engine() noexcept { return engine_; }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace vne_admit
