#pragma once

#include <cstdint>
#include <random>

namespace maintcause::rng {

// Independent random streams. Each (seed, stream, index) triple maps to its own
// engine, so per-contract draws do not depend on evaluation order.
enum class Stream : std::uint64_t {
    kCovariates = 1,
    kSplit = 2,
    kOutcomeWeights = 3,
    kBiasWeights = 4,
    kNoise = 5,
    kTreatment = 6,
    kInit = 7,
    kShuffle = 8,
    kAdversarial = 9,
    kAugment = 10,
};

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive(std::uint64_t seed, Stream stream, std::uint64_t index = 0) noexcept {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
    return splitmix64(h ^ (index * 0xd1b54a32d192ed03ULL));
}

inline Engine engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
    return Engine(derive(seed, stream, index));
}

inline double uniform(Engine& e, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(e);
}

inline double normal(Engine& e) { return std::normal_distribution<double>(0.0, 1.0)(e); }

// Beta(a, b) as a ratio of unit-scale gammas.
inline double beta(Engine& e, double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(e);
    const double y = std::gamma_distribution<double>(b, 1.0)(e);
    return x / (x + y);
}

}  // namespace maintcause::rng
