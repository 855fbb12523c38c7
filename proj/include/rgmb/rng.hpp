#pragma once

// Reproducible random streams. Every independent unit of work (a solver
// cell, a simulated path) owns a substream derived from the run seed and
// its integer coordinates, so results do not depend on scheduling.

#include <cstdint>
#include <random>

#include "normal.hpp"

namespace rgmb {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal by inversion (one uniform per draw).
    double normal() { return normal::quantile(uniform()); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

inline RandomStream substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t key = splitmix64(seed);
    key = splitmix64(key ^ a);
    key = splitmix64(key ^ (b * 0xd1b54a32d192ed03ULL));
    return RandomStream(key);
}

}  // namespace rgmb
