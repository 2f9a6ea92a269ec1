#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pacsbo {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Counter-derived seed: a pure function of the base seed and a path of
/// indices, so independent streams never depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(base);
    for (std::uint64_t p : path) {
        s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    }
    return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(base, path));
}

/// Gaussian with standard deviation sigma, truncated to [-2 sigma, 2 sigma]
/// by rejection. sigma == 0 returns 0.
inline double truncated_normal(Rng& rng, double sigma) {
    if (sigma <= 0.0) {
        return 0.0;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
        const double z = normal(rng);
        if (z >= -2.0 && z <= 2.0) {
            return sigma * z;
        }
    }
}

}  // namespace pacsbo
