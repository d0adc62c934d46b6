#pragma once

#include <cstdint>
#include <random>

namespace spendmax {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Per-path normal generator.  The stream is a pure function of
// (seed, path index), so estimates are identical no matter how paths are
// distributed over threads.  With antithetic sampling, paths 2k and 2k+1
// share stream k and the odd one negates every draw.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index, bool antithetic)
        : sign_(antithetic && (path_index & 1) ? -1.0 : 1.0) {
        const std::uint64_t stream = antithetic ? path_index / 2 : path_index;
        eng_.seed(splitmix64(seed ^ splitmix64(stream)));
    }

    double normal() { return sign_ * dist_(eng_); }

private:
    std::mt19937_64 eng_;
    std::normal_distribution<double> dist_;
    double sign_;
};

}  // namespace spendmax
