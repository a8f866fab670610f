#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mf {

// splitmix64: cheap, well-mixed expansion of a user seed into substream seeds.
// Keeping the mixing explicit (instead of seed_seq) pins the byte-identical
// reproducibility contract across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d4a9c769f8bce3ull;
    return z ^ (z >> 31);
}

// Deterministic substream: mixes (seed, stream) so replications and named
// streams (arrivals/work/ties) never overlap.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix64(s);
    s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
    std::uint64_t b = splitmix64(s);
    return std::mt19937_64(a ^ (b << 1));
}

// Uniform in (0,1): never returns 0 or 1, safe for log/inverse transforms.
inline double uniform01(std::mt19937_64& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Inverse-transform exponential; used instead of std::exponential_distribution
// so draws are bit-stable across standard library implementations.
inline double exponential(std::mt19937_64& g, double rate) {
    return -std::log(uniform01(g)) / rate;
}

}  // namespace mf
