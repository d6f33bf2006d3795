#pragma once

#include <cstdint>

namespace mdopt {

// Counter-based uniform numbers: the value for (seed, counter) is a pure
// function of its inputs, so sampling order and thread count do not matter.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(splitmix64(seed) ^ (counter * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL));
}

// Uniform on [0, 1) with 53 random bits.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(counter_hash(seed, counter) >> 11) * 0x1.0p-53;
}

}  // namespace mdopt
