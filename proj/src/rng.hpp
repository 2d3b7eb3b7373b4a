#pragma once

#include <cstdint>
#include <random>

namespace regvar::detail {

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double symmetric_uniform(std::mt19937_64& rng, double magnitude) {
    return magnitude * (2.0 * unit_uniform(rng) - 1.0);
}

} // namespace regvar::detail
