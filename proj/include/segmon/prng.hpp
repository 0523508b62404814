#pragma once

#include <cstdint>

namespace segmon {

// SplitMix64. One shared stream drives a whole scenario run so that runs
// are bit-reproducible across platforms and implementations; the draw
// schedule (traffic jitter first, then mesh hop draws in event order) is
// part of the scenario contract.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    uint64_t state() const { return state_; }

private:
    uint64_t state_;
};

} // namespace segmon
