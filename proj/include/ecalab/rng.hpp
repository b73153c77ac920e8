#pragma once

#include <cstdint>

#include "ecalab/bitvec.hpp"

namespace ecalab {

// SplitMix64 (Steele/Lea/Flood). One 64-bit word of state, one finalizer.
// This is the project-wide generator: it is seedable, counter-style (state
// advances by a fixed odd gamma), and sub-streams are derived by re-mixing
// (master, tag, index). The algorithm is frozen under dataset format_version 1
// so datasets regenerate bit-identically across implementations.
inline constexpr uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ull;

constexpr uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Sub-stream seed for (master, tag, index): mix64(mix64(mix64(master) ^ tag) ^ index).
constexpr uint64_t derive_seed(uint64_t master, uint64_t tag, uint64_t index) {
    return mix64(mix64(mix64(master) ^ tag) ^ index);
}

class SplitMix64 {
public:
    explicit constexpr SplitMix64(uint64_t seed) : state_(seed) {}

    constexpr uint64_t next() {
        state_ += kSplitMixGamma;
        return mix64(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool next_bit() { return next() >> 63; }

    // Unbiased integer in [0, bound) via Lemire's multiply-shift with rejection.
    uint64_t next_below(uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * bound;
        uint64_t lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            const uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next()) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // nbits i.i.d. uniform bits, filled word by word, LSB-first.
    BitVec next_bits(uint32_t nbits) {
        BitVec v(nbits);
        for (size_t j = 0; j < v.word_count(); ++j) v.set_word(j, next());
        return v;
    }

private:
    uint64_t state_;
};

}  // namespace ecalab
