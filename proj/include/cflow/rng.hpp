#pragma once

#include <cstdint>

namespace cflow {

/// Counter-based splitmix64 stream. Each (seed, stream) pair is an
/// independent reproducible sequence; child streams are derived by label so
/// parallel consumers never share state.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

    Rng child(std::uint64_t label) const {
        Rng r(0);
        r.base_ = mix(base_ ^ mix(label + 0xbf58476d1ce4e5b9ULL));
        return r;
    }

    std::uint64_t next() { return mix(base_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // modulo bias is negligible for n far below 2^64
        return next() % n;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace cflow
