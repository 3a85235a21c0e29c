#pragma once
//! \file
//! SplitMix64: a tiny splittable 64-bit generator. Every seeded step in the
//! toolkit (builder prompt choice, synthetic corpora, initialization) draws
//! from it so runs are reproducible across platforms, unlike std::
//! distributions whose output is implementation-defined.

#include <cstdint>
#include <string_view>

namespace ufv {

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    //! Independent child stream; the parent advances by one draw.
    SplitMix64 split() noexcept { return SplitMix64((*this)() ^ 0x6A09E667F3BCC909ULL); }

    //! Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    //! Uniform integer in [0, n). n must be > 0. Lemire-free modulo; bias is
    //! below 2^-40 for the small ranges used here.
    std::uint64_t below(std::uint64_t n) noexcept { return (*this)() % n; }

private:
    std::uint64_t state_;
};

//! FNV-1a; used to derive per-record streams from a global seed.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline SplitMix64 stream_for(std::uint64_t seed, std::string_view key) noexcept {
    SplitMix64 mix(seed ^ fnv1a(key));
    return mix.split();
}

} // namespace ufv
