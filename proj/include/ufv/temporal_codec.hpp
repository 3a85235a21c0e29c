#pragma once
//! \file
//! Relative temporal tokens.
//!
//! A time t inside a video of duration T is quantized to the token index
//! round(t / T * N) where N is the number of bins. The vocabulary holds N + 1
//! entries (0..=N) so both ends of the video are representable. Decoding is
//! the left-edge rescale index * T / N.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>

#include "ufv/error.hpp"

namespace ufv {

inline constexpr int kDefaultTemporalBins = 100;

struct TimelineSpec {
    double duration_seconds = 1.0;
    int n_bins = kDefaultTemporalBins;

    TimelineSpec() = default;
    TimelineSpec(double duration, int bins = kDefaultTemporalBins)
        : duration_seconds(duration), n_bins(bins) {
        if (!(duration > 0.0) || !std::isfinite(duration)) {
            std::ostringstream os;
            os << "timeline duration must be positive and finite, got " << duration;
            throw DomainError(os.str());
        }
        if (bins < 1) throw DomainError("timeline needs at least one bin, got " + std::to_string(bins));
    }

    //! Number of distinct temporal tokens, N + 1.
    int vocabulary_size() const noexcept { return n_bins + 1; }

    bool operator==(const TimelineSpec&) const = default;
};

struct TemporalToken {
    int index = 0;

    bool operator==(const TemporalToken&) const = default;
    auto operator<=>(const TemporalToken&) const = default;
};

//! Textual form used in prompts: `<Temp-50>`.
inline std::string to_string(TemporalToken tok) { return "<Temp-" + std::to_string(tok.index) + ">"; }

struct TimeInterval {
    double start_seconds = 0.0;
    double end_seconds = 0.0;

    TimeInterval() = default;
    TimeInterval(double start, double end) : start_seconds(start), end_seconds(end) {
        if (!(start >= 0.0) || !std::isfinite(end) || start > end) {
            std::ostringstream os;
            os << "invalid interval [" << start << ", " << end << "]";
            throw DomainError(os.str());
        }
    }

    double length() const noexcept { return end_seconds - start_seconds; }
    bool contains(double t) const noexcept { return t >= start_seconds && t <= end_seconds; }

    bool operator==(const TimeInterval&) const = default;
};

using TokenPair = std::pair<TemporalToken, TemporalToken>;

inline TemporalToken encode_time(double t, const TimelineSpec& spec) {
    if (!(t >= 0.0) || t > spec.duration_seconds) {
        std::ostringstream os;
        os << "time " << t << " s outside timeline [0, " << spec.duration_seconds << "]";
        throw DomainError(os.str());
    }
    // std::round is half-away-from-zero.
    double scaled = std::round(t / spec.duration_seconds * spec.n_bins);
    int index = static_cast<int>(scaled);
    if (index < 0) index = 0;
    if (index > spec.n_bins) index = spec.n_bins;
    return TemporalToken{index};
}

inline double decode_time(TemporalToken tok, const TimelineSpec& spec) {
    if (tok.index < 0 || tok.index > spec.n_bins) {
        throw DomainError("temporal token index " + std::to_string(tok.index) + " outside vocabulary [0, " +
                          std::to_string(spec.n_bins) + "]");
    }
    return tok.index * spec.duration_seconds / spec.n_bins;
}

inline TokenPair encode_interval(const TimeInterval& iv, const TimelineSpec& spec) {
    return {encode_time(iv.start_seconds, spec), encode_time(iv.end_seconds, spec)};
}

inline TimeInterval decode_interval(const TokenPair& pair, const TimelineSpec& spec) {
    if (pair.first.index > pair.second.index) {
        throw MalformedIntervalError("temporal pair out of order: " + to_string(pair.first) +
                                     to_string(pair.second));
    }
    return TimeInterval(decode_time(pair.first, spec), decode_time(pair.second, spec));
}

} // namespace ufv
