#pragma once
// Independent reference computations for tests. Each one is written the slow,
// obvious way and shares no code with the library routine it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ufv/binary_mask.hpp"
#include "ufv/rng.hpp"
#include "ufv/temporal_codec.hpp"

namespace oracle {

using Pixel = std::pair<int, int>;

inline std::set<Pixel> pixels(const ufv::BinaryMask& m) {
    std::set<Pixel> s;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m.at(x, y)) s.insert({x, y});
        }
    }
    return s;
}

// Intersection over union by explicit set operations.
inline double region_j(const ufv::BinaryMask& a, const ufv::BinaryMask& b) {
    const auto pa = pixels(a), pb = pixels(b);
    std::vector<Pixel> inter, uni;
    std::set_intersection(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(inter));
    std::set_union(pa.begin(), pa.end(), pb.begin(), pb.end(), std::back_inserter(uni));
    if (uni.empty()) return 1.0;
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

// Foreground pixels with a 4-neighbour that is background or off the image.
inline std::vector<Pixel> boundary(const ufv::BinaryMask& m) {
    const auto fg = pixels(m);
    std::vector<Pixel> out;
    for (const auto& [x, y] : fg) {
        const Pixel nb[] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& q : nb) {
            if (!fg.count(q)) {
                out.push_back({x, y});
                break;
            }
        }
    }
    return out;
}

// Share of `from` points whose nearest `to` point lies within `tol`, found
// by comparing every pair.
inline double matched_fraction(const std::vector<Pixel>& from, const std::vector<Pixel>& to, double tol) {
    if (from.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& [x, y] : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [u, v] : to) best = std::min(best, std::hypot(double(x - u), double(y - v)));
        if (best <= tol + 1e-12) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(from.size());
}

inline double contour_f(const ufv::BinaryMask& pred, const ufv::BinaryMask& truth, double tol) {
    const auto bp = boundary(pred), bt = boundary(truth);
    if (bp.empty() && bt.empty()) return 1.0;
    if (bp.empty() || bt.empty()) return 0.0;
    const double p = matched_fraction(bp, bt, tol);
    const double r = matched_fraction(bt, bp, tol);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

// Overlap over hull for overlapping intervals, zero otherwise.
inline double tiou(double s1, double e1, double s2, double e2) {
    const double lo = std::max(s1, s2), hi = std::min(e1, e2);
    if (hi <= lo) {
        if (s1 == s2 && e1 == e2) return 1.0;
        return 0.0;
    }
    const double hull = std::max(e1, e2) - std::min(s1, s2);
    return (hi - lo) / hull;
}

// Count of values strictly above k, divided by the count of values.
inline double recall(const std::vector<double>& v, double k) {
    int n = 0;
    for (double x : v) n += x > k ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(v.size());
}

inline ufv::BinaryMask random_mask(ufv::SplitMix64& rng, int w, int h, double density) {
    ufv::BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m.set(x, y, rng.uniform() < density);
    }
    return m;
}

// Random blob: union of a few rectangles, closer to real masks than noise.
inline ufv::BinaryMask random_blob(ufv::SplitMix64& rng, int w, int h) {
    ufv::BinaryMask m(w, h);
    const int n = 1 + static_cast<int>(rng.below(3));
    for (int r = 0; r < n; ++r) {
        const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(w)));
        const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(h)));
        const int x1 = std::min(w, x0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w / 2 + 1))));
        const int y1 = std::min(h, y0 + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(h / 2 + 1))));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) m.set(x, y);
        }
    }
    return m;
}

// Central difference of a scalar function of one coordinate.
inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// max|a - n| / max(max|a|, max|n|, floor) over one tensor.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                             double floor = 1e-8) {
    double diff = 0.0, scale = floor;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    return diff / scale;
}

} // namespace oracle
