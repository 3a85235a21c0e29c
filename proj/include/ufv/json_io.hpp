#pragma once
//! \file
//! JSON forms of masks and intervals shared by manifests, source records and
//! prediction files.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "ufv/binary_mask.hpp"
#include "ufv/error.hpp"
#include "ufv/temporal_codec.hpp"

namespace ufv {

using json = nlohmann::json;

//! `{"w": W, "h": H, "rle": [r0, r1, ...]}`
inline json mask_to_json(const BinaryMask& m) {
    return json{{"w", m.width()}, {"h", m.height()}, {"rle", m.to_rle()}};
}

inline BinaryMask mask_from_json(const json& j) {
    if (!j.is_object() || !j.contains("w") || !j.contains("h") || !j.contains("rle")) {
        throw ParseError("mask must be an object with w, h and rle");
    }
    const int w = j.at("w").get<int>();
    const int h = j.at("h").get<int>();
    return BinaryMask::from_rle(w, h, j.at("rle").get<std::vector<std::uint32_t>>());
}

inline json interval_to_json(const TimeInterval& iv) { return json::array({iv.start_seconds, iv.end_seconds}); }

inline TimeInterval interval_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ParseError("interval must be a two-element array");
    return TimeInterval(j[0].get<double>(), j[1].get<double>());
}

} // namespace ufv
