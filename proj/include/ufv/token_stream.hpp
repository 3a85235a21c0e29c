#pragma once
//! \file
//! Unified token stream: text, temporal, reference, segmentation and video
//! patch tokens in one sequence, plus the position mask that locates the
//! segmentation tokens and the row gather that extracts their hidden states.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "ufv/error.hpp"
#include "ufv/temporal_codec.hpp"

namespace ufv {

inline constexpr int kDefaultMaxObjects = 4;
inline constexpr int kDefaultTokensPerObject = 4;

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace tok {

struct Text {
    int vocab_id = 0;
    bool operator==(const Text&) const = default;
};
struct Temp {
    int index = 0;
    bool operator==(const Temp&) const = default;
};
struct Ref {
    int object_slot = 0;
    bool operator==(const Ref&) const = default;
};
struct Seg {
    int object_slot = 0;
    bool operator==(const Seg&) const = default;
};
struct VideoPatch {
    int ordinal = 0;
    bool operator==(const VideoPatch&) const = default;
};
//! One of the U projected object tokens that replace a Ref placeholder.
struct Object {
    int object_slot = 0;
    int embedding_index = 0;
    bool operator==(const Object&) const = default;
};

} // namespace tok

using Token = std::variant<tok::Text, tok::Temp, tok::Ref, tok::Seg, tok::VideoPatch, tok::Object>;

template <typename Kind>
bool is(const Token& t) noexcept {
    return std::holds_alternative<Kind>(t);
}

struct TokenSequence {
    std::vector<Token> tokens;
    std::optional<TimelineSpec> timeline;

    std::size_t size() const noexcept { return tokens.size(); }
    bool operator==(const TokenSequence&) const = default;
};

struct PositionMask {
    std::vector<bool> flags;

    std::size_t size() const noexcept { return flags.size(); }
    std::size_t popcount() const noexcept {
        return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
    }
    bool operator==(const PositionMask&) const = default;
};

//! A special token placed before question text token `position`
//! (position == text length appends it).
struct SlotAt {
    int slot = 0;
    std::size_t position = 0;
};

struct TempPairAt {
    TokenPair pair;
    std::size_t position = 0;
};

struct TempPointAt {
    TemporalToken token;
    std::size_t position = 0;
};

struct SequenceParts {
    std::vector<int> text_ids;
    int video_patch_count = 0;
    std::vector<SlotAt> ref_slots;
    std::vector<SlotAt> seg_slots;
    std::vector<TempPairAt> temp_pairs;
    std::vector<TempPointAt> temp_points;
    std::optional<TimelineSpec> timeline;
    //! Text vocabulary size L_V; 0 disables the id range check.
    int text_vocab = 0;
    int max_objects = kDefaultMaxObjects;
};

namespace detail {

inline void check_slots(const std::vector<SlotAt>& slots, const char* kind, int max_objects, std::size_t text_len) {
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const SlotAt& s = slots[i];
        if (s.slot < 0 || s.slot >= max_objects) {
            throw ConstructionError(std::string(kind) + " slot " + std::to_string(s.slot) + " outside [0, " +
                                    std::to_string(max_objects) + ")");
        }
        if (s.position > text_len) {
            throw ConstructionError(std::string(kind) + " position " + std::to_string(s.position) +
                                    " past end of text");
        }
        if (i > 0) {
            if (s.slot == slots[i - 1].slot) {
                throw ConstructionError(std::string("duplicate ") + kind + " object slot " + std::to_string(s.slot));
            }
            if (s.slot < slots[i - 1].slot) {
                throw ConstructionError(std::string(kind) + " slots must be strictly ascending");
            }
            if (s.position < slots[i - 1].position) {
                throw ConstructionError(std::string(kind) + " slots must appear in ascending order");
            }
        }
    }
}

inline void check_temp(TemporalToken t, const std::optional<TimelineSpec>& timeline) {
    if (t.index < 0 || (timeline && t.index > timeline->n_bins)) {
        throw ConstructionError("temporal token index " + std::to_string(t.index) + " invalid for timeline");
    }
}

} // namespace detail

//! Assembles [video patch block] ++ question text with the special tokens
//! spliced in front of their text positions. At equal positions the order is
//! Ref, Temp, Seg.
inline TokenSequence build_sequence(const SequenceParts& parts) {
    if (parts.video_patch_count < 0) throw ConstructionError("negative video patch count");
    const std::size_t n_text = parts.text_ids.size();
    detail::check_slots(parts.ref_slots, "ref", parts.max_objects, n_text);
    detail::check_slots(parts.seg_slots, "seg", parts.max_objects, n_text);
    for (int id : parts.text_ids) {
        if (id < 0 || (parts.text_vocab > 0 && id >= parts.text_vocab)) {
            throw ConstructionError("text id " + std::to_string(id) + " outside vocabulary");
        }
    }

    // (position, kind rank, order of appearance) -> tokens
    std::vector<std::tuple<std::size_t, int, std::size_t, std::vector<Token>>> inserts;
    std::size_t order = 0;
    for (const SlotAt& r : parts.ref_slots) inserts.emplace_back(r.position, 0, order++, std::vector<Token>{tok::Ref{r.slot}});
    for (const TempPairAt& p : parts.temp_pairs) {
        if (p.position > n_text) throw ConstructionError("temporal pair position past end of text");
        detail::check_temp(p.pair.first, parts.timeline);
        detail::check_temp(p.pair.second, parts.timeline);
        inserts.emplace_back(p.position, 1, order++,
                             std::vector<Token>{tok::Temp{p.pair.first.index}, tok::Temp{p.pair.second.index}});
    }
    for (const TempPointAt& p : parts.temp_points) {
        if (p.position > n_text) throw ConstructionError("temporal point position past end of text");
        detail::check_temp(p.token, parts.timeline);
        inserts.emplace_back(p.position, 1, order++, std::vector<Token>{tok::Temp{p.token.index}});
    }
    for (const SlotAt& s : parts.seg_slots) inserts.emplace_back(s.position, 2, order++, std::vector<Token>{tok::Seg{s.slot}});
    std::sort(inserts.begin(), inserts.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a), std::get<2>(a)) <
               std::tie(std::get<0>(b), std::get<1>(b), std::get<2>(b));
    });

    TokenSequence seq;
    seq.timeline = parts.timeline;
    seq.tokens.reserve(static_cast<std::size_t>(parts.video_patch_count) + n_text + inserts.size() * 2);
    for (int k = 0; k < parts.video_patch_count; ++k) seq.tokens.push_back(tok::VideoPatch{k});
    auto next = inserts.begin();
    for (std::size_t i = 0; i <= n_text; ++i) {
        for (; next != inserts.end() && std::get<0>(*next) == i; ++next) {
            const auto& toks = std::get<3>(*next);
            seq.tokens.insert(seq.tokens.end(), toks.begin(), toks.end());
        }
        if (i < n_text) seq.tokens.push_back(tok::Text{parts.text_ids[i]});
    }
    return seq;
}

inline PositionMask seg_position_mask(const TokenSequence& seq) {
    PositionMask mask;
    mask.flags.reserve(seq.size());
    for (const Token& t : seq.tokens) mask.flags.push_back(is<tok::Seg>(t));
    return mask;
}

//! Replaces every Ref(k) with the object tokens listed for slot k. The map
//! must cover exactly the Ref slots present in the sequence.
inline TokenSequence inject_ref_tokens(const TokenSequence& seq, const std::map<int, std::vector<int>>& object_tokens) {
    std::map<int, bool> seen;
    for (const Token& t : seq.tokens) {
        if (const auto* r = std::get_if<tok::Ref>(&t)) seen[r->object_slot] = true;
    }
    for (const auto& [slot, _] : seen) {
        auto it = object_tokens.find(slot);
        if (it == object_tokens.end()) {
            throw ConstructionError("no object tokens supplied for ref slot " + std::to_string(slot));
        }
        if (it->second.empty()) throw ConstructionError("empty object token list for ref slot " + std::to_string(slot));
    }
    for (const auto& [slot, _] : object_tokens) {
        if (!seen.count(slot)) {
            throw ConstructionError("object tokens supplied for slot " + std::to_string(slot) +
                                    " which has no ref token");
        }
    }

    TokenSequence out;
    out.timeline = seq.timeline;
    out.tokens.reserve(seq.size());
    for (const Token& t : seq.tokens) {
        if (const auto* r = std::get_if<tok::Ref>(&t)) {
            for (int idx : object_tokens.at(r->object_slot)) out.tokens.push_back(tok::Object{r->object_slot, idx});
        } else {
            out.tokens.push_back(t);
        }
    }
    return out;
}

//! Rows of `h` where the mask is set, in sequence order. Equivalent to the
//! nonzero rows of the masked product diag(mask) * h.
inline EmbeddingMatrix gather_seg_embeddings(const EmbeddingMatrix& h, const PositionMask& mask) {
    if (static_cast<Eigen::Index>(mask.size()) != h.rows()) {
        throw ShapeError("position mask length " + std::to_string(mask.size()) + " != hidden rows " +
                         std::to_string(h.rows()));
    }
    EmbeddingMatrix out(static_cast<Eigen::Index>(mask.popcount()), h.cols());
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask.flags[i]) out.row(r++) = h.row(static_cast<Eigen::Index>(i));
    }
    return out;
}

// --- JSON -----------------------------------------------------------------

inline nlohmann::json to_json(const Token& t) {
    return std::visit(
        [](const auto& v) -> nlohmann::json {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, tok::Text>) return {{"kind", "text"}, {"id", v.vocab_id}};
            else if constexpr (std::is_same_v<T, tok::Temp>) return {{"kind", "temp"}, {"index", v.index}};
            else if constexpr (std::is_same_v<T, tok::Ref>) return {{"kind", "ref"}, {"slot", v.object_slot}};
            else if constexpr (std::is_same_v<T, tok::Seg>) return {{"kind", "seg"}, {"slot", v.object_slot}};
            else if constexpr (std::is_same_v<T, tok::VideoPatch>) return {{"kind", "vid"}, {"ordinal", v.ordinal}};
            else return {{"kind", "obj"}, {"slot", v.object_slot}, {"embedding", v.embedding_index}};
        },
        t);
}

inline Token token_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "text") return tok::Text{j.at("id").get<int>()};
    if (kind == "temp") return tok::Temp{j.at("index").get<int>()};
    if (kind == "ref") return tok::Ref{j.at("slot").get<int>()};
    if (kind == "seg") return tok::Seg{j.at("slot").get<int>()};
    if (kind == "vid") return tok::VideoPatch{j.at("ordinal").get<int>()};
    if (kind == "obj") return tok::Object{j.at("slot").get<int>(), j.at("embedding").get<int>()};
    throw ParseError("unknown token kind '" + kind + "'");
}

inline nlohmann::json to_json(const TokenSequence& seq) {
    nlohmann::json arr = nlohmann::json::array();
    for (const Token& t : seq.tokens) arr.push_back(to_json(t));
    return arr;
}

inline TokenSequence sequence_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) throw ParseError("token sequence must be a JSON array");
    TokenSequence seq;
    for (const auto& j : arr) seq.tokens.push_back(token_from_json(j));
    return seq;
}

} // namespace ufv
