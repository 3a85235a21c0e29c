#pragma once
//! \file
//! Whitespace tokenizer for rendered prompts and answers. Special markers
//! (`<Temp-k>`, `[SEG]`, `<region>`) are split out of the surrounding text;
//! everything else becomes an opaque word id.

#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ufv/error.hpp"

namespace ufv {

struct TextPiece {
    enum class Kind { Word, Temp, Seg, Region };
    Kind kind = Kind::Word;
    std::string word;
    int temp_index = 0;

    bool operator==(const TextPiece&) const = default;
};

inline std::vector<TextPiece> split_rendered(const std::string& text) {
    static const std::regex special(R"(<Temp-(\d+)>|\[SEG\]|<region>)");
    std::vector<TextPiece> out;
    std::istringstream in(text);
    std::string chunk;
    while (in >> chunk) {
        auto begin = chunk.cbegin();
        for (std::sregex_iterator it(chunk.begin(), chunk.end(), special), end; it != end; ++it) {
            const auto& m = *it;
            if (m[0].first != begin) out.push_back({TextPiece::Kind::Word, std::string(begin, m[0].first), 0});
            const std::string tok = m.str(0);
            if (tok == "[SEG]") out.push_back({TextPiece::Kind::Seg, {}, 0});
            else if (tok == "<region>") out.push_back({TextPiece::Kind::Region, {}, 0});
            else out.push_back({TextPiece::Kind::Temp, {}, std::stoi(m.str(1))});
            begin = m[0].second;
        }
        if (begin != chunk.cend()) out.push_back({TextPiece::Kind::Word, std::string(begin, chunk.cend()), 0});
    }
    return out;
}

//! Word <-> id table. Id 0 is reserved for unknown words.
class WordVocab {
public:
    static constexpr const char* kUnknown = "<unk>";

    WordVocab() { words_.push_back(kUnknown); }

    //! Sorted unique words of `texts`; fails if they do not fit in `capacity`
    //! ids (including the unknown id).
    static WordVocab from_texts(const std::vector<std::string>& texts, int capacity) {
        std::set<std::string> uniq;
        for (const auto& t : texts) {
            for (const auto& p : split_rendered(t)) {
                if (p.kind == TextPiece::Kind::Word) uniq.insert(p.word);
            }
        }
        WordVocab v;
        for (const auto& w : uniq) v.add(w);
        if (v.size() > capacity) {
            throw DomainError("corpus needs " + std::to_string(v.size()) + " word ids but the text vocabulary holds " +
                              std::to_string(capacity));
        }
        return v;
    }

    int add(const std::string& w) {
        auto [it, inserted] = ids_.emplace(w, static_cast<int>(words_.size()));
        if (inserted) words_.push_back(w);
        return it->second;
    }

    int id(const std::string& w) const {
        auto it = ids_.find(w);
        return it == ids_.end() ? 0 : it->second;
    }

    const std::string& word(int id) const {
        return (id >= 0 && id < size()) ? words_[static_cast<std::size_t>(id)] : words_[0];
    }

    int size() const noexcept { return static_cast<int>(words_.size()); }

private:
    std::vector<std::string> words_;
    std::map<std::string, int> ids_;
};

} // namespace ufv
