#pragma once
//! \file
//! Versioned binary parameter file and loss-curve CSV for the toy model.
//!
//! Layout (little-endian): "UFVT", u32 version, u32 P, u32 vocab_total, u32 G,
//! u32 text_vocab, u32 n_bins, then every tensor as f64 in the order embed, wq,
//! wk, wv, wo, w1, w2, out_head, seg_proj, feat_scale, feat_bias.

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ufv/error.hpp"
#include "ufv/toy_model.hpp"
#include "ufv/toy_task.hpp"

namespace ufv::toy {

inline constexpr std::array<char, 4> kParamsMagic{'U', 'F', 'V', 'T'};
inline constexpr std::uint32_t kParamsVersion = 1;

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f64(std::ostream& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw ParseError("params file truncated");
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
}

inline double get_f64(std::istream& in) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) throw ParseError("params file truncated");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return std::bit_cast<double>(v);
}

template <typename M>
void put_tensor(std::ostream& out, const M& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

template <typename M>
void get_tensor(std::istream& in, M& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
}

} // namespace detail

inline void write_params(std::ostream& out, const ModelParams& p) {
    out.write(kParamsMagic.data(), kParamsMagic.size());
    detail::put_u32(out, kParamsVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(p.hidden));
    detail::put_u32(out, static_cast<std::uint32_t>(p.layout.total()));
    detail::put_u32(out, static_cast<std::uint32_t>(p.grid));
    detail::put_u32(out, static_cast<std::uint32_t>(p.layout.text_vocab));
    detail::put_u32(out, static_cast<std::uint32_t>(p.layout.n_bins));
    p.for_each_trainable([&](const char*, const Mat& m) { detail::put_tensor(out, m); });
    detail::put_tensor(out, p.feat_scale);
    detail::put_tensor(out, p.feat_bias);
}

inline ModelParams read_params(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kParamsMagic) throw ParseError("not a toy-model params file");
    const std::uint32_t version = detail::get_u32(in);
    if (version != kParamsVersion) throw ParseError("unsupported params version " + std::to_string(version));
    const auto hidden = static_cast<int>(detail::get_u32(in));
    const auto total = static_cast<int>(detail::get_u32(in));
    const auto grid = static_cast<int>(detail::get_u32(in));
    const VocabLayout layout{static_cast<int>(detail::get_u32(in)), static_cast<int>(detail::get_u32(in))};
    if (hidden < 1 || grid < 1 || layout.text_vocab < 1 || layout.n_bins < 1 || layout.total() != total) {
        throw ParseError("params header is inconsistent (vocab_total " + std::to_string(total) + ")");
    }
    ModelParams p = ModelParams::zeros(hidden, grid, layout);
    p.for_each_trainable([&](const char*, Mat& m) { detail::get_tensor(in, m); });
    detail::get_tensor(in, p.feat_scale);
    detail::get_tensor(in, p.feat_bias);
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after params");
    return p;
}

inline void save_params(const std::string& path, const ModelParams& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_params(out, p);
    if (!out) throw IoError("write failed: " + path);
}

inline ModelParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_params(in);
}

//! Word table sidecar: one word per line in id order, starting at id 1.
inline void write_vocab(std::ostream& out, const WordVocab& v) {
    for (int i = 1; i < v.size(); ++i) out << v.word(i) << '\n';
}

inline WordVocab read_vocab(std::istream& in) {
    WordVocab v;
    std::string w;
    while (std::getline(in, w)) {
        if (w.empty()) continue;
        if (v.id(w) != 0 || w == WordVocab::kUnknown) throw ParseError("duplicate vocabulary word '" + w + "'");
        v.add(w);
    }
    return v;
}

inline void save_vocab(const std::string& path, const WordVocab& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_vocab(out, v);
    if (!out) throw IoError("write failed: " + path);
}

inline WordVocab load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return read_vocab(in);
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& curve) {
    out << "step,total,text,mask\n";
    out.precision(17);
    for (const auto& r : curve) out << r.step << ',' << r.total << ',' << r.text << ',' << r.mask << '\n';
}

} // namespace ufv::toy
