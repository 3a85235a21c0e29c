#pragma once
//! \file
//! Binary segmentation masks and their run-length encoding.
//!
//! RLE layout: row-major scan, runs alternate background / foreground and
//! always start with a (possibly zero-length) background run. The runs must
//! sum to width * height.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ufv/error.hpp"

namespace ufv {

class BinaryMask {
public:
    BinaryMask() = default;

    BinaryMask(int width, int height) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) {
            throw ShapeError("mask dimensions must be positive, got " + std::to_string(width) + "x" +
                             std::to_string(height));
        }
        bits_.assign(static_cast<std::size_t>(width) * height, 0);
    }

    static BinaryMask from_rle(int width, int height, const std::vector<std::uint32_t>& runs) {
        BinaryMask m(width, height);
        std::size_t pos = 0;
        std::uint8_t value = 0;
        for (std::uint32_t run : runs) {
            if (pos + run > m.bits_.size()) {
                throw ParseError("RLE runs exceed " + std::to_string(m.bits_.size()) + " pixels");
            }
            std::fill_n(m.bits_.begin() + static_cast<std::ptrdiff_t>(pos), run, value);
            pos += run;
            value ^= 1;
        }
        if (pos != m.bits_.size()) {
            throw ParseError("RLE runs sum to " + std::to_string(pos) + ", expected " +
                             std::to_string(m.bits_.size()));
        }
        return m;
    }

    std::vector<std::uint32_t> to_rle() const {
        std::vector<std::uint32_t> runs;
        std::uint8_t current = 0;
        std::uint32_t count = 0;
        for (std::uint8_t b : bits_) {
            if (b != current) {
                runs.push_back(count);
                count = 0;
                current = b;
            }
            ++count;
        }
        runs.push_back(count);
        return runs;
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }
    bool empty_grid() const noexcept { return bits_.empty(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v = true) { bits_[index(x, y)] = v ? 1 : 0; }

    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set_flat(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

    std::size_t count() const noexcept {
        std::size_t n = 0;
        for (std::uint8_t b : bits_) n += b;
        return n;
    }

    bool same_shape(const BinaryMask& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int x, int y) const {
        if (x < 0 || y < 0 || x >= width_ || y >= height_) {
            throw ShapeError("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside " +
                             std::to_string(width_) + "x" + std::to_string(height_) + " mask");
        }
        return static_cast<std::size_t>(y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": mask shapes differ (" + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
    }
}

} // namespace ufv
