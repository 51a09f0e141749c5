#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mammo_eval/error.hpp"

namespace mammo {

/// Single-channel raster with 8- or 16-bit samples stored row-major.
class RasterImage {
public:
    RasterImage() = default;
    RasterImage(int width, int height, int depth) : RasterImage(width, height, depth, {}) {}
    RasterImage(int width, int height, int depth, std::vector<std::uint16_t> samples)
        : width_(width), height_(height), depth_(depth), samples_(std::move(samples)) {
        if (width < 0 || height < 0) fail(ErrorCode::ValidationFailed, "negative image dimensions");
        if (depth != 8 && depth != 16) fail(ErrorCode::ValidationFailed, "depth must be 8 or 16");
        const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
        if (samples_.empty()) samples_.assign(n, 0);
        if (samples_.size() != n) fail(ErrorCode::ValidationFailed, "sample count does not match dimensions");
        if (depth == 8) {
            for (auto s : samples_)
                if (s > 255) fail(ErrorCode::RangeExceeded, "8-bit image sample exceeds 255");
        }
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int depth() const { return depth_; }
    std::size_t size() const { return samples_.size(); }
    const std::vector<std::uint16_t>& samples() const { return samples_; }
    std::vector<std::uint16_t>& samples() { return samples_; }

    std::uint16_t at(int x, int y) const { return samples_[index(x, y)]; }
    void set(int x, int y, std::uint16_t v) { samples_[index(x, y)] = v; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int depth_ = 8;
    std::vector<std::uint16_t> samples_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool value = false)
        : width_(width), height_(height),
          bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), value ? 1 : 0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return bits_.size(); }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    bool at_index(std::size_t i) const { return bits_[i] != 0; }
    void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
    void set_index(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }
    bool any() const { return std::find(bits_.begin(), bits_.end(), 1) != bits_.end(); }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height)
        : width_(width), height_(height),
          pixels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {}

    int width() const { return width_; }
    int height() const { return height_; }
    Rgb at(int x, int y) const { return pixels_[index(x, y)]; }
    Rgb& at(int x, int y) { return pixels_[index(x, y)]; }
    const std::vector<Rgb>& pixels() const { return pixels_; }
    std::vector<Rgb>& pixels() { return pixels_; }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    static RgbImage from_grey(const RasterImage& img) {
        RgbImage out(img.width(), img.height());
        const int shift = img.depth() == 16 ? 8 : 0;
        for (std::size_t i = 0; i < img.size(); ++i) {
            const auto v = static_cast<std::uint8_t>(img.samples()[i] >> shift);
            out.pixels_[i] = {v, v, v};
        }
        return out;
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

struct BoundingBox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
    bool empty() const { return x1 < x0 || y1 < y0; }
};

inline BoundingBox bounding_box(const BinaryMask& m) {
    BoundingBox box{m.width(), m.height(), -1, -1};
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.at(x, y)) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x);
                box.y1 = std::max(box.y1, y);
            }
    return box;
}

}  // namespace mammo
