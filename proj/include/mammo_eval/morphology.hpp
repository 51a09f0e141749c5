#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mammo_eval/image.hpp"

namespace mammo {

enum class Connectivity { Four = 4, Eight = 8 };

struct ComponentLabels {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;  ///< 0 = background, components numbered from 1
    std::vector<std::size_t> sizes;    ///< sizes[k] = pixel count of label k+1
    std::vector<std::size_t> first;    ///< first[k] = row-major index of the first pixel of label k+1
    std::size_t count() const { return sizes.size(); }
};

/// Labels are assigned in row-major order of each component's first pixel.
inline ComponentLabels label_components(const BinaryMask& mask, Connectivity conn) {
    ComponentLabels out;
    out.width = mask.width();
    out.height = mask.height();
    out.labels.assign(mask.size(), 0);
    std::vector<std::size_t> stack;
    const int w = mask.width(), h = mask.height();
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask.at_index(start) || out.labels[start] != 0) continue;
        const auto label = static_cast<std::int32_t>(out.sizes.size() + 1);
        std::size_t size = 0;
        out.labels[start] = label;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t i = stack.back();
            stack.pop_back();
            ++size;
            const int x = static_cast<int>(i % static_cast<std::size_t>(w));
            const int y = static_cast<int>(i / static_cast<std::size_t>(w));
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (conn == Connectivity::Four && dx != 0 && dy != 0) continue;
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t j = mask.index(nx, ny);
                    if (mask.at_index(j) && out.labels[j] == 0) {
                        out.labels[j] = label;
                        stack.push_back(j);
                    }
                }
            }
        }
        out.sizes.push_back(size);
        out.first.push_back(start);
    }
    return out;
}

inline std::size_t count_components(const BinaryMask& mask, Connectivity conn) {
    return label_components(mask, conn).count();
}

/// Keeps only the largest component; equal sizes resolve to the component
/// whose first pixel comes first in row-major order.
inline BinaryMask largest_component(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
    const auto cc = label_components(mask, conn);
    if (cc.count() == 0) fail(ErrorCode::NoForeground, "mask has no foreground pixels");
    std::size_t best = 0;
    for (std::size_t k = 1; k < cc.count(); ++k)
        if (cc.sizes[k] > cc.sizes[best]) best = k;
    const auto keep = static_cast<std::int32_t>(best + 1);
    BinaryMask out(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) out.set_index(i, cc.labels[i] == keep);
    return out;
}

/// Half-widths of the rows of a digital disc of the given radius.
inline std::vector<int> disc_half_widths(int radius) {
    std::vector<int> hw(static_cast<std::size_t>(2 * radius + 1));
    for (int dy = -radius; dy <= radius; ++dy)
        hw[static_cast<std::size_t>(dy + radius)] =
            static_cast<int>(std::floor(std::sqrt(static_cast<double>(radius * radius - dy * dy)) + 1e-9));
    return hw;
}

/// Binary dilation by a disc; pixels outside the raster count as background.
/// Row prefix sums make each disc row an O(1) range query.
inline BinaryMask dilate(const BinaryMask& mask, int radius) {
    if (radius <= 0) return mask;
    const int w = mask.width(), h = mask.height();
    std::vector<std::int32_t> prefix(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) {
        std::int32_t* row = prefix.data() + static_cast<std::size_t>(y) * (w + 1);
        row[0] = 0;
        for (int x = 0; x < w; ++x) row[x + 1] = row[x] + (mask.at(x, y) ? 1 : 0);
    }
    const auto hw = disc_half_widths(radius);
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            bool hit = false;
            for (int dy = -radius; dy <= radius && !hit; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                const int half = hw[static_cast<std::size_t>(dy + radius)];
                const int lo = std::max(0, x - half), hi = std::min(w - 1, x + half);
                const std::int32_t* row = prefix.data() + static_cast<std::size_t>(yy) * (w + 1);
                hit = row[hi + 1] - row[lo] > 0;
            }
            if (hit) out.set(x, y, true);
        }
    }
    return out;
}

inline BinaryMask complement(const BinaryMask& mask) {
    BinaryMask out(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) out.set_index(i, !mask.at_index(i));
    return out;
}

/// Binary erosion by a disc; pixels outside the raster count as foreground.
inline BinaryMask erode(const BinaryMask& mask, int radius) { return complement(dilate(complement(mask), radius)); }

/// Morphological closing (dilate then erode) with a disc of `radius`.
/// The raster is padded by `radius` first so the result equals closing on an
/// unbounded plane restricted to the image; this keeps it extensive.
inline BinaryMask close_mask(const BinaryMask& mask, int radius = 15) {
    if (radius <= 0 || !mask.any()) return mask;
    const int pw = mask.width() + 2 * radius, ph = mask.height() + 2 * radius;
    BinaryMask padded(pw, ph);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) padded.set(x + radius, y + radius, true);
    const BinaryMask closed = erode(dilate(padded, radius), radius);
    BinaryMask out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) out.set(x, y, closed.at(x + radius, y + radius));
    return out;
}

}  // namespace mammo
