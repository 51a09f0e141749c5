#pragma once

#include <algorithm>
#include <cmath>
#include <string_view>
#include <vector>

#include "mammo_eval/inference.hpp"
#include "mammo_eval/preprocess.hpp"

namespace mammo {

enum class OverlayStyle { Greyscale, Color };
enum class BlobKind { All, Suspicious, Benign };

inline OverlayStyle overlay_style_from_string(std::string_view s) {
    if (s == "greyscale" || s == "grayscale" || s == "grey" || s == "monochrome") return OverlayStyle::Greyscale;
    if (s == "color" || s == "colour") return OverlayStyle::Color;
    fail(ErrorCode::ValidationFailed, "unknown overlay style '" + std::string(s) + "'");
}

inline BlobKind blob_kind_from_string(std::string_view s) {
    if (s == "all") return BlobKind::All;
    if (s == "suspicious") return BlobKind::Suspicious;
    if (s == "benign") return BlobKind::Benign;
    fail(ErrorCode::ValidationFailed, "unknown blob kind '" + std::string(s) + "'");
}

inline constexpr Rgb kOutlineColour{255, 255, 255};
inline constexpr Rgb kBenignColour{0, 80, 255};
inline constexpr double kFillAlpha = 0.45;

/// Warm ramp from yellow (score 0.5 or below) to red (score 1).
inline Rgb warm_colour(double score) {
    const double t = std::clamp((score - 0.5) / 0.5, 0.0, 1.0);
    return {255, static_cast<std::uint8_t>(std::lround(220 * (1 - t))), 0};
}

inline Rgb blend(Rgb base, Rgb over, double alpha) {
    auto mix = [alpha](std::uint8_t a, std::uint8_t b) {
        return static_cast<std::uint8_t>(std::lround(a * (1 - alpha) + b * alpha));
    };
    return {mix(base.r, over.r), mix(base.g, over.g), mix(base.b, over.b)};
}

/// Blob pixels with at least one 4-neighbour outside the blob or the raster.
inline std::vector<std::uint32_t> blob_boundary(const HeatmapBlob& blob, int width, int height) {
    std::vector<std::uint32_t> edge;
    auto member = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= width || y >= height) return false;
        return std::binary_search(blob.pixels.begin(), blob.pixels.end(),
                                  static_cast<std::uint32_t>(y * width + x));
    };
    for (auto idx : blob.pixels) {
        const int x = static_cast<int>(idx % static_cast<std::uint32_t>(width));
        const int y = static_cast<int>(idx / static_cast<std::uint32_t>(width));
        if (!member(x - 1, y) || !member(x + 1, y) || !member(x, y - 1) || !member(x, y + 1)) edge.push_back(idx);
    }
    return edge;
}

/// Greyscale: suspicious blobs get solid white outlines, benign blobs dotted
/// ones. Color: suspicious blobs are filled with a translucent warm ramp,
/// benign blobs with translucent blue. Benign is drawn first so suspicious
/// blobs end up on top. Pixels not covered by a blob are left untouched.
inline RgbImage render_overlay(const PreprocessedView& pv, const std::vector<HeatmapBlob>& blobs, OverlayStyle style,
                               BlobKind kind = BlobKind::All) {
    RgbImage out = RgbImage::from_grey(pv.image);
    const int w = out.width(), h = out.height();
    const auto total = static_cast<std::uint32_t>(w) * static_cast<std::uint32_t>(h);
    for (int pass = 0; pass < 2; ++pass) {
        const bool suspicious_pass = pass == 1;
        if (kind == BlobKind::Suspicious && !suspicious_pass) continue;
        if (kind == BlobKind::Benign && suspicious_pass) continue;
        for (const auto& blob : blobs) {
            if (blob.view != pv.view || blob.suspicious != suspicious_pass) continue;
            if (style == OverlayStyle::Greyscale) {
                for (auto idx : blob_boundary(blob, w, h)) {
                    if (idx >= total) continue;
                    const int x = static_cast<int>(idx % static_cast<std::uint32_t>(w));
                    const int y = static_cast<int>(idx / static_cast<std::uint32_t>(w));
                    if (!blob.suspicious && (x + y) % 4 >= 2) continue;  // dotted
                    out.pixels()[idx] = kOutlineColour;
                }
            } else {
                const Rgb colour = blob.suspicious ? warm_colour(blob.peak_score) : kBenignColour;
                for (auto idx : blob.pixels)
                    if (idx < total) out.pixels()[idx] = blend(out.pixels()[idx], colour, kFillAlpha);
            }
        }
    }
    return out;
}

}  // namespace mammo
