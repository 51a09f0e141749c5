#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mammo_eval/core.hpp"
#include "mammo_eval/image.hpp"

namespace mammo {

/// Bookkeeping for the crop / pad / resize steps of preprocessing. All
/// coordinates are continuous pixel-edge coordinates (pixel i spans [i, i+1)).
struct TransformRecord {
    Point crop_offset{0, 0};
    int pre_resize_width = 0;   ///< padded size fed to the resize step
    int pre_resize_height = 0;
    int pad_left = 0, pad_top = 0, pad_right = 0, pad_bottom = 0;
    double scale_x = 1.0, scale_y = 1.0;

    static TransformRecord identity(int width, int height) {
        TransformRecord r;
        r.pre_resize_width = width;
        r.pre_resize_height = height;
        r.scale_x = static_cast<double>(kCanonicalWidth) / width;
        r.scale_y = static_cast<double>(kCanonicalHeight) / height;
        return r;
    }

    Point forward(Point p) const {
        return {(p.x - crop_offset.x + pad_left) * scale_x, (p.y - crop_offset.y + pad_top) * scale_y};
    }
    Point inverse(Point q) const {
        return {q.x / scale_x - pad_left + crop_offset.x, q.y / scale_y - pad_top + crop_offset.y};
    }

    friend bool operator==(const TransformRecord&, const TransformRecord&) = default;
};

inline Point clamp_to_canonical(Point p) {
    return {std::clamp(p.x, 0.0, static_cast<double>(kCanonicalWidth)),
            std::clamp(p.y, 0.0, static_cast<double>(kCanonicalHeight))};
}

inline Region transform_region(const Region& region, const TransformRecord& rec) {
    if (region.frame != Frame::Original) fail(ErrorCode::FrameMismatch, "region is already in the canonical frame");
    Region out;
    out.frame = Frame::Canonical;
    out.polygon.reserve(region.polygon.size());
    for (const auto& p : region.polygon) out.polygon.push_back(clamp_to_canonical(rec.forward(p)));
    return out;
}

namespace detail {

inline double orient(Point a, Point b, Point c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); }

inline bool on_segment(Point a, Point b, Point p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
    const double d1 = orient(q1, q2, p1), d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1), d4 = orient(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}

}  // namespace detail

/// True when no two non-adjacent edges touch and adjacent edges meet only at
/// their shared vertex.
inline bool is_simple_polygon(const std::vector<Point>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i], b = poly[(i + 1) % n];
        if (a == b) return false;
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point c = poly[j], d = poly[(j + 1) % n];
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // Adjacent edges may only share the common vertex: reject folds back
                // along the same line.
                const Point shared = (j == i + 1) ? b : a;
                const Point other_ab = (j == i + 1) ? a : b;
                const Point other_cd = (j == i + 1) ? d : c;
                if (detail::orient(other_ab, shared, other_cd) == 0) {
                    const double dot = (other_ab.x - shared.x) * (other_cd.x - shared.x) +
                                       (other_ab.y - shared.y) * (other_cd.y - shared.y);
                    if (dot > 0) return false;
                }
                continue;
            }
            if (detail::segments_intersect(a, b, c, d)) return false;
        }
    }
    return true;
}

/// Throws BadPolygon unless the region has >= 3 points, is simple, and lies in
/// [0, width] x [0, height].
inline void validate_region(const Region& region, int width, int height) {
    if (region.polygon.size() < 3) fail(ErrorCode::BadPolygon, "polygon needs at least 3 points");
    for (const auto& p : region.polygon) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0 || p.y < 0 || p.x > width || p.y > height)
            fail(ErrorCode::BadPolygon, "polygon point outside frame bounds");
    }
    if (!is_simple_polygon(region.polygon)) fail(ErrorCode::BadPolygon, "polygon is self-intersecting");
}

inline double polygon_area(const std::vector<Point>& poly) {
    double twice = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point a = poly[i], b = poly[(i + 1) % poly.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) / 2;
}

/// Row-major indices of the pixels whose centre lies inside the polygon
/// (even-odd rule), sorted ascending.
inline std::vector<std::uint32_t> rasterize_indices(const std::vector<Point>& poly, int width, int height) {
    std::vector<std::uint32_t> out;
    if (poly.size() < 3) return out;
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        const double cy = y + 0.5;
        xs.clear();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Point a = poly[i], b = poly[(i + 1) % poly.size()];
            if ((a.y <= cy && b.y > cy) || (b.y <= cy && a.y > cy))
                xs.push_back(a.x + (cy - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            // centre x+0.5 in [xs[k], xs[k+1])
            const int from = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            const int to = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
            for (int x = from; x <= to; ++x)
                out.push_back(static_cast<std::uint32_t>(y) * static_cast<std::uint32_t>(width) +
                              static_cast<std::uint32_t>(x));
        }
    }
    return out;
}

inline BinaryMask rasterize(const std::vector<Point>& poly, int width, int height) {
    BinaryMask mask(width, height);
    for (auto i : rasterize_indices(poly, width, height)) mask.set_index(i, true);
    return mask;
}

}  // namespace mammo
