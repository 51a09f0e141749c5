#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "mammo_eval/core.hpp"
#include "mammo_eval/image.hpp"
#include "mammo_eval/image_io.hpp"
#include "mammo_eval/manifest.hpp"
#include "mammo_eval/stats.hpp"

namespace mammo::synthetic {

enum class LesionKind { Mass, Calcification };

/// Lesion in original-image pixel coordinates. Amplitude is in 8-bit levels
/// above the surrounding tissue.
struct Lesion {
    LesionKind kind = LesionKind::Mass;
    double cx = 0, cy = 0;
    double radius = 12;
    double amplitude = 60;
};

struct ViewSpec {
    int width = 400;
    int height = 600;
    bool chest_wall_left = true;
    std::uint64_t seed = 0;
    bool tag = true;    ///< burned-in label in the corner opposite the breast
    bool holes = true;  ///< dark pinholes inside the breast
    bool specks = true; ///< isolated bright specks in the background
    double tissue = 84; ///< 8-bit tissue level
    std::vector<Lesion> lesions;
};

inline constexpr int kMax14 = 16383;

/// Breast half-ellipse centre (on the chest wall) and semi-axes.
struct Ellipse {
    double cx, cy, a, b;
};

inline Ellipse breast_ellipse(const ViewSpec& s) {
    return {s.chest_wall_left ? 0.0 : static_cast<double>(s.width), s.height / 2.0, 0.55 * s.width, 0.42 * s.height};
}

/// Point at fractional depth `fx` (0 chest wall .. 1 nipple) and height `fy`
/// (-1 .. 1 of the semi-axis) inside the breast.
inline Point breast_point(const ViewSpec& s, double fx, double fy) {
    const auto e = breast_ellipse(s);
    const double dx = fx * e.a;
    return {s.chest_wall_left ? e.cx + dx : e.cx - dx, e.cy + fy * e.b};
}

namespace detail {

inline double mass_profile(double r, double radius) {
    const double t = r / radius;
    if (t <= 0.8) return 1.0;
    if (t >= 1.15) return 0.0;
    const double u = (t - 0.8) / 0.35;
    return 0.5 * (1 + std::cos(std::numbers::pi * u));
}

/// Dot centres of a calcification cluster: jittered grid, spacing 3 px.
inline std::vector<Point> calc_dots(const Lesion& l, std::uint64_t seed) {
    auto rng = stats::SplitMix64::stream(seed, 0xCA1C);
    std::vector<Point> dots;
    const int half = std::max(1, static_cast<int>(l.radius / 3));
    for (int j = -half; j <= half; ++j)
        for (int i = -half; i <= half; ++i) {
            const double x = l.cx + 3 * i + (rng.uniform() - 0.5);
            const double y = l.cy + 3 * j + (rng.uniform() - 0.5);
            if (std::hypot(x - l.cx, y - l.cy) <= l.radius) dots.push_back({std::round(x), std::round(y)});
        }
    return dots;
}

}  // namespace detail

/// Annotation outline: a 16-gon. Masses are traced at 0.95 radius, clusters
/// just outside the outermost dots.
inline std::vector<Point> lesion_polygon(const Lesion& l, int width, int height) {
    const double r = l.kind == LesionKind::Mass ? 0.95 * l.radius : l.radius + 1.5;
    std::vector<Point> poly;
    for (int k = 0; k < 16; ++k) {
        const double t = 2 * std::numbers::pi * k / 16;
        poly.push_back({std::clamp(std::round((l.cx + r * std::cos(t)) * 4) / 4, 0.0, static_cast<double>(width)),
                        std::clamp(std::round((l.cy + r * std::sin(t)) * 4) / 4, 0.0, static_cast<double>(height))});
    }
    return poly;
}

inline RasterImage render_view(const ViewSpec& s) {
    const int w = s.width, h = s.height;
    auto rng = stats::SplitMix64::stream(s.seed, 1);
    std::vector<double> v8(static_cast<std::size_t>(w) * h, 0.0);
    const auto e = breast_ellipse(s);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double nx = (x + 0.5 - e.cx) / e.a, ny = (y + 0.5 - e.cy) / e.b;
            const double d = std::sqrt(nx * nx + ny * ny);
            double v = 0;
            if (d < 1.0) {
                v = s.tissue + 8 * (1 - d * d);
                if (d > 0.95) v = 25 + (v - 25) * (1 - d) / 0.05;
            }
            v8[static_cast<std::size_t>(y) * w + x] = v;
        }

    for (const auto& l : s.lesions) {
        if (l.kind == LesionKind::Mass) {
            const int r = static_cast<int>(std::ceil(l.radius * 1.2));
            for (int y = static_cast<int>(l.cy) - r; y <= static_cast<int>(l.cy) + r; ++y)
                for (int x = static_cast<int>(l.cx) - r; x <= static_cast<int>(l.cx) + r; ++x) {
                    if (x < 0 || y < 0 || x >= w || y >= h) continue;
                    auto& px = v8[static_cast<std::size_t>(y) * w + x];
                    if (px <= 0) continue;
                    px += l.amplitude * detail::mass_profile(std::hypot(x + 0.5 - l.cx, y + 0.5 - l.cy), l.radius);
                }
        } else {
            for (const auto& p : detail::calc_dots(l, s.seed)) {
                const int x = static_cast<int>(p.x), y = static_cast<int>(p.y);
                if (x < 0 || y < 0 || x >= w || y >= h) continue;
                auto& px = v8[static_cast<std::size_t>(y) * w + x];
                if (px > 0) px += l.amplitude;
            }
        }
    }

    if (s.holes) {
        for (int k = 0; k < 6; ++k) {
            const auto c = breast_point(s, 0.2 + 0.1 * k, -0.5 + 0.2 * k);
            for (int dy = 0; dy < 3; ++dy)
                for (int dx = 0; dx < 3; ++dx) {
                    const int x = static_cast<int>(c.x) + dx, y = static_cast<int>(c.y) + dy;
                    if (x >= 0 && y >= 0 && x < w && y < h) v8[static_cast<std::size_t>(y) * w + x] = 0;
                }
        }
    }

    std::vector<std::uint16_t> out(v8.size());
    for (std::size_t i = 0; i < v8.size(); ++i) {
        const double noise = (rng.uniform() - 0.5) * 4.0;
        const double v = std::max(0.0, v8[i] + noise);
        out[i] = static_cast<std::uint16_t>(std::clamp(std::lround(v * kMax14 / 255.0), 0L, static_cast<long>(kMax14)));
    }
    auto put = [&](int x, int y, int val) {
        if (x >= 0 && y >= 0 && x < w && y < h) out[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint16_t>(val);
    };

    if (s.tag) {
        // Five "glyphs" in the top corner away from the chest wall.
        const int x0 = s.chest_wall_left ? w - 70 : 10;
        for (int g = 0; g < 5; ++g)
            for (int y = 8; y < 20; ++y)
                for (int x = 0; x < 8; ++x)
                    if ((g + x + y) % 5 != 0) put(x0 + g * 12 + x, y, kMax14);
    }
    if (s.specks) {
        const int xs = s.chest_wall_left ? w - 12 : 8;
        for (int k = 0; k < 3; ++k)
            for (int d = 0; d < 4; ++d) put(xs + d % 2, h - 40 - 30 * k + d / 2, 40 * kMax14 / 255);
    }
    return RasterImage(w, h, 16, std::move(out));
}

// ---------------------------------------------------------------------------
// 20-case dataset
// ---------------------------------------------------------------------------

enum class Truth { Malignant, Benign, Normal };

struct CasePlan {
    Truth truth;
    bool left;                   ///< affected breast
    bool mass;
    bool calc;
    double mass_amp = 0;
    double calc_amp = 0;
    bool distractor = false;     ///< unreported bright region
};

inline std::vector<CasePlan> dataset_plan() {
    using T = Truth;
    return {
        {T::Malignant, true, true, false, 70, 0},   {T::Malignant, false, false, true, 0, 90},
        {T::Normal, true, false, false},            {T::Benign, true, true, false, 16, 0},
        {T::Malignant, false, true, false, 65, 0},  {T::Normal, false, false, false},
        {T::Malignant, true, false, true, 0, 85},   {T::Normal, true, false, false},
        {T::Benign, false, false, true, 0, 20},     {T::Malignant, true, true, true, 72, 90},
        {T::Normal, false, false, false},           {T::Malignant, false, true, false, 32, 0},
        {T::Normal, true, false, false},            {T::Benign, false, true, false, 18, 0},
        {T::Malignant, false, false, true, 0, 35},  {T::Normal, false, false, false},
        {T::Malignant, true, true, false, 75, 0},   {T::Normal, true, false, false},
        {T::Benign, true, false, true, 0, 18},      {T::Normal, false, false, false, 0, 0, true},
    };
}

inline std::string case_id_for(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%03zu", i + 1);
    return buf;
}

/// Writes `<dir>/images/*.png` and `<dir>/manifest.json` for the 20-case
/// synthetic study and returns the manifest path.
inline fs::path write_dataset(const fs::path& dir, std::uint64_t seed = 7, int width = 400, int height = 600) {
    fs::create_directories(dir / "images");
    const auto plan = dataset_plan();
    nlohmann::json doc;
    doc["dataset_id"] = "synthetic-20";
    doc["cases"] = nlohmann::json::array();
    const char* densities[] = {"A", "B", "C", "D"};

    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& p = plan[i];
        const auto id = case_id_for(i);
        nlohmann::json jc;
        jc["id"] = id;
        jc["density"] = densities[i % 4];
        jc["birads"] = p.truth == Truth::Malignant ? (p.mass_amp > 60 || p.calc_amp > 60 ? "5" : "4B")
                       : p.truth == Truth::Benign  ? "2"
                                                   : "1";
        jc["report_findings"] = nlohmann::json::array();
        jc["lesions"] = nlohmann::json::array();
        const bool suspicious = p.truth == Truth::Malignant;
        if (p.truth != Truth::Normal) {
            if (p.mass) jc["report_findings"].push_back({{"category", "Mass"}, {"suspicious", suspicious}});
            if (p.calc)
                jc["report_findings"].push_back({{"category", "Calcification"}, {"suspicious", suspicious}});
        }
        jc["views"] = nlohmann::json::object();

        for (auto view : kAllViews) {
            ViewSpec s;
            s.width = width;
            s.height = height;
            s.chest_wall_left = laterality(view) == Laterality::Left;
            s.seed = seed * 1000 + i * 10 + static_cast<std::uint64_t>(view);
            s.tissue = 80 + static_cast<double>(i % 4) * 3;
            const bool affected = (laterality(view) == Laterality::Left) == p.left;
            const bool cc = view == ViewLabel::LCC || view == ViewLabel::RCC;
            std::vector<std::pair<Lesion, std::string>> placed;
            if (affected && p.mass) {
                const auto c = breast_point(s, cc ? 0.45 : 0.40, cc ? 0.25 : -0.20);
                placed.push_back({{LesionKind::Mass, c.x, c.y, 12, p.mass_amp}, "Mass"});
            }
            if (affected && p.calc) {
                const auto c = breast_point(s, cc ? 0.55 : 0.50, cc ? -0.30 : 0.35);
                placed.push_back({{LesionKind::Calcification, c.x, c.y, 6, p.calc_amp}, "Calcification"});
            }
            if (affected && p.distractor) {
                const auto c = breast_point(s, 0.5, 0.0);
                s.lesions.push_back({LesionKind::Mass, c.x, c.y, 10, 40});
            }
            for (const auto& [l, cat] : placed) {
                s.lesions.push_back(l);
                if (p.truth == Truth::Normal) continue;
                nlohmann::json poly = nlohmann::json::array();
                for (const auto& pt : lesion_polygon(l, width, height)) poly.push_back({pt.x, pt.y});
                jc["lesions"].push_back({{"view", to_string(view)},
                                         {"category", cat},
                                         {"suspicious", suspicious},
                                         {"frame", "original"},
                                         {"polygon", poly}});
            }
            const auto rel = "images/" + id + "_" + std::string(to_string(view)) + ".png";
            write_png(dir / rel, render_view(s));
            jc["views"][std::string(to_string(view))] = rel;
        }
        doc["cases"].push_back(jc);
    }
    const auto path = dir / "manifest.json";
    write_file_atomic(path, doc.dump(2) + "\n");
    return path;
}

/// Varied single views for preprocessing checks: random size and side, tag,
/// holes and specks always present.
inline ViewSpec corpus_view(std::uint64_t seed, std::size_t index) {
    auto rng = stats::SplitMix64::stream(seed, index);
    ViewSpec s;
    s.width = 260 + static_cast<int>(rng.below(300));
    s.height = 380 + static_cast<int>(rng.below(420));
    s.chest_wall_left = rng.below(2) == 0;
    s.seed = rng.next();
    s.tissue = 60 + static_cast<double>(rng.below(60));
    if (rng.below(2) == 0) {
        const auto c = breast_point(s, 0.3 + 0.3 * rng.uniform(), -0.4 + 0.8 * rng.uniform());
        s.lesions.push_back({LesionKind::Mass, c.x, c.y, 8 + 6 * rng.uniform(), 20 + 30 * rng.uniform()});
    }
    return s;
}

}  // namespace mammo::synthetic
