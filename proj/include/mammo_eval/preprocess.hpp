#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "json.hpp"

#include "mammo_eval/core.hpp"
#include "mammo_eval/geometry.hpp"
#include "mammo_eval/image.hpp"
#include "mammo_eval/image_io.hpp"
#include "mammo_eval/morphology.hpp"

namespace mammo {

struct PreprocessConfig {
    int cutoff = 10;
    Connectivity connectivity = Connectivity::Eight;
    int closing_radius = 15;
    int max_input = 16383;
    friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

struct PreprocessedView {
    RasterImage image;  ///< 8-bit, canonical size
    BinaryMask mask;    ///< canonical frame, single component
    TransformRecord transform;
    ViewLabel view = ViewLabel::LCC;
};

/// Linear 14-bit (in 16-bit container) to 8-bit map: floor(v * 255 / max_input).
inline RasterImage to_8bit(const RasterImage& img, int max_input = 16383) {
    if (img.depth() != 16) fail(ErrorCode::ValidationFailed, "to_8bit expects a 16-bit image");
    if (max_input <= 0) fail(ErrorCode::ValidationFailed, "max_input must be positive");
    std::vector<std::uint16_t> out(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) {
        const std::uint32_t v = img.samples()[i];
        if (v > static_cast<std::uint32_t>(max_input))
            fail(ErrorCode::RangeExceeded, "sample " + std::to_string(v) + " exceeds max_input " +
                                               std::to_string(max_input));
        out[i] = static_cast<std::uint16_t>(v * 255u / static_cast<std::uint32_t>(max_input));
    }
    return RasterImage(img.width(), img.height(), 8, std::move(out));
}

/// Foreground is every pixel >= cutoff; darker pixels are background.
inline BinaryMask threshold_background(const RasterImage& img, int cutoff = 10) {
    BinaryMask m(img.width(), img.height());
    for (std::size_t i = 0; i < img.size(); ++i) m.set_index(i, img.samples()[i] >= cutoff);
    return m;
}

/// Bilinear resampling with pixel-centre alignment and edge clamping.
inline RasterImage resize_bilinear(const RasterImage& img, int out_w, int out_h) {
    RasterImage out(out_w, out_h, img.depth());
    const double sx = static_cast<double>(img.width()) / out_w;
    const double sy = static_cast<double>(img.height()) / out_h;
    const int max_v = img.depth() == 16 ? 65535 : 255;
    for (int v = 0; v < out_h; ++v) {
        const double fy = std::clamp((v + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height() - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, img.height() - 1);
        const double ty = fy - y0;
        for (int u = 0; u < out_w; ++u) {
            const double fx = std::clamp((u + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width() - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, img.width() - 1);
            const double tx = fx - x0;
            const double top = img.at(x0, y0) * (1 - tx) + img.at(x1, y0) * tx;
            const double bot = img.at(x0, y1) * (1 - tx) + img.at(x1, y1) * tx;
            const double val = top * (1 - ty) + bot * ty;
            out.set(u, v, static_cast<std::uint16_t>(std::clamp(static_cast<int>(std::lround(val)), 0, max_v)));
        }
    }
    return out;
}

inline BinaryMask resize_nearest(const BinaryMask& m, int out_w, int out_h) {
    BinaryMask out(out_w, out_h);
    const double sx = static_cast<double>(m.width()) / out_w;
    const double sy = static_cast<double>(m.height()) / out_h;
    for (int v = 0; v < out_h; ++v) {
        const int y = std::min(m.height() - 1, static_cast<int>(std::floor((v + 0.5) * sy)));
        for (int u = 0; u < out_w; ++u) {
            const int x = std::min(m.width() - 1, static_cast<int>(std::floor((u + 0.5) * sx)));
            out.set(u, v, m.at(x, y));
        }
    }
    return out;
}

/// Full breast-isolation pipeline: 8-bit conversion, background threshold,
/// largest component (drops burned-in view tags), closing, masking, crop to
/// the breast, symmetric zero padding to 2:3, resize to 1024x1536.
inline PreprocessedView preprocess_view(const RasterImage& input, ViewLabel view, const PreprocessConfig& cfg = {}) {
    const RasterImage img8 = input.depth() == 16 ? to_8bit(input, cfg.max_input) : input;
    const BinaryMask fg = threshold_background(img8, cfg.cutoff);
    const BinaryMask breast = largest_component(fg, cfg.connectivity);
    const BinaryMask closed = largest_component(close_mask(breast, cfg.closing_radius), cfg.connectivity);

    const BoundingBox box = bounding_box(closed);
    const int cw = box.width(), ch = box.height();
    int tw = cw, th = ch;
    // 2:3 width:height; pad whichever side is short.
    if (static_cast<long long>(cw) * 3 > static_cast<long long>(ch) * 2)
        th = static_cast<int>((static_cast<long long>(cw) * 3 + 1) / 2);
    else
        tw = static_cast<int>((static_cast<long long>(ch) * 2 + 2) / 3);

    TransformRecord rec;
    rec.crop_offset = {static_cast<double>(box.x0), static_cast<double>(box.y0)};
    rec.pre_resize_width = tw;
    rec.pre_resize_height = th;
    rec.pad_left = (tw - cw) / 2;
    rec.pad_right = tw - cw - rec.pad_left;
    rec.pad_top = (th - ch) / 2;
    rec.pad_bottom = th - ch - rec.pad_top;
    rec.scale_x = static_cast<double>(kCanonicalWidth) / tw;
    rec.scale_y = static_cast<double>(kCanonicalHeight) / th;

    RasterImage padded(tw, th, 8);
    BinaryMask padded_mask(tw, th);
    for (int y = 0; y < ch; ++y) {
        for (int x = 0; x < cw; ++x) {
            if (!closed.at(box.x0 + x, box.y0 + y)) continue;
            padded.set(x + rec.pad_left, y + rec.pad_top, img8.at(box.x0 + x, box.y0 + y));
            padded_mask.set(x + rec.pad_left, y + rec.pad_top, true);
        }
    }

    PreprocessedView out;
    out.view = view;
    out.transform = rec;
    out.image = resize_bilinear(padded, kCanonicalWidth, kCanonicalHeight);
    out.mask = largest_component(resize_nearest(padded_mask, kCanonicalWidth, kCanonicalHeight), cfg.connectivity);
    for (std::size_t i = 0; i < out.image.size(); ++i)
        if (!out.mask.at_index(i)) out.image.samples()[i] = 0;
    return out;
}

inline nlohmann::json transform_to_json(const TransformRecord& r) {
    return {{"crop_offset", {r.crop_offset.x, r.crop_offset.y}},
            {"pre_resize_size", {r.pre_resize_width, r.pre_resize_height}},
            {"pad", {r.pad_left, r.pad_top, r.pad_right, r.pad_bottom}},
            {"scale", {r.scale_x, r.scale_y}}};
}

inline TransformRecord transform_from_json(const nlohmann::json& j) {
    TransformRecord r;
    r.crop_offset = {j.at("crop_offset")[0].get<double>(), j.at("crop_offset")[1].get<double>()};
    r.pre_resize_width = j.at("pre_resize_size")[0].get<int>();
    r.pre_resize_height = j.at("pre_resize_size")[1].get<int>();
    r.pad_left = j.at("pad")[0].get<int>();
    r.pad_top = j.at("pad")[1].get<int>();
    r.pad_right = j.at("pad")[2].get<int>();
    r.pad_bottom = j.at("pad")[3].get<int>();
    r.scale_x = j.at("scale")[0].get<double>();
    r.scale_y = j.at("scale")[1].get<double>();
    return r;
}

/// Writes `<dir>/<VIEW>.png`, `<VIEW>_mask.png` and `<VIEW>_transform.json`.
inline void write_preprocessed(const fs::path& dir, const PreprocessedView& pv) {
    const std::string v(to_string(pv.view));
    write_png(dir / (v + ".png"), pv.image);
    write_png(dir / (v + "_mask.png"), mask_to_image(pv.mask));
    nlohmann::json side = transform_to_json(pv.transform);
    side["view"] = v;
    write_file_atomic(dir / (v + "_transform.json"), side.dump(2) + "\n");
}

inline PreprocessedView read_preprocessed(const fs::path& dir, ViewLabel view) {
    const std::string v(to_string(view));
    PreprocessedView pv;
    pv.view = view;
    pv.image = read_image(dir / (v + ".png"));
    pv.mask = image_to_mask(read_image(dir / (v + "_mask.png")));
    pv.transform = transform_from_json(nlohmann::json::parse(read_text_file(dir / (v + "_transform.json"))));
    return pv;
}

}  // namespace mammo
