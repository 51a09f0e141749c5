#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "mammo_eval/inference.hpp"
#include "mammo_eval/preprocess.hpp"

namespace mammo {

/// Rule-based stand-in detector. It is not a model; it gives the pipeline
/// deterministic, image-dependent outputs so every downstream stage can run.
struct BaselineConfig {
    int tophat_half = 3;            ///< square opening window is (2h+1)^2
    double tophat_percentile = 0.99;
    double calc_lo = 30, calc_hi = 60;
    double benign_calc_lo = 12, benign_calc_hi = 24;
    int mass_half = 20;             ///< local-mean window half size
    double mass_lo = 25, mass_hi = 50;
    double benign_mass_lo = 10, benign_mass_hi = 20;
    double other_level = 0.02;
    int pool = 8;                   ///< canonical -> native map reduction
};

namespace detail {

inline double ramp(double x, double lo, double hi) { return std::clamp((x - lo) / (hi - lo), 0.0, 1.0); }

/// 1-D running min/max along rows or columns, restricted to in-mask pixels.
/// Out-of-mask pixels are ignored (min) or count as 0 (max).
inline std::vector<int> masked_filter(const std::vector<int>& src, const BinaryMask& mask, int half, bool take_min,
                                      bool horizontal) {
    const int w = mask.width(), h = mask.height();
    std::vector<int> out(src.size(), 0);
    const int neutral = take_min ? std::numeric_limits<int>::max() : 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = mask.index(x, y);
            if (!mask.at_index(i)) continue;
            int acc = neutral;
            for (int d = -half; d <= half; ++d) {
                const int xx = horizontal ? x + d : x, yy = horizontal ? y : y + d;
                if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
                const std::size_t j = mask.index(xx, yy);
                if (!mask.at_index(j)) continue;
                acc = take_min ? std::min(acc, src[j]) : std::max(acc, src[j]);
            }
            out[i] = acc == std::numeric_limits<int>::max() ? src[i] : acc;
        }
    }
    return out;
}

}  // namespace detail

/// White top-hat (image minus greyscale opening) with a square window,
/// evaluated only inside the mask so the breast edge is not a response.
inline std::vector<int> white_tophat(const RasterImage& img, const BinaryMask& mask, int half) {
    std::vector<int> src(img.samples().begin(), img.samples().end());
    auto eroded = detail::masked_filter(detail::masked_filter(src, mask, half, true, true), mask, half, true, false);
    auto opened =
        detail::masked_filter(detail::masked_filter(eroded, mask, half, false, true), mask, half, false, false);
    std::vector<int> out(src.size(), 0);
    for (std::size_t i = 0; i < src.size(); ++i)
        if (mask.at_index(i)) out[i] = std::max(0, src[i] - opened[i]);
    return out;
}

/// Mean of in-mask pixels in a (2h+1)^2 window, via integral images.
inline std::vector<double> masked_local_mean(const RasterImage& img, const BinaryMask& mask, int half) {
    const int w = img.width(), h = img.height();
    const std::size_t stride = static_cast<std::size_t>(w + 1);
    std::vector<double> sum(stride * (h + 1), 0.0), cnt(stride * (h + 1), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool in = mask.at(x, y);
            const std::size_t k = (y + 1) * stride + (x + 1);
            sum[k] = (in ? img.at(x, y) : 0) + sum[k - 1] + sum[k - stride] - sum[k - stride - 1];
            cnt[k] = (in ? 1 : 0) + cnt[k - 1] + cnt[k - stride] - cnt[k - stride - 1];
        }
    std::vector<double> out(img.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y)) continue;
            const int x0 = std::max(0, x - half), x1 = std::min(w, x + half + 1);
            const int y0 = std::max(0, y - half), y1 = std::min(h, y + half + 1);
            auto box = [&](const std::vector<double>& t) {
                return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0];
            };
            const double c = box(cnt);
            out[img.index(x, y)] = c > 0 ? box(sum) / c : 0.0;
        }
    return out;
}

/// Baseline prediction for one preprocessed view. Maps are emitted at native
/// scale (canonical / pool, max-pooled); node scores are map maxima, except
/// Normal which is 1 - max(other node scores).
inline PredictionBundle baseline_detect(const PreprocessedView& pv, const BaselineConfig& cfg = {},
                                        const std::string& case_id = {}) {
    const RasterImage& img = pv.image;
    const BinaryMask& mask = pv.mask;
    const std::size_t n = img.size();

    std::vector<float> susp_calc(n, 0.f), benign_calc(n, 0.f), susp_mass(n, 0.f), benign_mass(n, 0.f),
        other(n, 0.f);

    const std::size_t inside = mask.count();
    if (inside > 0) {
        const auto tophat = white_tophat(img, mask, cfg.tophat_half);
        std::vector<int> in_resp;
        std::vector<int> in_vals;
        in_resp.reserve(inside);
        in_vals.reserve(inside);
        for (std::size_t i = 0; i < n; ++i)
            if (mask.at_index(i)) {
                in_resp.push_back(tophat[i]);
                in_vals.push_back(img.samples()[i]);
            }
        const auto pct_rank = static_cast<std::size_t>(cfg.tophat_percentile * static_cast<double>(in_resp.size() - 1));
        std::nth_element(in_resp.begin(), in_resp.begin() + static_cast<std::ptrdiff_t>(pct_rank), in_resp.end());
        const int gate = in_resp[pct_rank];
        std::nth_element(in_vals.begin(), in_vals.begin() + static_cast<std::ptrdiff_t>(in_vals.size() / 2),
                         in_vals.end());
        const double median = in_vals[in_vals.size() / 2];
        const auto local = masked_local_mean(img, mask, cfg.mass_half);

        for (std::size_t i = 0; i < n; ++i) {
            if (!mask.at_index(i)) continue;
            const double r = tophat[i] > gate || gate == 0 ? tophat[i] : 0.0;
            const double sc = detail::ramp(r, cfg.calc_lo, cfg.calc_hi);
            susp_calc[i] = static_cast<float>(sc);
            benign_calc[i] = static_cast<float>(detail::ramp(r, cfg.benign_calc_lo, cfg.benign_calc_hi) * (1 - sc));
            const double excess = local[i] - median;
            const double sm = detail::ramp(excess, cfg.mass_lo, cfg.mass_hi);
            susp_mass[i] = static_cast<float>(sm);
            benign_mass[i] = static_cast<float>(detail::ramp(excess, cfg.benign_mass_lo, cfg.benign_mass_hi) * (1 - sm));
            other[i] = static_cast<float>(cfg.other_level);
        }
    }

    const int nw = img.width() / cfg.pool, nh = img.height() / cfg.pool;
    auto pool = [&](const std::vector<float>& full) {
        std::vector<float> out(static_cast<std::size_t>(nw) * nh, 0.f);
        for (int y = 0; y < img.height(); ++y)
            for (int x = 0; x < img.width(); ++x) {
                auto& cell = out[static_cast<std::size_t>(y / cfg.pool) * nw + x / cfg.pool];
                cell = std::max(cell, full[img.index(x, y)]);
            }
        return out;
    };
    std::vector<float> mask_cells(static_cast<std::size_t>(nw) * nh, 0.f);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (mask.at(x, y)) mask_cells[static_cast<std::size_t>(y / cfg.pool) * nw + x / cfg.pool] = 1.f;

    PredictionBundle b;
    b.case_id = case_id;
    std::map<ModelNode, std::vector<float>> native;
    native[ModelNode::SuspCalc] = pool(susp_calc);
    native[ModelNode::BenignCalc] = pool(benign_calc);
    native[ModelNode::SuspMass] = pool(susp_mass);
    native[ModelNode::BenignMass] = pool(benign_mass);
    const auto other_native = pool(other);
    for (auto node : {ModelNode::SuspAxAdeno, ModelNode::SuspArchDist, ModelNode::BenignAxAdeno,
                      ModelNode::BenignArchDist})
        native[node] = other_native;

    double max_other = 0;
    std::vector<float> normal(static_cast<std::size_t>(nw) * nh, 0.f);
    for (std::size_t i = 0; i < normal.size(); ++i) {
        float m = 0.f;
        for (const auto& [node, vals] : native) m = std::max(m, vals[i]);
        normal[i] = mask_cells[i] > 0 ? 1.f - m : 0.f;
    }
    for (const auto& [node, vals] : native) {
        const double s = vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
        b.node_scores[{pv.view, node}] = s;
        max_other = std::max(max_other, s);
    }
    b.node_scores[{pv.view, ModelNode::Normal}] = 1.0 - max_other;
    native[ModelNode::Normal] = std::move(normal);
    for (auto& [node, vals] : native) b.maps.emplace_back(node, pv.view, nw, nh, std::move(vals));
    return b;
}

}  // namespace mammo
