#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mammo_eval/core.hpp"
#include "mammo_eval/geometry.hpp"
#include "mammo_eval/inference.hpp"
#include "mammo_eval/metrics.hpp"

namespace mammo {

struct MatchConfig {
    double hit_threshold = 0.5;  ///< lesion hit iff IoGT >= this
    double fp_threshold = 0.25;  ///< blob is a false positive iff IoHM < this
    int images_per_case = 4;
};

struct LesionOutcome {
    ViewLabel view = ViewLabel::LCC;
    FinalCategory category = FinalCategory::Mass;
    std::size_t pixel_count = 0;
    bool hit = false;
    double iogt = 0;
    friend bool operator==(const LesionOutcome&, const LesionOutcome&) = default;
};

struct BlobOutcome {
    ViewLabel view = ViewLabel::LCC;
    FinalCategory category = FinalCategory::Mass;
    std::size_t pixel_count = 0;
    bool is_fp = false;
    double iohm = 0;
    friend bool operator==(const BlobOutcome&, const BlobOutcome&) = default;
};

struct LocalizationCaseResult {
    std::string case_id;
    std::vector<LesionOutcome> lesions;
    std::vector<BlobOutcome> blobs;
    int image_count = 4;

    std::size_t hits() const {
        return static_cast<std::size_t>(std::count_if(lesions.begin(), lesions.end(), [](auto& l) { return l.hit; }));
    }
    std::size_t false_positives() const {
        return static_cast<std::size_t>(std::count_if(blobs.begin(), blobs.end(), [](auto& b) { return b.is_fp; }));
    }
    friend bool operator==(const LocalizationCaseResult&, const LocalizationCaseResult&) = default;
};

/// Rasterized canonical-frame pixels of a lesion; EmptyGeometry if none.
inline std::vector<std::uint32_t> lesion_pixels(const GroundTruthLesion& lesion) {
    if (lesion.region.frame != Frame::Canonical)
        fail(ErrorCode::FrameMismatch, lesion.case_id + ": lesion must be transformed to the canonical frame first");
    auto px = rasterize_indices(lesion.region.polygon, kCanonicalWidth, kCanonicalHeight);
    if (px.empty()) fail(ErrorCode::EmptyGeometry, lesion.case_id + ": lesion polygon covers no pixels");
    return px;
}

/// Per-view pixel matching. IoGT = |lesion ∩ union of the view's blobs| / |lesion|;
/// IoHM = |blob ∩ union of the view's lesions| / |blob|.
inline LocalizationCaseResult match_lesions(const std::string& case_id, const std::vector<GroundTruthLesion>& gt,
                                            const std::vector<HeatmapBlob>& blobs, const MatchConfig& cfg = {}) {
    LocalizationCaseResult res;
    res.case_id = case_id;
    res.image_count = cfg.images_per_case;

    std::vector<std::vector<std::uint32_t>> lesion_px;
    lesion_px.reserve(gt.size());
    for (const auto& l : gt) lesion_px.push_back(lesion_pixels(l));

    for (auto view : kAllViews) {
        bool any_lesion = false, any_blob = false;
        for (const auto& l : gt) any_lesion |= l.view == view;
        for (const auto& b : blobs) any_blob |= b.view == view;
        if (!any_lesion && !any_blob) continue;

        BinaryMask blob_union(kCanonicalWidth, kCanonicalHeight);
        BinaryMask gt_union(kCanonicalWidth, kCanonicalHeight);
        for (const auto& b : blobs)
            if (b.view == view)
                for (auto i : b.pixels) blob_union.set_index(i, true);
        for (std::size_t k = 0; k < gt.size(); ++k)
            if (gt[k].view == view)
                for (auto i : lesion_px[k]) gt_union.set_index(i, true);

        for (std::size_t k = 0; k < gt.size(); ++k) {
            if (gt[k].view != view) continue;
            std::size_t inter = 0;
            for (auto i : lesion_px[k]) inter += blob_union.at_index(i) ? 1 : 0;
            LesionOutcome o;
            o.view = view;
            o.category = gt[k].category;
            o.pixel_count = lesion_px[k].size();
            o.iogt = static_cast<double>(inter) / static_cast<double>(lesion_px[k].size());
            o.hit = o.iogt >= cfg.hit_threshold;
            res.lesions.push_back(o);
        }
        for (const auto& b : blobs) {
            if (b.view != view || b.pixels.empty()) continue;
            std::size_t inter = 0;
            for (auto i : b.pixels) inter += gt_union.at_index(i) ? 1 : 0;
            BlobOutcome o;
            o.view = view;
            o.category = b.category;
            o.pixel_count = b.pixels.size();
            o.iohm = static_cast<double>(inter) / static_cast<double>(b.pixels.size());
            o.is_fp = o.iohm < cfg.fp_threshold;
            res.blobs.push_back(o);
        }
    }
    return res;
}

/// Suspicious lesions and suspicious blobs, optionally restricted to one category.
inline LocalizationCaseResult match_suspicious(const std::string& case_id, const std::vector<GroundTruthLesion>& gt,
                                               const std::vector<HeatmapBlob>& blobs,
                                               std::optional<FinalCategory> category, const MatchConfig& cfg = {}) {
    std::vector<GroundTruthLesion> g;
    std::vector<HeatmapBlob> b;
    for (const auto& l : gt)
        if (l.suspicious && (!category || l.category == *category)) g.push_back(l);
    for (const auto& x : blobs)
        if (x.suspicious && (!category || x.category == *category)) b.push_back(x);
    return match_lesions(case_id, g, b, cfg);
}

struct LocalizationSummary {
    std::int64_t lesions = 0;
    std::int64_t hits = 0;
    std::int64_t false_positives = 0;
    std::int64_t images = 0;
    std::int64_t cases = 0;
    std::optional<BinomialCI> llf;
    Interval nlf;           ///< false positives per image, bootstrap interval
    double nlf_per_case = 0;
    friend bool operator==(const LocalizationSummary&, const LocalizationSummary&) = default;
};

/// LLF = hits / lesions with an exact interval; NLF = false-positive blobs per
/// image with a percentile bootstrap over cases.
inline LocalizationSummary llf_nlf(const std::vector<LocalizationCaseResult>& results, int reps = 2000,
                                   std::uint64_t seed = 0, double level = 0.95) {
    if (results.empty()) fail(ErrorCode::ValidationFailed, "llf_nlf needs at least one case");
    LocalizationSummary s;
    s.cases = static_cast<std::int64_t>(results.size());
    std::vector<double> fps, imgs;
    for (const auto& r : results) {
        s.lesions += static_cast<std::int64_t>(r.lesions.size());
        s.hits += static_cast<std::int64_t>(r.hits());
        s.false_positives += static_cast<std::int64_t>(r.false_positives());
        s.images += r.image_count;
        fps.push_back(static_cast<double>(r.false_positives()));
        imgs.push_back(r.image_count);
    }
    if (s.lesions > 0) s.llf = clopper_pearson(s.hits, s.lesions, level);
    s.nlf.level = level;
    s.nlf.estimate = s.images > 0 ? static_cast<double>(s.false_positives) / static_cast<double>(s.images) : 0.0;
    s.nlf_per_case = static_cast<double>(s.false_positives) / static_cast<double>(s.cases);

    std::vector<double> reps_out;
    reps_out.reserve(static_cast<std::size_t>(std::max(reps, 0)));
    const std::size_t n = results.size();
    for (int r = 0; r < reps; ++r) {
        auto rng = stats::SplitMix64::stream(seed, static_cast<std::uint64_t>(r));
        double fp = 0, im = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = rng.below(n);
            fp += fps[k];
            im += imgs[k];
        }
        reps_out.push_back(im > 0 ? fp / im : 0.0);
    }
    if (reps_out.empty()) {
        s.nlf.lower = s.nlf.upper = s.nlf.estimate;
    } else {
        s.nlf.lower = stats::quantile(reps_out, (1 - level) / 2);
        s.nlf.upper = stats::quantile(reps_out, 1 - (1 - level) / 2);
    }
    return s;
}

struct OverlapSummary {
    std::optional<double> mean_iogt;  ///< over hit lesions
    std::optional<double> mean_iohm;  ///< over non-false-positive blobs
    friend bool operator==(const OverlapSummary&, const OverlapSummary&) = default;
};

inline OverlapSummary mean_overlap(const std::vector<LocalizationCaseResult>& results) {
    double sg = 0, sh = 0;
    std::size_t ng = 0, nh = 0;
    for (const auto& r : results) {
        for (const auto& l : r.lesions)
            if (l.hit) {
                sg += l.iogt;
                ++ng;
            }
        for (const auto& b : r.blobs)
            if (!b.is_fp) {
                sh += b.iohm;
                ++nh;
            }
    }
    OverlapSummary o;
    if (ng > 0) o.mean_iogt = sg / static_cast<double>(ng);
    if (nh > 0) o.mean_iohm = sh / static_cast<double>(nh);
    return o;
}

}  // namespace mammo
