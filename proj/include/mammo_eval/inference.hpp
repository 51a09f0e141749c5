#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mammo_eval/core.hpp"
#include "mammo_eval/fs_util.hpp"
#include "mammo_eval/image_io.hpp"
#include "mammo_eval/morphology.hpp"

namespace mammo {

inline constexpr int kNativeMapWidth = 128;
inline constexpr int kNativeMapHeight = 192;
inline constexpr double kBenignDisplayCap = 0.15;

class ProbabilityMap {
public:
    ProbabilityMap() = default;
    ProbabilityMap(ModelNode node, ViewLabel view, int width, int height, std::vector<float> values)
        : node_(node), view_(view), width_(width), height_(height), values_(std::move(values)) {
        if (width <= 0 || height <= 0 || static_cast<long long>(width) * 3 != static_cast<long long>(height) * 2)
            fail(ErrorCode::ValidationFailed, "probability map must have 2:3 width:height, got " +
                                                  std::to_string(width) + "x" + std::to_string(height));
        if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
            fail(ErrorCode::ValidationFailed, "probability map size mismatch");
        for (float v : values_)
            if (!(v >= 0.0f && v <= 1.0f))
                fail(ErrorCode::ValueOutOfRange, "probability map value " + std::to_string(v) + " outside [0,1]");
    }

    ModelNode node() const { return node_; }
    ViewLabel view() const { return view_; }
    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<float>& values() const { return values_; }
    float at(int x, int y) const {
        return values_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)];
    }
    bool is_canonical() const { return width_ == kCanonicalWidth && height_ == kCanonicalHeight; }
    float max_value() const { return values_.empty() ? 0.0f : *std::max_element(values_.begin(), values_.end()); }

    friend bool operator==(const ProbabilityMap&, const ProbabilityMap&) = default;

private:
    ModelNode node_ = ModelNode::Normal;
    ViewLabel view_ = ViewLabel::LCC;
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

struct PredictionBundle {
    std::string case_id;
    std::map<std::pair<ViewLabel, ModelNode>, double> node_scores;
    std::vector<ProbabilityMap> maps;

    std::optional<double> score(ViewLabel v, ModelNode n) const {
        auto it = node_scores.find({v, n});
        if (it == node_scores.end()) return std::nullopt;
        return it->second;
    }
    bool has_view(ViewLabel v) const { return node_scores.contains({v, ModelNode::Normal}); }

    /// Appends another partial bundle (e.g. one view from the baseline).
    void merge(const PredictionBundle& other) {
        for (const auto& [k, s] : other.node_scores) node_scores[k] = s;
        maps.insert(maps.end(), other.maps.begin(), other.maps.end());
    }
};

struct HeatmapBlob {
    ViewLabel view = ViewLabel::LCC;
    FinalCategory category = FinalCategory::Mass;
    bool suspicious = true;
    ModelNode source = ModelNode::SuspMass;
    std::vector<std::uint32_t> pixels;  ///< sorted row-major canonical indices
    double peak_score = 0;
    friend bool operator==(const HeatmapBlob&, const HeatmapBlob&) = default;
};

struct CaseAssessment {
    std::string case_id;
    std::map<std::pair<Laterality, FinalCategory>, double> breast_scores;
    std::map<std::pair<Laterality, FinalCategory>, double> benign_display_scores;
    std::vector<HeatmapBlob> blobs;
    double cancer_score = 0;

    double breast_score(Laterality l, FinalCategory c) const {
        auto it = breast_scores.find({l, c});
        return it == breast_scores.end() ? 0.0 : it->second;
    }
    /// Case-level category score: max over both breasts.
    double category_score(FinalCategory c) const {
        return std::max(breast_score(Laterality::Left, c), breast_score(Laterality::Right, c));
    }
    friend bool operator==(const CaseAssessment&, const CaseAssessment&) = default;
};

struct BinarizeConfig {
    double threshold = 0.5;
    std::map<FinalCategory, double> per_category;  ///< overrides `threshold`

    double for_category(FinalCategory c) const {
        auto it = per_category.find(c);
        return it == per_category.end() ? threshold : it->second;
    }
};

// ---------------------------------------------------------------------------
// Bundle I/O
// ---------------------------------------------------------------------------

inline void validate_bundle(const PredictionBundle& b) {
    std::set<ViewLabel> views;
    for (const auto& [key, s] : b.node_scores) {
        views.insert(key.first);
        if (!(s >= 0.0 && s <= 1.0))
            fail(ErrorCode::ValueOutOfRange, b.case_id + ": score " + std::to_string(s) + " outside [0,1]");
    }
    for (auto v : views)
        for (auto n : kAllNodes)
            if (!b.node_scores.contains({v, n}))
                fail(ErrorCode::MissingNode, b.case_id + ": view " + std::string(to_string(v)) + " lacks node " +
                                                 std::string(to_string(n)));
    std::set<std::pair<ViewLabel, ModelNode>> keys;
    for (const auto& m : b.maps)
        if (!keys.insert({m.view(), m.node()}).second)
            fail(ErrorCode::ValidationFailed, b.case_id + ": duplicate map for " + std::string(to_string(m.view())) +
                                                  "/" + std::string(to_string(m.node())));
}

/// Reads `<dir>/scores.json` and `<dir>/maps/<VIEW>_<NODE>.png` (pixel/255).
inline PredictionBundle load_bundle(const fs::path& dir, std::string case_id = {}) {
    PredictionBundle b;
    b.case_id = case_id.empty() ? dir.filename().string() : std::move(case_id);
    nlohmann::json scores;
    try {
        scores = nlohmann::json::parse(read_text_file(dir / "scores.json"));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, (dir / "scores.json").string() + ": " + e.what());
    }
    for (auto it = scores.begin(); it != scores.end(); ++it) {
        const ViewLabel v = view_from_string(it.key());
        for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
            const auto node = parse_node(jt.key());
            if (!node) fail(ErrorCode::ParseError, b.case_id + ": unknown node '" + jt.key() + "'");
            b.node_scores[{v, *node}] = jt.value().get<double>();
        }
    }
    const fs::path maps_dir = dir / "maps";
    if (fs::is_directory(maps_dir)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(maps_dir))
            if (e.path().extension() == ".png") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const std::string stem = f.stem().string();
            const auto us = stem.find('_');
            if (us == std::string::npos) fail(ErrorCode::ParseError, "bad map filename " + f.string());
            const ViewLabel v = view_from_string(stem.substr(0, us));
            const auto node = parse_node(stem.substr(us + 1));
            if (!node) fail(ErrorCode::ParseError, "unknown node in map filename " + f.string());
            const RasterImage img = read_image(f);
            std::vector<float> vals(img.size());
            for (std::size_t i = 0; i < img.size(); ++i) vals[i] = static_cast<float>(img.samples()[i]) / 255.0f;
            b.maps.emplace_back(*node, v, img.width(), img.height(), std::move(vals));
        }
    }
    validate_bundle(b);
    return b;
}

inline void save_bundle(const fs::path& dir, const PredictionBundle& b) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [key, s] : b.node_scores) scores[std::string(to_string(key.first))][std::string(to_string(key.second))] = s;
    write_file_atomic(dir / "scores.json", scores.dump(2) + "\n");
    for (const auto& m : b.maps) {
        std::vector<std::uint16_t> px(m.values().size());
        for (std::size_t i = 0; i < px.size(); ++i)
            px[i] = static_cast<std::uint16_t>(std::lround(std::clamp(m.values()[i], 0.0f, 1.0f) * 255.0f));
        write_png(dir / "maps" / (std::string(to_string(m.view())) + "_" + std::string(to_string(m.node())) + ".png"),
                  RasterImage(m.width(), m.height(), 8, std::move(px)));
    }
}

// ---------------------------------------------------------------------------
// Aggregation and binarization
// ---------------------------------------------------------------------------

/// Bilinear upscale of a native-scale map into the canonical frame.
inline ProbabilityMap to_canonical(const ProbabilityMap& m) {
    if (m.is_canonical()) return m;
    std::vector<float> out(static_cast<std::size_t>(kCanonicalWidth) * kCanonicalHeight);
    const double sx = static_cast<double>(m.width()) / kCanonicalWidth;
    const double sy = static_cast<double>(m.height()) / kCanonicalHeight;
    for (int v = 0; v < kCanonicalHeight; ++v) {
        const double fy = std::clamp((v + 0.5) * sy - 0.5, 0.0, static_cast<double>(m.height() - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, m.height() - 1);
        const double ty = fy - y0;
        for (int u = 0; u < kCanonicalWidth; ++u) {
            const double fx = std::clamp((u + 0.5) * sx - 0.5, 0.0, static_cast<double>(m.width() - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, m.width() - 1);
            const double tx = fx - x0;
            const double val = (m.at(x0, y0) * (1 - tx) + m.at(x1, y0) * tx) * (1 - ty) +
                               (m.at(x0, y1) * (1 - tx) + m.at(x1, y1) * tx) * ty;
            out[static_cast<std::size_t>(v) * kCanonicalWidth + u] = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
    }
    return ProbabilityMap(m.node(), m.view(), kCanonicalWidth, kCanonicalHeight, std::move(out));
}

/// 8-connected components of {p : map(p) >= threshold} in the canonical frame.
/// Normal maps produce no blobs.
inline std::vector<HeatmapBlob> binarize_heatmap(const ProbabilityMap& map, double threshold = 0.5) {
    std::vector<HeatmapBlob> blobs;
    const auto mapping = display_category(map.node());
    if (!mapping) return blobs;
    // Bilinear values never exceed the native maximum.
    const auto& native = map.values();
    if (native.empty() || *std::max_element(native.begin(), native.end()) < threshold) return blobs;
    const ProbabilityMap canon = to_canonical(map);
    BinaryMask above(kCanonicalWidth, kCanonicalHeight);
    for (std::size_t i = 0; i < canon.values().size(); ++i) above.set_index(i, canon.values()[i] >= threshold);
    const auto cc = label_components(above, Connectivity::Eight);
    blobs.resize(cc.count());
    for (std::size_t k = 0; k < cc.count(); ++k) {
        blobs[k].view = map.view();
        blobs[k].category = mapping->category;
        blobs[k].suspicious = mapping->suspicious;
        blobs[k].source = map.node();
        blobs[k].pixels.reserve(cc.sizes[k]);
    }
    for (std::size_t i = 0; i < cc.labels.size(); ++i) {
        const auto label = cc.labels[i];
        if (label == 0) continue;
        auto& b = blobs[static_cast<std::size_t>(label - 1)];
        b.pixels.push_back(static_cast<std::uint32_t>(i));
        b.peak_score = std::max(b.peak_score, static_cast<double>(canon.values()[i]));
    }
    return blobs;
}

/// Per-breast, per-category suspicion scores (max over the breast's views and
/// the category's suspicious nodes), benign display scores capped at 15%,
/// case cancer score, and heatmap blobs for every lesion-node map.
inline CaseAssessment aggregate_case(const PredictionBundle& bundle, const BinarizeConfig& cfg = {}) {
    for (auto v : kAllViews)
        for (auto n : kAllNodes)
            if (!bundle.node_scores.contains({v, n}))
                fail(ErrorCode::IncompleteBundle, bundle.case_id + ": missing " + std::string(to_string(v)) + "/" +
                                                      std::string(to_string(n)));
    CaseAssessment a;
    a.case_id = bundle.case_id;
    for (auto l : kAllLateralities)
        for (auto c : kAllCategories) {
            a.breast_scores[{l, c}] = 0.0;
            a.benign_display_scores[{l, c}] = 0.0;
        }
    for (const auto& [key, score] : bundle.node_scores) {
        const auto [view, node] = key;
        // display_category keeps BenignCalc for the benign path only.
        const auto mapping = display_category(node);
        if (!mapping) continue;
        const auto slot = std::make_pair(laterality(view), mapping->category);
        if (mapping->suspicious)
            a.breast_scores[slot] = std::max(a.breast_scores[slot], score);
        else
            a.benign_display_scores[slot] = std::max(a.benign_display_scores[slot], std::min(kBenignDisplayCap, score));
    }
    for (const auto& [slot, s] : a.breast_scores) a.cancer_score = std::max(a.cancer_score, s);

    std::vector<const ProbabilityMap*> ordered;
    for (const auto& m : bundle.maps) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(), [](const ProbabilityMap* x, const ProbabilityMap* y) {
        return std::pair(x->view(), x->node()) < std::pair(y->view(), y->node());
    });
    for (const auto* m : ordered) {
        const auto mapping = display_category(m->node());
        if (!mapping) continue;
        auto blobs = binarize_heatmap(*m, cfg.for_category(mapping->category));
        a.blobs.insert(a.blobs.end(), std::make_move_iterator(blobs.begin()), std::make_move_iterator(blobs.end()));
    }
    return a;
}

}  // namespace mammo
