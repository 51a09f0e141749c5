#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mammo_eval/error.hpp"

namespace mammo {

inline constexpr int kCanonicalWidth = 1024;
inline constexpr int kCanonicalHeight = 1536;

// ---------------------------------------------------------------------------
// Views
// ---------------------------------------------------------------------------

enum class ViewLabel { LCC, LMLO, RCC, RMLO };
enum class Laterality { Left, Right };

inline constexpr std::array<ViewLabel, 4> kAllViews = {ViewLabel::LCC, ViewLabel::LMLO, ViewLabel::RCC,
                                                       ViewLabel::RMLO};
inline constexpr std::array<Laterality, 2> kAllLateralities = {Laterality::Left, Laterality::Right};

constexpr Laterality laterality(ViewLabel v) {
    return (v == ViewLabel::LCC || v == ViewLabel::LMLO) ? Laterality::Left : Laterality::Right;
}

inline std::string_view to_string(ViewLabel v) {
    switch (v) {
    case ViewLabel::LCC: return "LCC";
    case ViewLabel::LMLO: return "LMLO";
    case ViewLabel::RCC: return "RCC";
    case ViewLabel::RMLO: return "RMLO";
    }
    return "?";
}

inline std::string_view to_string(Laterality l) { return l == Laterality::Left ? "Left" : "Right"; }

inline std::optional<ViewLabel> parse_view(std::string_view s) {
    for (auto v : kAllViews)
        if (to_string(v) == s) return v;
    return std::nullopt;
}

inline ViewLabel view_from_string(std::string_view s) {
    if (auto v = parse_view(s)) return *v;
    fail(ErrorCode::UnknownView, "unknown view label '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Model output nodes and final categories
// ---------------------------------------------------------------------------

enum class ModelNode {
    SuspCalc,
    SuspMass,
    SuspAxAdeno,
    SuspArchDist,
    BenignCalc,
    BenignMass,
    BenignAxAdeno,
    BenignArchDist,
    Normal,
};

inline constexpr std::array<ModelNode, 9> kAllNodes = {
    ModelNode::SuspCalc,   ModelNode::SuspMass,   ModelNode::SuspAxAdeno,   ModelNode::SuspArchDist,
    ModelNode::BenignCalc, ModelNode::BenignMass, ModelNode::BenignAxAdeno, ModelNode::BenignArchDist,
    ModelNode::Normal,
};

enum class NodeKind { Suspicious, Benign, Normal };

constexpr NodeKind node_kind(ModelNode n) {
    switch (n) {
    case ModelNode::SuspCalc:
    case ModelNode::SuspMass:
    case ModelNode::SuspAxAdeno:
    case ModelNode::SuspArchDist: return NodeKind::Suspicious;
    case ModelNode::Normal: return NodeKind::Normal;
    default: return NodeKind::Benign;
    }
}

inline std::string_view to_string(ModelNode n) {
    switch (n) {
    case ModelNode::SuspCalc: return "SuspCalc";
    case ModelNode::SuspMass: return "SuspMass";
    case ModelNode::SuspAxAdeno: return "SuspAxAdeno";
    case ModelNode::SuspArchDist: return "SuspArchDist";
    case ModelNode::BenignCalc: return "BenignCalc";
    case ModelNode::BenignMass: return "BenignMass";
    case ModelNode::BenignAxAdeno: return "BenignAxAdeno";
    case ModelNode::BenignArchDist: return "BenignArchDist";
    case ModelNode::Normal: return "Normal";
    }
    return "?";
}

inline std::optional<ModelNode> parse_node(std::string_view s) {
    for (auto n : kAllNodes)
        if (to_string(n) == s) return n;
    return std::nullopt;
}

enum class FinalCategory { Calcification, Mass, Other };

inline constexpr std::array<FinalCategory, 3> kAllCategories = {FinalCategory::Calcification, FinalCategory::Mass,
                                                                FinalCategory::Other};

inline std::string_view to_string(FinalCategory c) {
    switch (c) {
    case FinalCategory::Calcification: return "Calcification";
    case FinalCategory::Mass: return "Mass";
    case FinalCategory::Other: return "Other";
    }
    return "?";
}

inline FinalCategory category_from_string(std::string_view s) {
    for (auto c : kAllCategories)
        if (to_string(c) == s) return c;
    fail(ErrorCode::ParseError, "unknown lesion category '" + std::string(s) + "'");
}

struct NodeMapping {
    FinalCategory category;
    bool suspicious;
    friend bool operator==(const NodeMapping&, const NodeMapping&) = default;
};

/// Final-category aggregation of the nine output nodes. Calcification only
/// takes the suspicious node; benign calcification and Normal map to nothing.
constexpr std::optional<NodeMapping> node_to_category(ModelNode n) {
    switch (n) {
    case ModelNode::SuspCalc: return NodeMapping{FinalCategory::Calcification, true};
    case ModelNode::SuspMass: return NodeMapping{FinalCategory::Mass, true};
    case ModelNode::BenignMass: return NodeMapping{FinalCategory::Mass, false};
    case ModelNode::SuspAxAdeno:
    case ModelNode::SuspArchDist: return NodeMapping{FinalCategory::Other, true};
    case ModelNode::BenignAxAdeno:
    case ModelNode::BenignArchDist: return NodeMapping{FinalCategory::Other, false};
    case ModelNode::BenignCalc:
    case ModelNode::Normal: return std::nullopt;
    }
    return std::nullopt;
}

/// Category used when drawing a node's heatmap. Differs from node_to_category
/// only for BenignCalc, which is shown (benign style) but never scored.
constexpr std::optional<NodeMapping> display_category(ModelNode n) {
    if (n == ModelNode::BenignCalc) return NodeMapping{FinalCategory::Calcification, false};
    return node_to_category(n);
}

/// Compact set over the three final categories.
class CategorySet {
public:
    constexpr CategorySet() = default;
    constexpr explicit CategorySet(unsigned bits) : bits_(bits & 7u) {}
    CategorySet(std::initializer_list<FinalCategory> cats) {
        for (auto c : cats) insert(c);
    }

    constexpr void insert(FinalCategory c) { bits_ |= bit(c); }
    constexpr bool contains(FinalCategory c) const { return (bits_ & bit(c)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr unsigned bits() const { return bits_; }
    constexpr CategorySet intersect(CategorySet o) const { return CategorySet(bits_ & o.bits_); }
    constexpr bool is_subset_of(CategorySet o) const { return (bits_ & ~o.bits_) == 0; }
    constexpr bool is_strict_subset_of(CategorySet o) const { return is_subset_of(o) && bits_ != o.bits_; }

    std::vector<FinalCategory> items() const {
        std::vector<FinalCategory> out;
        for (auto c : kAllCategories)
            if (contains(c)) out.push_back(c);
        return out;
    }

    friend constexpr bool operator==(CategorySet, CategorySet) = default;

private:
    static constexpr unsigned bit(FinalCategory c) { return 1u << static_cast<unsigned>(c); }
    unsigned bits_ = 0;
};

// ---------------------------------------------------------------------------
// Case-level enumerations
// ---------------------------------------------------------------------------

enum class Birads { B1, B2, B3, B4, B4A, B4B, B4C, B5, B6 };

inline std::string_view to_string(Birads b) {
    static constexpr std::array<std::string_view, 9> names = {"1", "2", "3", "4", "4A", "4B", "4C", "5", "6"};
    return names[static_cast<std::size_t>(b)];
}

inline Birads birads_from_string(std::string_view s) {
    for (int i = 0; i < 9; ++i)
        if (to_string(static_cast<Birads>(i)) == s) return static_cast<Birads>(i);
    fail(ErrorCode::ParseError, "unknown BIRADS category '" + std::string(s) + "'");
}

/// ACR breast composition a (almost entirely fat) through d (extremely dense).
enum class Density { A, B, C, D };

inline std::string_view to_string(Density d) {
    static constexpr std::array<std::string_view, 4> names = {"A", "B", "C", "D"};
    return names[static_cast<std::size_t>(d)];
}

inline Density density_from_string(std::string_view s) {
    for (int i = 0; i < 4; ++i)
        if (to_string(static_cast<Density>(i)) == s) return static_cast<Density>(i);
    fail(ErrorCode::ParseError, "unknown density '" + std::string(s) + "'");
}

enum class TruthLabel { Malignant, Benign, Normal };

inline std::string_view to_string(TruthLabel t) {
    switch (t) {
    case TruthLabel::Malignant: return "Malignant";
    case TruthLabel::Benign: return "Benign";
    case TruthLabel::Normal: return "Normal";
    }
    return "?";
}

inline TruthLabel truth_from_string(std::string_view s) {
    if (s == "Malignant") return TruthLabel::Malignant;
    if (s == "Benign") return TruthLabel::Benign;
    if (s == "Normal") return TruthLabel::Normal;
    fail(ErrorCode::ParseError, "unknown truth label '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Point {
    double x = 0;
    double y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

enum class Frame { Original, Canonical };

inline std::string_view to_string(Frame f) { return f == Frame::Original ? "original" : "canonical"; }

inline Frame frame_from_string(std::string_view s) {
    if (s == "original") return Frame::Original;
    if (s == "canonical") return Frame::Canonical;
    fail(ErrorCode::ParseError, "unknown frame '" + std::string(s) + "'");
}

struct Region {
    std::vector<Point> polygon;
    Frame frame = Frame::Original;
    friend bool operator==(const Region&, const Region&) = default;
};

struct Finding {
    FinalCategory category;
    bool suspicious;
    friend auto operator<=>(const Finding&, const Finding&) = default;
};

struct GroundTruthLesion {
    std::string case_id;
    ViewLabel view = ViewLabel::LCC;
    FinalCategory category = FinalCategory::Mass;
    bool suspicious = true;
    Region region;
    friend bool operator==(const GroundTruthLesion&, const GroundTruthLesion&) = default;
};

struct ImageRef {
    std::string path;  ///< absolute, or relative to the manifest directory
    int width = 0;
    int height = 0;
    friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct Case {
    std::string case_id;
    std::map<ViewLabel, ImageRef> views;
    Birads birads = Birads::B1;
    Density density = Density::B;
    std::set<Finding> report_findings;
    std::vector<GroundTruthLesion> gt_lesions;
    TruthLabel truth_label = TruthLabel::Normal;
    std::optional<int> max_input;  ///< per-case override of the 14-bit ceiling

    CategorySet suspicious_findings() const {
        CategorySet s;
        for (const auto& f : report_findings)
            if (f.suspicious) s.insert(f.category);
        return s;
    }

    friend bool operator==(const Case&, const Case&) = default;
};

/// Malignant if any suspicious finding, else Benign if any finding, else Normal.
inline TruthLabel derive_truth_label(const std::set<Finding>& findings) {
    bool any_benign = false;
    for (const auto& f : findings) {
        if (f.suspicious) return TruthLabel::Malignant;
        any_benign = true;
    }
    return any_benign ? TruthLabel::Benign : TruthLabel::Normal;
}

}  // namespace mammo
