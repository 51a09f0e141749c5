#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "mammo_eval/core.hpp"
#include "mammo_eval/fs_util.hpp"
#include "mammo_eval/geometry.hpp"
#include "mammo_eval/image_io.hpp"

namespace mammo {

using json = nlohmann::json;

struct Manifest {
    std::string dataset_id;
    std::vector<Case> cases;
    friend bool operator==(const Manifest&, const Manifest&) = default;
};

namespace detail {

inline const json& require(const json& obj, const char* key, const std::string& context) {
    if (!obj.is_object() || !obj.contains(key)) fail(ErrorCode::ParseError, context + ": missing field '" + key + "'");
    return obj.at(key);
}

inline std::string scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    fail(ErrorCode::ParseError, "expected string or integer, got " + v.dump());
}

inline std::vector<Point> parse_polygon(const json& arr, const std::string& context) {
    if (!arr.is_array()) fail(ErrorCode::BadPolygon, context + ": polygon must be an array");
    std::vector<Point> pts;
    for (const auto& p : arr) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            fail(ErrorCode::BadPolygon, context + ": polygon point must be [x, y]");
        pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return pts;
}

}  // namespace detail

/// Parses a manifest document. `base_dir` resolves relative image paths; image
/// headers are read to validate original-frame polygons, pixels are not loaded.
inline Manifest parse_manifest(const json& doc, const fs::path& base_dir, bool check_images = true) {
    Manifest m;
    if (doc.contains("dataset_id")) m.dataset_id = doc.at("dataset_id").get<std::string>();
    const auto& cases = detail::require(doc, "cases", "manifest");
    if (!cases.is_array()) fail(ErrorCode::ParseError, "manifest: 'cases' must be an array");

    std::set<std::string> seen;
    for (const auto& jc : cases) {
        Case c;
        c.case_id = detail::scalar_to_string(detail::require(jc, "id", "case"));
        const std::string ctx = "case " + c.case_id;
        if (!seen.insert(c.case_id).second) fail(ErrorCode::DuplicateCaseId, "duplicate case id " + c.case_id);

        const auto& views = detail::require(jc, "views", ctx);
        for (auto it = views.begin(); it != views.end(); ++it) {
            const ViewLabel v = view_from_string(it.key());
            const auto& jv = it.value();
            fs::path p = jv.is_object() ? detail::require(jv, "path", ctx).get<std::string>() : jv.get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            p = fs::absolute(p).lexically_normal();
            if (check_images && !fs::exists(p)) fail(ErrorCode::IoFailure, ctx + ": image not found: " + p.string());
            if (jv.is_object() && jv.contains("width") && jv.contains("height")) {
                c.views[v] = ImageRef{p.string(), jv.at("width").get<int>(), jv.at("height").get<int>()};
            } else {
                const auto [w, h] = read_image_size(p);
                c.views[v] = ImageRef{p.string(), w, h};
            }
        }
        for (auto v : kAllViews)
            if (!c.views.contains(v)) fail(ErrorCode::MissingView, ctx + " lacks view " + std::string(to_string(v)));

        c.birads = birads_from_string(detail::scalar_to_string(detail::require(jc, "birads", ctx)));
        c.density = density_from_string(detail::require(jc, "density", ctx).get<std::string>());
        if (jc.contains("max_input")) c.max_input = jc.at("max_input").get<int>();

        if (jc.contains("report_findings")) {
            for (const auto& f : jc.at("report_findings"))
                c.report_findings.insert(
                    {category_from_string(detail::require(f, "category", ctx).get<std::string>()),
                     detail::require(f, "suspicious", ctx).get<bool>()});
        }

        if (jc.contains("lesions")) {
            for (const auto& jl : jc.at("lesions")) {
                GroundTruthLesion l;
                l.case_id = c.case_id;
                l.view = view_from_string(detail::require(jl, "view", ctx).get<std::string>());
                l.category = category_from_string(detail::require(jl, "category", ctx).get<std::string>());
                l.suspicious = jl.value("suspicious", true);
                l.region.frame = frame_from_string(jl.value("frame", std::string("original")));
                l.region.polygon = detail::parse_polygon(detail::require(jl, "polygon", ctx), ctx);
                const auto& ref = c.views.at(l.view);
                if (l.region.frame == Frame::Original)
                    validate_region(l.region, ref.width, ref.height);
                else
                    validate_region(l.region, kCanonicalWidth, kCanonicalHeight);
                c.gt_lesions.push_back(std::move(l));
            }
        }

        c.truth_label = jc.contains("truth") ? truth_from_string(jc.at("truth").get<std::string>())
                                             : derive_truth_label(c.report_findings);
        if (c.truth_label == TruthLabel::Normal) {
            for (const auto& l : c.gt_lesions)
                if (l.suspicious)
                    fail(ErrorCode::ValidationFailed, ctx + ": Normal case carries a suspicious lesion");
        }
        m.cases.push_back(std::move(c));
    }
    return m;
}

inline Manifest load_manifest(const fs::path& path, bool check_images = true) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    try {
        return parse_manifest(doc, path.parent_path(), check_images);
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

inline json polygon_to_json(const std::vector<Point>& poly) {
    json arr = json::array();
    for (const auto& p : poly) arr.push_back({p.x, p.y});
    return arr;
}

/// Image paths are written as stored on the Case (absolute after loading).
inline json manifest_to_json(const Manifest& m) {
    json doc;
    doc["dataset_id"] = m.dataset_id;
    doc["cases"] = json::array();
    for (const auto& c : m.cases) {
        json jc;
        jc["id"] = c.case_id;
        jc["views"] = json::object();
        for (const auto& [v, ref] : c.views)
            jc["views"][std::string(to_string(v))] = {{"path", ref.path}, {"width", ref.width}, {"height", ref.height}};
        jc["birads"] = std::string(to_string(c.birads));
        jc["density"] = std::string(to_string(c.density));
        if (c.max_input) jc["max_input"] = *c.max_input;
        jc["report_findings"] = json::array();
        for (const auto& f : c.report_findings)
            jc["report_findings"].push_back({{"category", to_string(f.category)}, {"suspicious", f.suspicious}});
        jc["lesions"] = json::array();
        for (const auto& l : c.gt_lesions)
            jc["lesions"].push_back({{"view", to_string(l.view)},
                                     {"category", to_string(l.category)},
                                     {"suspicious", l.suspicious},
                                     {"frame", to_string(l.region.frame)},
                                     {"polygon", polygon_to_json(l.region.polygon)}});
        jc["truth"] = std::string(to_string(c.truth_label));
        doc["cases"].push_back(std::move(jc));
    }
    return doc;
}

inline void save_manifest(const fs::path& path, const Manifest& m) {
    write_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
}

}  // namespace mammo
