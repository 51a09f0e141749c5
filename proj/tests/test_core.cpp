#include <gtest/gtest.h>

#include <random>

#include "mammo_eval/config.hpp"
#include "mammo_eval/core.hpp"
#include "mammo_eval/geometry.hpp"
#include "mammo_eval/image_io.hpp"
#include "mammo_eval/manifest.hpp"
#include "test_support.hpp"

using namespace mammo;
using testing_support::TempDir;

namespace {

void write_views(const fs::path& dir, const std::string& id, int w = 40, int h = 60) {
    for (auto v : kAllViews) write_png(dir / (id + "_" + std::string(to_string(v)) + ".png"), RasterImage(w, h, 16));
}

nlohmann::json one_case(const std::string& id) {
    nlohmann::json c;
    c["id"] = id;
    c["birads"] = "4A";
    c["density"] = "C";
    c["views"] = nlohmann::json::object();
    for (auto v : kAllViews) c["views"][std::string(to_string(v))] = id + "_" + std::string(to_string(v)) + ".png";
    c["report_findings"] = {{{"category", "Mass"}, {"suspicious", true}}};
    c["lesions"] = {{{"view", "LCC"},
                     {"category", "Mass"},
                     {"suspicious", true},
                     {"frame", "original"},
                     {"polygon", {{5, 5}, {15, 5}, {15, 20}, {5, 20}}}}};
    return c;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Usage;
}

}  // namespace

TEST(NodeMapping, SuspMassIsSuspiciousMass) {
    EXPECT_EQ(node_to_category(ModelNode::SuspMass), (NodeMapping{FinalCategory::Mass, true}));
}

TEST(NodeMapping, ArchitecturalDistortionIsOther) {
    EXPECT_EQ(node_to_category(ModelNode::SuspArchDist), (NodeMapping{FinalCategory::Other, true}));
    EXPECT_EQ(node_to_category(ModelNode::SuspAxAdeno), (NodeMapping{FinalCategory::Other, true}));
}

TEST(NodeMapping, NormalHasNoCategory) { EXPECT_FALSE(node_to_category(ModelNode::Normal).has_value()); }

TEST(NodeMapping, BenignCalcIsDisplayedButNotScored) {
    EXPECT_FALSE(node_to_category(ModelNode::BenignCalc).has_value());
    EXPECT_EQ(display_category(ModelNode::BenignCalc), (NodeMapping{FinalCategory::Calcification, false}));
}

TEST(NodeMapping, TotalWithFullSuspiciousImage) {
    std::set<FinalCategory> suspicious;
    for (auto n : kAllNodes) {
        const auto m = node_to_category(n);
        EXPECT_EQ(m.has_value(), n != ModelNode::Normal && n != ModelNode::BenignCalc) << to_string(n);
        if (m && m->suspicious) suspicious.insert(m->category);
        EXPECT_EQ(node_kind(n) == NodeKind::Suspicious, m && m->suspicious) << to_string(n);
    }
    EXPECT_EQ(suspicious, (std::set<FinalCategory>{FinalCategory::Calcification, FinalCategory::Mass,
                                                   FinalCategory::Other}));
}

TEST(NodeMapping, NamesRoundTrip) {
    for (auto n : kAllNodes) EXPECT_EQ(parse_node(to_string(n)), n);
    EXPECT_FALSE(parse_node("Suspicious").has_value());
}

TEST(Views, LateralityAndNames) {
    EXPECT_EQ(laterality(ViewLabel::LMLO), Laterality::Left);
    EXPECT_EQ(laterality(ViewLabel::RCC), Laterality::Right);
    for (auto v : kAllViews) EXPECT_EQ(view_from_string(to_string(v)), v);
    EXPECT_EQ(code_of([] { view_from_string("XCC"); }), ErrorCode::UnknownView);
}

TEST(CategorySetTest, SubsetAlgebra) {
    const CategorySet mass{FinalCategory::Mass};
    const CategorySet both{FinalCategory::Mass, FinalCategory::Calcification};
    EXPECT_TRUE(mass.is_strict_subset_of(both));
    EXPECT_FALSE(both.is_subset_of(mass));
    EXPECT_EQ(both.intersect(mass), mass);
    EXPECT_TRUE(CategorySet{}.empty());
    EXPECT_EQ(both.items().size(), 2u);
}

TEST(TruthLabelTest, DerivedFromFindings) {
    EXPECT_EQ(derive_truth_label({}), TruthLabel::Normal);
    EXPECT_EQ(derive_truth_label({{FinalCategory::Mass, false}}), TruthLabel::Benign);
    EXPECT_EQ(derive_truth_label({{FinalCategory::Mass, false}, {FinalCategory::Other, true}}),
              TruthLabel::Malignant);
}

TEST(Transform, IdentityLeavesPointsUnchanged) {
    TransformRecord r;
    const Point p{123.5, 77.25};
    EXPECT_EQ(r.forward(p), p);
    EXPECT_EQ(r.inverse(p), p);
}

TEST(Transform, CropAndHalfScale) {
    TransformRecord r;
    r.crop_offset = {100, 50};
    r.scale_x = r.scale_y = 0.5;
    const Point q = r.forward({300, 250});
    EXPECT_DOUBLE_EQ(q.x, 100);
    EXPECT_DOUBLE_EQ(q.y, 100);
}

TEST(Transform, PointLeftOfCropClampsToZero) {
    TransformRecord r;
    r.crop_offset = {100, 50};
    r.scale_x = r.scale_y = 0.5;
    Region region{{{20, 100}, {300, 100}, {300, 250}}, Frame::Original};
    const auto out = transform_region(region, r);
    EXPECT_EQ(out.frame, Frame::Canonical);
    EXPECT_DOUBLE_EQ(out.polygon[0].x, 0.0);
    EXPECT_DOUBLE_EQ(out.polygon[0].y, 25.0);
}

TEST(Transform, CanonicalRegionIsRejected) {
    Region region{{{1, 1}, {5, 1}, {5, 5}}, Frame::Canonical};
    EXPECT_EQ(code_of([&] { transform_region(region, TransformRecord{}); }), ErrorCode::FrameMismatch);
}

TEST(Transform, InverseUndoesForwardInsideCropWindow) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        TransformRecord r;
        const int cw = 100 + static_cast<int>(u(rng) * 900), ch = 100 + static_cast<int>(u(rng) * 900);
        r.crop_offset = {std::floor(u(rng) * 300), std::floor(u(rng) * 300)};
        r.pad_left = static_cast<int>(u(rng) * 50);
        r.pad_top = static_cast<int>(u(rng) * 50);
        r.scale_x = kCanonicalWidth / (cw + 2.0 * r.pad_left);
        r.scale_y = kCanonicalHeight / (ch + 2.0 * r.pad_top);
        const Point p{r.crop_offset.x + u(rng) * cw, r.crop_offset.y + u(rng) * ch};
        const Point back = r.inverse(clamp_to_canonical(r.forward(p)));
        EXPECT_NEAR(back.x, p.x, 1.0 / r.scale_x);
        EXPECT_NEAR(back.y, p.y, 1.0 / r.scale_y);
    }
}

TEST(Polygon, SimpleAndSelfIntersecting) {
    EXPECT_TRUE(is_simple_polygon(testing_support::rect(0, 0, 4, 4)));
    EXPECT_FALSE(is_simple_polygon({{0, 0}, {4, 4}, {4, 0}, {0, 4}}));
    EXPECT_FALSE(is_simple_polygon({{0, 0}, {4, 0}}));
    EXPECT_EQ(code_of([] { validate_region({{{0, 0}, {4, 0}}, Frame::Original}, 10, 10); }), ErrorCode::BadPolygon);
    EXPECT_EQ(code_of([] { validate_region({testing_support::rect(0, 0, 11, 4), Frame::Original}, 10, 10); }),
              ErrorCode::BadPolygon);
}

TEST(Polygon, AreaOfRectangle) { EXPECT_DOUBLE_EQ(polygon_area(testing_support::rect(1, 2, 5, 7)), 20.0); }

TEST(Polygon, RasterizeMatchesPointInPolygonOracle) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    const int w = 64, h = 48;
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + static_cast<int>(u(rng) * 8);
        const double cx = 10 + u(rng) * 44, cy = 10 + u(rng) * 28;
        std::vector<Point> poly;
        for (int k = 0; k < n; ++k) {
            const double a = 2 * std::numbers::pi * (k + 0.3 * u(rng)) / n;
            const double rad = 3 + u(rng) * 12;
            poly.push_back({cx + rad * std::cos(a), cy + rad * std::sin(a)});
        }
        const auto mask = rasterize(poly, w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                ASSERT_EQ(mask.at(x, y), testing_support::point_in_polygon(x + 0.5, y + 0.5, poly))
                    << "trial " << trial << " at " << x << "," << y;
    }
}

TEST(Manifest, SmallestValidManifest) {
    TempDir dir;
    write_views(dir.path(), "C1");
    nlohmann::json doc{{"dataset_id", "tiny"}, {"cases", {one_case("C1")}}};
    write_file_atomic(dir / "manifest.json", doc.dump());
    const auto m = load_manifest(dir / "manifest.json");
    ASSERT_EQ(m.cases.size(), 1u);
    const auto& c = m.cases[0];
    EXPECT_EQ(c.views.size(), 4u);
    for (const auto& [v, ref] : c.views) {
        EXPECT_TRUE(fs::path(ref.path).is_absolute());
        EXPECT_EQ(ref.width, 40);
        EXPECT_EQ(ref.height, 60);
    }
    EXPECT_EQ(c.truth_label, TruthLabel::Malignant);
    EXPECT_EQ(c.birads, Birads::B4A);
    ASSERT_EQ(c.gt_lesions.size(), 1u);
    EXPECT_EQ(c.gt_lesions[0].region.frame, Frame::Original);
}

TEST(Manifest, MissingViewIsRejected) {
    TempDir dir;
    write_views(dir.path(), "C1");
    auto c = one_case("C1");
    c["views"].erase("RMLO");
    write_file_atomic(dir / "manifest.json", nlohmann::json{{"cases", {c}}}.dump());
    EXPECT_EQ(code_of([&] { load_manifest(dir / "manifest.json"); }), ErrorCode::MissingView);
}

TEST(Manifest, TwoPointPolygonIsRejected) {
    TempDir dir;
    write_views(dir.path(), "C1");
    auto c = one_case("C1");
    c["lesions"][0]["polygon"] = {{1, 1}, {5, 5}};
    write_file_atomic(dir / "manifest.json", nlohmann::json{{"cases", {c}}}.dump());
    EXPECT_EQ(code_of([&] { load_manifest(dir / "manifest.json"); }), ErrorCode::BadPolygon);
}

TEST(Manifest, DuplicateIdIsRejected) {
    TempDir dir;
    write_views(dir.path(), "C1");
    write_file_atomic(dir / "manifest.json", nlohmann::json{{"cases", {one_case("C1"), one_case("C1")}}}.dump());
    EXPECT_EQ(code_of([&] { load_manifest(dir / "manifest.json"); }), ErrorCode::DuplicateCaseId);
}

TEST(Manifest, MissingImageAndBadJson) {
    TempDir dir;
    write_file_atomic(dir / "manifest.json", nlohmann::json{{"cases", {one_case("C1")}}}.dump());
    EXPECT_EQ(code_of([&] { load_manifest(dir / "manifest.json"); }), ErrorCode::IoFailure);
    write_file_atomic(dir / "bad.json", "{not json");
    EXPECT_EQ(code_of([&] { load_manifest(dir / "bad.json"); }), ErrorCode::ParseError);
}

TEST(Manifest, NormalCaseWithSuspiciousLesionIsRejected) {
    TempDir dir;
    write_views(dir.path(), "C1");
    auto c = one_case("C1");
    c["report_findings"] = nlohmann::json::array();
    write_file_atomic(dir / "manifest.json", nlohmann::json{{"cases", {c}}}.dump());
    EXPECT_EQ(code_of([&] { load_manifest(dir / "manifest.json"); }), ErrorCode::ValidationFailed);
}

TEST(Manifest, RoundTripIsStructurallyEqual) {
    TempDir dir;
    write_views(dir.path(), "C1");
    write_views(dir.path(), "C2");
    auto c2 = one_case("C2");
    c2["report_findings"] = {{{"category", "Calcification"}, {"suspicious", false}}};
    c2["lesions"][0]["suspicious"] = false;
    c2["max_input"] = 4095;
    write_file_atomic(dir / "manifest.json",
                      nlohmann::json{{"dataset_id", "rt"}, {"cases", {one_case("C1"), c2}}}.dump());
    const auto first = load_manifest(dir / "manifest.json");
    fs::create_directories(dir / "elsewhere");
    save_manifest(dir / "elsewhere" / "copy.json", first);
    const auto second = load_manifest(dir / "elsewhere" / "copy.json");
    EXPECT_EQ(first, second);
    EXPECT_EQ(second.cases[1].max_input, 4095);
    EXPECT_EQ(second.cases[1].truth_label, TruthLabel::Benign);
}

TEST(ImageIo, PngRoundTripBothDepths) {
    TempDir dir;
    RasterImage img16(7, 5, 16);
    RasterImage img8(7, 5, 8);
    for (std::size_t i = 0; i < img16.size(); ++i) {
        img16.samples()[i] = static_cast<std::uint16_t>(i * 997 % 16384);
        img8.samples()[i] = static_cast<std::uint16_t>(i * 37 % 256);
    }
    write_png(dir / "a.png", img16);
    write_png(dir / "b.png", img8);
    EXPECT_EQ(read_image(dir / "a.png"), img16);
    EXPECT_EQ(read_image(dir / "b.png"), img8);
    EXPECT_EQ(read_image_size(dir / "a.png"), std::make_pair(7, 5));
}

TEST(ImageIo, PgmRoundTrip) {
    TempDir dir;
    RasterImage img(3, 2, 16, {0, 1, 2, 16383, 500, 9});
    write_pgm(dir / "a.pgm", img);
    EXPECT_EQ(read_image(dir / "a.pgm"), img);
}

TEST(ImageIo, UnknownFormatIsRejected) {
    TempDir dir;
    write_file_atomic(dir / "x.png", "definitely not an image");
    EXPECT_EQ(code_of([&] { read_image(dir / "x.png"); }), ErrorCode::IoFailure);
}

TEST(ErrorTest, WhatCarriesCodeName) {
    const Error e(ErrorCode::InvalidCounts, "3/2");
    EXPECT_STREQ(e.what(), "InvalidCounts: 3/2");
    EXPECT_EQ(e.message(), "3/2");
}

TEST(Config, KeyValueFileWithSections) {
    const auto kv = parse_key_values(
        "seed = 9\n# comment\n[bootstrap]\nreps = 100\nlevel = 0.9\n[thresholds]\nhit = 0.4 # inline\n"
        "[service]\nblinded = true\n");
    RunConfig cfg;
    apply_key_values(cfg, kv);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.bootstrap_reps, 100);
    EXPECT_DOUBLE_EQ(cfg.level, 0.9);
    EXPECT_DOUBLE_EQ(cfg.hit_threshold, 0.4);
    EXPECT_TRUE(cfg.blinded);
}

TEST(Config, UnknownKeyAndBadValue) {
    RunConfig cfg;
    EXPECT_EQ(code_of([&] { apply_key_values(cfg, {{"colour", "red"}}); }), ErrorCode::ValidationFailed);
    RunConfig bad;
    bad.hit_threshold = 1.5;
    EXPECT_EQ(code_of([&] { validate_config(bad); }), ErrorCode::ValidationFailed);
}

TEST(Config, SnapshotOmitsPaths) {
    RunConfig a, b;
    b.store = "/somewhere/else";
    b.out = "/tmp/out";
    b.jobs = 4;
    EXPECT_EQ(config_snapshot(a), config_snapshot(b));
    b.seed = 3;
    EXPECT_NE(config_snapshot(a), config_snapshot(b));
    EXPECT_EQ(config_snapshot(a)["tool_version"], kToolVersion);
}
