#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mammo_eval/study.hpp"
#include "test_support.hpp"

using namespace mammo;
using testing_support::rect;
using testing_support::rect_pixels;
using CC = ConcordanceCategory;

namespace {

CategorySet subset_from_bits(int bits) {
    CategorySet s;
    for (int i = 0; i < 3; ++i)
        if (bits & (1 << i)) s.insert(kAllCategories[i]);
    return s;
}

/// Same rules as the classifier, phrased over bitmasks.
CC truth_table(int report, int ai) {
    if (report == 0 && ai == 0) return CC::Agree;
    if (report == 0 || ai == 0) return CC::Reject;
    if (report == ai) return CC::Agree;
    if ((ai & report) == ai) return CC::Add;
    if (ai & report) return CC::Edit;
    return CC::Reject;
}

GroundTruthLesion lesion(int x0, int y0, int x1, int y1, ViewLabel v = ViewLabel::LCC) {
    GroundTruthLesion l;
    l.case_id = "C";
    l.view = v;
    l.region = {rect(x0, y0, x1, y1), Frame::Canonical};
    return l;
}

HeatmapBlob blob(int x0, int y0, int x1, int y1, ViewLabel v = ViewLabel::LCC) {
    HeatmapBlob b;
    b.view = v;
    b.pixels = rect_pixels(x0, y0, x1, y1);
    b.peak_score = 0.8;
    return b;
}

std::vector<CC> from_counts(int agree, int edit, int add, int reject) {
    std::vector<CC> v;
    v.insert(v.end(), agree, CC::Agree);
    v.insert(v.end(), edit, CC::Edit);
    v.insert(v.end(), add, CC::Add);
    v.insert(v.end(), reject, CC::Reject);
    return v;
}

/// Reviews for `reviewer` over cases R0..R{n-1} with the given grade histogram.
std::vector<ReviewRecord> reviews_for(const std::string& reviewer, const std::map<int, int>& grades) {
    std::vector<ReviewRecord> out;
    int idx = 0;
    for (const auto& [g, n] : grades)
        for (int i = 0; i < n; ++i) {
            ReviewRecord r;
            r.case_id = "R" + std::to_string(idx++);
            r.reviewer_id = reviewer;
            r.grade = g;
            out.push_back(r);
        }
    return out;
}

std::set<std::string> auto_ids(int n) {
    std::set<std::string> ids;
    for (int i = 0; i < n; ++i) ids.insert("A" + std::to_string(i));
    return ids;
}

SusResponse sus(const std::string& id, std::vector<int> items) { return {id, std::move(items)}; }

}  // namespace

TEST(Classification, ReferenceExamples) {
    using F = FinalCategory;
    EXPECT_EQ(classify_concordance({F::Mass}, {F::Mass}), CC::Agree);
    EXPECT_EQ(classify_concordance({F::Mass, F::Calcification}, {F::Mass}), CC::Add);
    EXPECT_EQ(classify_concordance({F::Mass}, {F::Calcification}), CC::Reject);
    EXPECT_EQ(classify_concordance({}, {}), CC::Agree);
    EXPECT_EQ(classify_concordance({F::Mass, F::Other}, {F::Mass, F::Calcification}), CC::Edit);
    EXPECT_EQ(classify_concordance({F::Mass}, {F::Mass, F::Other}), CC::Edit);
    EXPECT_EQ(classify_concordance({}, {F::Other}), CC::Reject);
}

TEST(Classification, AllSixtyFourPairsMatchTruthTable) {
    std::map<CC, int> seen;
    for (int r = 0; r < 8; ++r)
        for (int a = 0; a < 8; ++a) {
            const auto got = classify_concordance(subset_from_bits(r), subset_from_bits(a));
            EXPECT_EQ(got, truth_table(r, a)) << r << " " << a;
            ++seen[got];
        }
    EXPECT_EQ(seen.size(), 4u);
}

TEST(Localization, ReferenceExamples) {
    const std::vector<GroundTruthLesion> two = {lesion(0, 0, 10, 10), lesion(100, 100, 110, 110)};
    EXPECT_EQ(localize_concordance(two, {blob(0, 0, 6, 10), blob(100, 100, 106, 110)}), CC::Agree);
    EXPECT_EQ(localize_concordance(two, {blob(0, 0, 10, 10), blob(100, 100, 110, 110), blob(500, 500, 510, 510)}),
              CC::Edit);
    EXPECT_EQ(localize_concordance(two, {blob(0, 0, 10, 10)}), CC::Add);
    EXPECT_EQ(localize_concordance(two, {blob(300, 300, 320, 320)}), CC::Reject);
}

TEST(Localization, NoLesions) {
    EXPECT_EQ(localize_concordance({}, {}), CC::Agree);
    EXPECT_EQ(localize_concordance({}, {blob(0, 0, 4, 4)}), CC::Reject);
}

TEST(Localization, ExactlyHalfIsNotAHit) {
    EXPECT_EQ(localize_concordance({lesion(0, 0, 10, 10)}, {blob(0, 0, 5, 10)}), CC::Reject);
    EXPECT_EQ(localize_concordance({lesion(0, 0, 10, 10)}, {blob(0, 0, 6, 10)}), CC::Agree);
}

TEST(Localization, HitAndFalsePositiveGrid) {
    for (std::size_t lesions = 0; lesions <= 3; ++lesions)
        for (std::size_t hits = 0; hits <= lesions; ++hits)
            for (std::size_t blobs = 0; blobs <= 3; ++blobs)
                for (std::size_t fp = 0; fp <= blobs; ++fp) {
                    const auto c = localization_category(lesions, hits, blobs, fp);
                    CC expected;
                    if (lesions == 0)
                        expected = blobs == 0 ? CC::Agree : CC::Reject;
                    else if (hits == lesions)
                        expected = fp == 0 ? CC::Agree : CC::Edit;
                    else
                        expected = hits > 0 ? CC::Add : CC::Reject;
                    EXPECT_EQ(c, expected);
                }
}

TEST(Localization, EmptyGeometryPropagates) {
    GroundTruthLesion l = lesion(0, 0, 10, 10);
    l.region.polygon = rect(3.6, 3.6, 3.9, 3.9);
    try {
        localize_concordance({l}, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyGeometry);
    }
}

TEST(Rate, LargeClassificationLog) {
    const auto s = concordance_rate(from_counts(523, 193, 21, 146));
    EXPECT_EQ(s.concordant, 737);
    EXPECT_EQ(s.total, 883);
    EXPECT_NEAR(s.rate.estimate, 0.835, 0.0005);
    EXPECT_NEAR(s.rate.lower, 0.808, 0.001);
    EXPECT_NEAR(s.rate.upper, 0.859, 0.001);
    EXPECT_EQ(s.counts.at(CC::Reject), 146);
}

TEST(Rate, LargeLocalizationLog) {
    const auto s = concordance_rate(from_counts(376, 178, 52, 155));
    EXPECT_EQ(s.concordant, 606);
    EXPECT_NEAR(s.rate.estimate, 0.796, 0.0005);
    EXPECT_NEAR(s.rate.lower, 0.766, 0.001);
    EXPECT_NEAR(s.rate.upper, 0.824, 0.001);
}

TEST(Rate, AllAgree) {
    const auto s = concordance_rate(from_counts(12, 0, 0, 0));
    EXPECT_EQ(s.rate.estimate, 1.0);
    EXPECT_EQ(s.rate.upper, 1.0);
}

TEST(Rate, CountsSumAndBracket) {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> pick(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<CC> cats(1 + rng() % 200);
        for (auto& c : cats) c = kAllConcordance[pick(rng)];
        const auto s = concordance_rate(cats);
        std::int64_t sum = 0;
        for (const auto& [c, n] : s.counts) sum += n;
        EXPECT_EQ(sum, s.total);
        EXPECT_EQ(s.concordant + s.counts.at(CC::Reject), s.total);
        EXPECT_LE(s.rate.lower, s.rate.estimate);
        EXPECT_GE(s.rate.upper, s.rate.estimate);
    }
}

TEST(Rate, EmptyRejected) { EXPECT_THROW(concordance_rate({}), Error); }

TEST(CaseConcordance, UsesSuspiciousFindingsAndBlobs) {
    Case c;
    c.case_id = "C";
    c.report_findings = {{FinalCategory::Mass, true}, {FinalCategory::Calcification, false}};
    c.gt_lesions = {lesion(0, 0, 10, 10)};
    CaseAssessment a;
    a.case_id = "C";
    a.blobs = {blob(0, 0, 10, 10)};
    HeatmapBlob benign = blob(400, 400, 420, 420);
    benign.suspicious = false;
    benign.category = FinalCategory::Calcification;
    a.blobs.push_back(benign);
    const auto r = case_concordance(c, a);
    EXPECT_EQ(r.classification, CC::Agree);
    EXPECT_EQ(r.localization, CC::Agree);
    EXPECT_TRUE(r.auto_accept());
    EXPECT_EQ(concordance_record_from_json(concordance_record_to_json(r)), r);
}

TEST(Reviews, JsonRoundTripAndValidation) {
    ReviewRecord r{"C1", "rev1", 3, CC::Edit, CC::Add, "2024-01-01T00:00:00Z"};
    EXPECT_EQ(review_from_json(review_to_json(r)), r);
    auto bad = review_to_json(r);
    bad["grade"] = 7;
    EXPECT_THROW(review_from_json(bad), Error);
    bad = review_to_json(r);
    bad["classification"] = "Maybe";
    EXPECT_THROW(review_from_json(bad), Error);
}

TEST(Reviews, LogParsingAndLatestWins) {
    ReviewRecord a{"C1", "rev1", 1, CC::Agree, CC::Agree, "t1"};
    ReviewRecord b{"C2", "rev1", 4, CC::Agree, CC::Agree, "t2"};
    ReviewRecord a2 = a;
    a2.grade = 3;
    const std::string log = review_to_json(a).dump() + "\n\n" + review_to_json(b).dump() + "\n" +
                            review_to_json(a2).dump() + "\n";
    const auto parsed = parse_review_log(log);
    ASSERT_EQ(parsed.size(), 3u);
    const auto latest = latest_reviews(parsed);
    ASSERT_EQ(latest.size(), 2u);
    EXPECT_EQ(latest[0], a2);
    EXPECT_EQ(latest[1], b);
    try {
        parse_review_log("{not json\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
}

TEST(Acceptance, FirstTwoReaderStudy) {
    auto recs = reviews_for("A", {{1, 29}, {2, 84}, {3, 291}, {4, 56}});
    const auto b = reviews_for("B", {{1, 30}, {2, 84}, {3, 290}, {4, 56}});
    recs.insert(recs.end(), b.begin(), b.end());
    const auto s = acceptance_rate(recs, auto_ids(423), 883);
    EXPECT_DOUBLE_EQ(s.mean_accepted, 853.5);
    EXPECT_NEAR(s.mean_rate, 0.967, 0.0005);
    EXPECT_EQ(s.interval.successes, 854);
    EXPECT_NEAR(s.interval.lower, 0.953, 0.001);
    EXPECT_NEAR(s.interval.upper, 0.977, 0.001);
    EXPECT_DOUBLE_EQ(s.mean_grade_counts.at(1), 29.5);
    EXPECT_DOUBLE_EQ(s.mean_grade_counts.at(3), 290.5);
}

TEST(Acceptance, SecondTwoReaderStudy) {
    auto recs = reviews_for("A", {{1, 81}, {2, 224}, {3, 123}, {4, 26}});
    const auto b = reviews_for("B", {{1, 82}, {2, 223}, {3, 123}, {4, 26}});
    recs.insert(recs.end(), b.begin(), b.end());
    const auto s = acceptance_rate(recs, auto_ids(307), 761);
    EXPECT_DOUBLE_EQ(s.mean_accepted, 679.5);
    EXPECT_NEAR(s.mean_rate, 0.893, 0.0005);
    EXPECT_NEAR(s.interval.lower, 0.869, 0.001);
    EXPECT_NEAR(s.interval.upper, 0.914, 0.001);
}

TEST(Acceptance, AllRejectedIsZero) {
    const auto s = acceptance_rate(reviews_for("A", {{1, 10}}), {}, 10);
    EXPECT_EQ(s.mean_rate, 0.0);
    EXPECT_EQ(s.interval.lower, 0.0);
}

TEST(Acceptance, ReviewOfAutoAcceptedCaseRejected) {
    auto recs = reviews_for("A", {{2, 1}});
    recs[0].case_id = "A0";
    try {
        acceptance_rate(recs, auto_ids(1), 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OverlapWithAutoAccept);
    }
}

TEST(Acceptance, DifferentCaseSetsRejectedUnlessAllowed) {
    auto recs = reviews_for("A", {{2, 3}});
    auto b = reviews_for("B", {{2, 2}});
    recs.insert(recs.end(), b.begin(), b.end());
    try {
        acceptance_rate(recs, {}, 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InconsistentCaseSets);
    }
    EXPECT_NO_THROW(acceptance_rate(recs, {}, 5, 0.95, false));
}

TEST(Acceptance, TooManyCasesIsInvalid) {
    try {
        acceptance_rate(reviews_for("A", {{2, 4}}), auto_ids(3), 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidCounts);
    }
}

TEST(Acceptance, RaisingAGradeNeverLowersRates) {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> grade(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ReviewRecord> recs;
        for (const char* rev : {"A", "B"})
            for (int i = 0; i < 20; ++i) recs.push_back({"R" + std::to_string(i), rev, grade(rng), CC::Agree, CC::Agree, ""});
        const auto before = acceptance_rate(recs, auto_ids(5), 30);
        for (std::size_t k = 0; k < recs.size(); ++k) {
            if (recs[k].grade != 1) continue;
            auto raised = recs;
            raised[k].grade = 2;
            const auto after = acceptance_rate(raised, auto_ids(5), 30);
            EXPECT_GE(after.mean_rate, before.mean_rate);
            for (std::size_t r = 0; r < after.reviewers.size(); ++r)
                EXPECT_GE(after.reviewers[r].rate, before.reviewers[r].rate);
        }
    }
}

TEST(Acceptance, LaterSubmissionReplacesEarlier) {
    auto recs = reviews_for("A", {{1, 2}});
    auto again = recs[0];
    again.grade = 4;
    recs.push_back(again);
    const auto s = acceptance_rate(recs, {}, 2);
    EXPECT_EQ(s.reviewers[0].accepted, 1);
    EXPECT_EQ(s.reviewers[0].reviewed, 2);
}

TEST(Sus, StandardArithmetic) {
    EXPECT_EQ(sus_participant_score(sus("p", std::vector<int>(10, 3))), 50.0);
    EXPECT_EQ(sus_participant_score(sus("p", {5, 1, 5, 1, 5, 1, 5, 1, 5, 1})), 100.0);
    EXPECT_EQ(sus_participant_score(sus("p", {1, 5, 1, 5, 1, 5, 1, 5, 1, 5})), 0.0);
    EXPECT_EQ(sus_participant_score(sus("p", {4, 2, 4, 2, 4, 2, 4, 2, 4, 1})), 77.5);
}

TEST(Sus, ItemValidation) {
    try {
        sus_participant_score(sus("p", std::vector<int>(9, 3)));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BadItemCount);
    }
    try {
        sus_participant_score(sus("p", {3, 3, 3, 3, 6, 3, 3, 3, 3, 3}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::BadItemValue);
    }
}

TEST(Sus, MeanAndStudentInterval) {
    const auto s = sus_score({sus("a", std::vector<int>(10, 3)), sus("b", {5, 1, 5, 1, 5, 1, 5, 1, 5, 1}),
                              sus("c", {4, 2, 4, 2, 4, 2, 4, 2, 4, 2})});
    EXPECT_DOUBLE_EQ(s.mean, (50 + 100 + 75) / 3.0);
    ASSERT_TRUE(s.interval);
    const double sd = 25.0;
    const double half = 4.302652729911275 * sd / std::sqrt(3.0);
    EXPECT_NEAR(s.interval->lower, s.mean - half, 1e-6);
    EXPECT_NEAR(s.interval->upper, s.mean + half, 1e-6);
    EXPECT_FALSE(sus_score({sus("a", std::vector<int>(10, 3))}).interval.has_value());
}

TEST(Sus, RangeAndPermutationInvariance) {
    std::mt19937 rng(2);
    std::uniform_int_distribution<int> item(1, 5);
    std::vector<SusResponse> rs;
    for (int p = 0; p < 12; ++p) {
        SusResponse r{"p" + std::to_string(p), {}};
        for (int i = 0; i < 10; ++i) r.items.push_back(item(rng));
        const double v = sus_participant_score(r);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 100.0);
        rs.push_back(r);
    }
    const auto base = sus_score(rs);
    for (int k = 0; k < 10; ++k) {
        std::shuffle(rs.begin(), rs.end(), rng);
        const auto s = sus_score(rs);
        EXPECT_NEAR(s.mean, base.mean, 1e-9);
        EXPECT_NEAR(s.interval->lower, base.interval->lower, 1e-9);
    }
}

TEST(Sus, CsvRoundTrip) {
    const auto a = sus("p1", {1, 2, 3, 4, 5, 1, 2, 3, 4, 5});
    const auto b = sus("p2", std::vector<int>(10, 4));
    const std::string text = sus_csv_header() + sus_csv_line(a) + sus_csv_line(b);
    const auto parsed = parse_sus_csv(text);
    ASSERT_EQ(parsed.size(), 2u);
    EXPECT_EQ(parsed[0].items, a.items);
    EXPECT_EQ(parsed[1].participant_id, "p2");
    EXPECT_THROW(parse_sus_csv("p1,1,2,x,4,5,1,2,3,4,5\n"), Error);
    EXPECT_THROW(parse_sus_csv("p1,1,2,3\n"), Error);
}
