#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mammo_eval/core.hpp"
#include "mammo_eval/localization.hpp"
#include "mammo_eval/metrics.hpp"

namespace mammo {

enum class ConcordanceCategory { Agree, Edit, Add, Reject };

inline constexpr std::array<ConcordanceCategory, 4> kAllConcordance = {
    ConcordanceCategory::Agree, ConcordanceCategory::Edit, ConcordanceCategory::Add, ConcordanceCategory::Reject};

constexpr bool is_concordant(ConcordanceCategory c) { return c != ConcordanceCategory::Reject; }

inline std::string_view to_string(ConcordanceCategory c) {
    switch (c) {
    case ConcordanceCategory::Agree: return "Agree";
    case ConcordanceCategory::Edit: return "Edit";
    case ConcordanceCategory::Add: return "Add";
    case ConcordanceCategory::Reject: return "Reject";
    }
    return "?";
}

inline ConcordanceCategory concordance_from_string(std::string_view s) {
    for (auto c : kAllConcordance)
        if (to_string(c) == s) return c;
    fail(ErrorCode::ValidationFailed, "unknown concordance category '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Concordance
// ---------------------------------------------------------------------------

/// Report findings vs AI findings (suspicious categories only).
///   both negative            -> Agree
///   exactly one negative     -> Reject
///   identical                -> Agree
///   AI a strict subset       -> Add   (report added conditions)
///   other partial overlap    -> Edit
///   disjoint                 -> Reject
inline ConcordanceCategory classify_concordance(CategorySet report, CategorySet ai) {
    if (report.empty() && ai.empty()) return ConcordanceCategory::Agree;
    if (report.empty() || ai.empty()) return ConcordanceCategory::Reject;
    if (report == ai) return ConcordanceCategory::Agree;
    if (ai.is_strict_subset_of(report)) return ConcordanceCategory::Add;
    if (!report.intersect(ai).empty()) return ConcordanceCategory::Edit;
    return ConcordanceCategory::Reject;
}

/// Category from counts. Strictest condition first: Agree needs every lesion
/// hit and no false-positive blob; Edit allows false positives; Add is a
/// partial hit; nothing hit is Reject.
constexpr ConcordanceCategory localization_category(std::size_t lesions, std::size_t hits, std::size_t blobs,
                                                    std::size_t fp_blobs) {
    if (lesions == 0) return blobs == 0 ? ConcordanceCategory::Agree : ConcordanceCategory::Reject;
    if (hits == lesions) return fp_blobs == 0 ? ConcordanceCategory::Agree : ConcordanceCategory::Edit;
    if (hits > 0) return ConcordanceCategory::Add;
    return ConcordanceCategory::Reject;
}

/// Category-agnostic localization concordance. A lesion counts as hit when
/// its IoGT is strictly greater than `overlap`; false positives follow
/// match_lesions.
inline ConcordanceCategory localize_concordance(const std::vector<GroundTruthLesion>& gt,
                                                const std::vector<HeatmapBlob>& blobs, double overlap = 0.5,
                                                double fp_threshold = 0.25) {
    MatchConfig cfg;
    cfg.hit_threshold = overlap;
    cfg.fp_threshold = fp_threshold;
    const auto res = match_lesions("", gt, blobs, cfg);
    std::size_t hits = 0;
    for (const auto& l : res.lesions) hits += l.iogt > overlap ? 1 : 0;
    return localization_category(res.lesions.size(), hits, res.blobs.size(), res.false_positives());
}

struct ConcordanceSummary {
    std::map<ConcordanceCategory, std::int64_t> counts;
    std::int64_t total = 0;
    std::int64_t concordant = 0;
    BinomialCI rate;
    friend bool operator==(const ConcordanceSummary&, const ConcordanceSummary&) = default;
};

inline ConcordanceSummary concordance_rate(const std::vector<ConcordanceCategory>& categories, double level = 0.95) {
    if (categories.empty()) fail(ErrorCode::ValidationFailed, "concordance rate of an empty list");
    ConcordanceSummary s;
    for (auto c : kAllConcordance) s.counts[c] = 0;
    for (auto c : categories) {
        ++s.counts[c];
        if (is_concordant(c)) ++s.concordant;
    }
    s.total = static_cast<std::int64_t>(categories.size());
    s.rate = clopper_pearson(s.concordant, s.total, level);
    return s;
}

/// Automatic concordance of one case in both dimensions.
struct ConcordanceRecord {
    std::string case_id;
    ConcordanceCategory classification = ConcordanceCategory::Agree;
    ConcordanceCategory localization = ConcordanceCategory::Agree;

    bool auto_accept() const {
        return classification == ConcordanceCategory::Agree && localization == ConcordanceCategory::Agree;
    }
    friend bool operator==(const ConcordanceRecord&, const ConcordanceRecord&) = default;
};

/// AI-positive categories are those with at least one suspicious blob, i.e.
/// what a reader sees on the heatmap. Lesions must be in the canonical frame.
inline ConcordanceRecord case_concordance(const Case& c, const CaseAssessment& a, double overlap = 0.5,
                                          double fp_threshold = 0.25) {
    ConcordanceRecord r;
    r.case_id = c.case_id;
    CategorySet ai;
    std::vector<HeatmapBlob> blobs;
    for (const auto& b : a.blobs)
        if (b.suspicious) {
            ai.insert(b.category);
            blobs.push_back(b);
        }
    std::vector<GroundTruthLesion> gt;
    for (const auto& l : c.gt_lesions)
        if (l.suspicious) gt.push_back(l);
    r.classification = classify_concordance(c.suspicious_findings(), ai);
    r.localization = localize_concordance(gt, blobs, overlap, fp_threshold);
    return r;
}

inline nlohmann::json concordance_record_to_json(const ConcordanceRecord& r) {
    return {{"case_id", r.case_id},
            {"classification", to_string(r.classification)},
            {"localization", to_string(r.localization)}};
}

inline ConcordanceRecord concordance_record_from_json(const nlohmann::json& j) {
    try {
        return {j.at("case_id").get<std::string>(),
                concordance_from_string(j.at("classification").get<std::string>()),
                concordance_from_string(j.at("localization").get<std::string>())};
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed concordance record: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Acceptance (usefulness grades)
// ---------------------------------------------------------------------------

struct ReviewRecord {
    std::string case_id;
    std::string reviewer_id;
    int grade = 0;  ///< 1 not useful, 2 neutral, 3 useful, 4 extremely useful
    ConcordanceCategory classification = ConcordanceCategory::Agree;
    ConcordanceCategory localization = ConcordanceCategory::Agree;
    std::string timestamp;

    bool accepted() const { return grade >= 2; }
    friend bool operator==(const ReviewRecord&, const ReviewRecord&) = default;
};

inline void validate_review(const ReviewRecord& r) {
    if (r.case_id.empty()) fail(ErrorCode::ValidationFailed, "review lacks case_id");
    if (r.reviewer_id.empty()) fail(ErrorCode::ValidationFailed, "review lacks reviewer_id");
    if (r.grade < 1 || r.grade > 4)
        fail(ErrorCode::ValidationFailed, "grade must be in 1..4, got " + std::to_string(r.grade));
}

inline nlohmann::json review_to_json(const ReviewRecord& r) {
    return {{"case_id", r.case_id},
            {"reviewer_id", r.reviewer_id},
            {"grade", r.grade},
            {"classification", to_string(r.classification)},
            {"localization", to_string(r.localization)},
            {"timestamp", r.timestamp}};
}

inline ReviewRecord review_from_json(const nlohmann::json& j) {
    ReviewRecord r;
    try {
        r.case_id = j.at("case_id").get<std::string>();
        r.reviewer_id = j.at("reviewer_id").get<std::string>();
        r.grade = j.at("grade").get<int>();
        r.classification = concordance_from_string(j.at("classification").get<std::string>());
        r.localization = concordance_from_string(j.at("localization").get<std::string>());
        r.timestamp = j.value("timestamp", std::string());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ValidationFailed, std::string("malformed review record: ") + e.what());
    }
    validate_review(r);
    return r;
}

/// One record per non-empty line.
inline std::vector<ReviewRecord> parse_review_log(const std::string& text) {
    std::vector<ReviewRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(review_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, "review log line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// Later records for the same (reviewer, case) replace earlier ones; output
/// keeps first-seen order.
inline std::vector<ReviewRecord> latest_reviews(const std::vector<ReviewRecord>& records) {
    std::map<std::pair<std::string, std::string>, std::size_t> slot;
    std::vector<ReviewRecord> out;
    for (const auto& r : records) {
        auto key = std::make_pair(r.reviewer_id, r.case_id);
        auto it = slot.find(key);
        if (it == slot.end()) {
            slot.emplace(key, out.size());
            out.push_back(r);
        } else {
            out[it->second] = r;
        }
    }
    return out;
}

struct ReviewerAcceptance {
    std::string reviewer_id;
    std::int64_t reviewed = 0;
    std::int64_t accepted = 0;  ///< includes auto-accepted cases
    std::map<int, std::int64_t> grade_counts;
    double rate = 0;
    friend bool operator==(const ReviewerAcceptance&, const ReviewerAcceptance&) = default;
};

struct AcceptanceSummary {
    std::vector<ReviewerAcceptance> reviewers;
    std::int64_t auto_accepted = 0;
    std::int64_t total_cases = 0;
    double mean_accepted = 0;
    std::map<int, double> mean_grade_counts;
    double mean_rate = 0;
    BinomialCI interval;  ///< on round-half-up(mean_accepted) / total_cases
    friend bool operator==(const AcceptanceSummary&, const AcceptanceSummary&) = default;
};

/// Per-reviewer acceptance = (auto-accepted + reviewed cases graded >= 2) /
/// total cases; the study score is the mean across reviewers. A study still
/// in progress can pass `require_same_cases = false`.
inline AcceptanceSummary acceptance_rate(const std::vector<ReviewRecord>& records,
                                         const std::set<std::string>& auto_accept_ids, std::int64_t total_cases,
                                         double level = 0.95, bool require_same_cases = true) {
    if (total_cases < 1) fail(ErrorCode::InvalidCounts, "total_cases must be positive");
    const auto reviews = latest_reviews(records);
    std::map<std::string, std::set<std::string>> cases_by_reviewer;
    std::map<std::string, ReviewerAcceptance> per;
    for (const auto& r : reviews) {
        validate_review(r);
        if (auto_accept_ids.contains(r.case_id))
            fail(ErrorCode::OverlapWithAutoAccept, "case " + r.case_id + " is auto-accepted but was reviewed");
        cases_by_reviewer[r.reviewer_id].insert(r.case_id);
        auto& pr = per[r.reviewer_id];
        pr.reviewer_id = r.reviewer_id;
        ++pr.reviewed;
        ++pr.grade_counts[r.grade];
        if (r.accepted()) ++pr.accepted;
    }
    if (!cases_by_reviewer.empty()) {
        const auto& first = cases_by_reviewer.begin()->second;
        for (const auto& [rid, cs] : cases_by_reviewer) {
            if (require_same_cases && cs != first)
                fail(ErrorCode::InconsistentCaseSets, "reviewer " + rid + " reviewed a different case set");
            if (static_cast<std::int64_t>(cs.size() + auto_accept_ids.size()) > total_cases)
                fail(ErrorCode::InvalidCounts, "reviewed plus auto-accepted cases exceed total_cases");
        }
    } else if (static_cast<std::int64_t>(auto_accept_ids.size()) > total_cases) {
        fail(ErrorCode::InvalidCounts, "auto-accepted cases exceed total_cases");
    }

    AcceptanceSummary s;
    s.auto_accepted = static_cast<std::int64_t>(auto_accept_ids.size());
    s.total_cases = total_cases;
    for (int g = 1; g <= 4; ++g) s.mean_grade_counts[g] = 0;
    for (auto& [rid, pr] : per) {
        pr.accepted += s.auto_accepted;
        pr.rate = static_cast<double>(pr.accepted) / static_cast<double>(total_cases);
        s.reviewers.push_back(pr);
    }
    if (s.reviewers.empty()) {
        s.mean_accepted = static_cast<double>(s.auto_accepted);
    } else {
        double sum = 0;
        for (const auto& pr : s.reviewers) {
            sum += static_cast<double>(pr.accepted);
            for (const auto& [g, c] : pr.grade_counts) s.mean_grade_counts[g] += static_cast<double>(c);
        }
        const auto k = static_cast<double>(s.reviewers.size());
        s.mean_accepted = sum / k;
        for (auto& [g, c] : s.mean_grade_counts) c /= k;
    }
    s.mean_rate = s.mean_accepted / static_cast<double>(total_cases);
    const auto rounded = static_cast<std::int64_t>(std::floor(s.mean_accepted + 0.5));
    s.interval = clopper_pearson(rounded, total_cases, level);
    s.interval.estimate = s.mean_rate;
    return s;
}

// ---------------------------------------------------------------------------
// System Usability Scale
// ---------------------------------------------------------------------------

struct SusResponse {
    std::string participant_id;
    std::vector<int> items;
    friend bool operator==(const SusResponse&, const SusResponse&) = default;
};

inline void validate_sus(const SusResponse& r) {
    if (r.items.size() != 10)
        fail(ErrorCode::BadItemCount, "SUS response " + r.participant_id + " has " + std::to_string(r.items.size()) +
                                          " items, expected 10");
    for (int v : r.items)
        if (v < 1 || v > 5) fail(ErrorCode::BadItemValue, "SUS item value " + std::to_string(v) + " outside 1..5");
}

/// Standard scoring: odd items contribute (v - 1), even items (5 - v); the
/// sum is scaled by 2.5 onto 0..100.
inline double sus_participant_score(const SusResponse& r) {
    validate_sus(r);
    int sum = 0;
    for (std::size_t i = 0; i < 10; ++i) sum += (i % 2 == 0) ? r.items[i] - 1 : 5 - r.items[i];
    return sum * 2.5;
}

struct SusSummary {
    std::vector<std::pair<std::string, double>> scores;
    double mean = 0;
    std::optional<Interval> interval;  ///< Student-t, needs >= 2 participants
    friend bool operator==(const SusSummary&, const SusSummary&) = default;
};

inline SusSummary sus_score(const std::vector<SusResponse>& responses, double level = 0.95) {
    SusSummary s;
    if (responses.empty()) fail(ErrorCode::ValidationFailed, "no SUS responses");
    double sum = 0;
    for (const auto& r : responses) {
        const double v = sus_participant_score(r);
        s.scores.emplace_back(r.participant_id, v);
        sum += v;
    }
    const auto n = static_cast<double>(responses.size());
    s.mean = sum / n;
    if (responses.size() >= 2) {
        double ss = 0;
        for (const auto& [id, v] : s.scores) ss += (v - s.mean) * (v - s.mean);
        const double sd = std::sqrt(ss / (n - 1));
        const double t = stats::student_t_quantile(1 - (1 - level) / 2, n - 1);
        const double half = t * sd / std::sqrt(n);
        s.interval = Interval{s.mean, s.mean - half, s.mean + half, level};
    }
    return s;
}

/// CSV with columns participant_id,q1..q10; a header row is optional.
inline std::vector<SusResponse> parse_sus_csv(const std::string& text) {
    std::vector<SusResponse> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (lineno == 1 && cells.size() > 1 && (cells[1] == "q1" || cells[1] == "Q1")) continue;
        if (cells.empty()) continue;
        SusResponse r;
        r.participant_id = cells[0];
        for (std::size_t i = 1; i < cells.size(); ++i) {
            try {
                std::size_t used = 0;
                r.items.push_back(std::stoi(cells[i], &used));
            } catch (const std::exception&) {
                fail(ErrorCode::BadItemValue, "SUS line " + std::to_string(lineno) + ": non-integer item");
            }
        }
        validate_sus(r);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string sus_csv_header() { return "participant_id,q1,q2,q3,q4,q5,q6,q7,q8,q9,q10\n"; }

inline std::string sus_csv_line(const SusResponse& r) {
    std::string line = r.participant_id;
    for (int v : r.items) line += "," + std::to_string(v);
    return line + "\n";
}

}  // namespace mammo
