#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mammo_eval/config.hpp"
#include "mammo_eval/core.hpp"
#include "mammo_eval/fs_util.hpp"
#include "mammo_eval/inference.hpp"
#include "mammo_eval/localization.hpp"
#include "mammo_eval/metrics.hpp"
#include "mammo_eval/study.hpp"

namespace mammo {

inline constexpr std::array<const char*, 4> kConditions = {"Cancer", "Calcification", "Mass", "Other"};

struct DetectionRow {
    std::string condition;
    std::int64_t positives = 0;
    std::int64_t negatives = 0;
    std::optional<Interval> auroc;      ///< absent when only one class is present
    std::optional<double> threshold;    ///< may be +inf (nothing called positive)
    std::optional<DetectionRates> rates;
    std::vector<RocPoint> roc;
    friend bool operator==(const DetectionRow&, const DetectionRow&) = default;
};

struct LocalizationRow {
    std::string condition;
    LocalizationSummary summary;
    OverlapSummary overlap;
    friend bool operator==(const LocalizationRow&, const LocalizationRow&) = default;
};

struct ConcordanceRow {
    std::string dimension;  ///< "classification" or "localization"
    ConcordanceSummary summary;
    friend bool operator==(const ConcordanceRow&, const ConcordanceRow&) = default;
};

struct EvalReport {
    std::string dataset_id;
    std::string tool_version = kToolVersion;
    nlohmann::json config_snapshot;
    std::vector<DetectionRow> detection_rows;
    std::vector<LocalizationRow> localization_rows;
    std::optional<std::vector<ConcordanceRow>> concordance_rows;
    std::optional<AcceptanceSummary> acceptance;
    std::optional<SusSummary> sus;
    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct ReportInputs {
    std::string dataset_id;
    std::vector<Case> cases;  ///< lesions already in the canonical frame
    std::map<std::string, CaseAssessment> assessments;
    std::vector<ConcordanceRecord> concordance;
    std::vector<ReviewRecord> reviews;
    std::vector<SusResponse> sus;
};

namespace detail {

inline bool category_positive(const Case& c, FinalCategory cat) {
    for (const auto& f : c.report_findings)
        if (f.suspicious && f.category == cat) return true;
    for (const auto& l : c.gt_lesions)
        if (l.suspicious && l.category == cat) return true;
    return false;
}

inline DetectionRow detection_row(const std::string& condition, const std::vector<double>& scores,
                                  const std::vector<bool>& labels, const RunConfig& cfg) {
    DetectionRow row;
    row.condition = condition;
    row.positives = std::count(labels.begin(), labels.end(), true);
    row.negatives = static_cast<std::int64_t>(labels.size()) - row.positives;
    const bool two_class = row.positives > 0 && row.negatives > 0;
    if (two_class) {
        const auto curve = roc_curve(scores, labels);
        row.roc = curve.points;
        row.auroc = bootstrap_auroc_ci(scores, labels, cfg.bootstrap_reps, cfg.seed, cfg.level);
        row.threshold = cfg.operating_point ? *cfg.operating_point : optimal_operating_point(curve).threshold;
    } else if (cfg.operating_point) {
        row.threshold = *cfg.operating_point;
    }
    if (row.threshold) row.rates = confusion_and_rates(scores, labels, *row.threshold, cfg.level);
    return row;
}

}  // namespace detail

/// Pure function of (inputs, config): detection rows per condition, lesion
/// localization per condition, and the optional reader-study sections.
inline EvalReport build_report(const ReportInputs& in, const RunConfig& cfg) {
    validate_config(cfg);
    EvalReport rep;
    rep.dataset_id = in.dataset_id;
    rep.config_snapshot = config_snapshot(cfg);

    std::vector<const Case*> cases;
    for (const auto& c : in.cases) cases.push_back(&c);
    std::sort(cases.begin(), cases.end(), [](auto* a, auto* b) { return a->case_id < b->case_id; });
    std::vector<const CaseAssessment*> assess;
    for (auto* c : cases) {
        auto it = in.assessments.find(c->case_id);
        if (it == in.assessments.end()) fail(ErrorCode::MissingAssessment, "no assessment for case " + c->case_id);
        assess.push_back(&it->second);
    }

    {
        std::vector<double> s;
        std::vector<bool> l;
        for (std::size_t i = 0; i < cases.size(); ++i) {
            s.push_back(assess[i]->cancer_score);
            l.push_back(cases[i]->truth_label == TruthLabel::Malignant);
        }
        rep.detection_rows.push_back(detail::detection_row("Cancer", s, l, cfg));
    }
    for (auto cat : kAllCategories) {
        std::vector<double> s;
        std::vector<bool> l;
        for (std::size_t i = 0; i < cases.size(); ++i) {
            s.push_back(assess[i]->category_score(cat));
            l.push_back(detail::category_positive(*cases[i], cat));
        }
        rep.detection_rows.push_back(detail::detection_row(std::string(to_string(cat)), s, l, cfg));
    }

    MatchConfig mc{cfg.hit_threshold, cfg.fp_threshold, 4};
    for (std::size_t k = 0; k < kConditions.size(); ++k) {
        std::optional<FinalCategory> cat;
        if (k > 0) cat = kAllCategories[k - 1];
        std::vector<LocalizationCaseResult> results;
        for (std::size_t i = 0; i < cases.size(); ++i)
            results.push_back(match_suspicious(cases[i]->case_id, cases[i]->gt_lesions, assess[i]->blobs, cat, mc));
        LocalizationRow row;
        row.condition = kConditions[k];
        if (!results.empty()) {
            row.summary = llf_nlf(results, cfg.bootstrap_reps, cfg.seed, cfg.level);
            row.overlap = mean_overlap(results);
        }
        rep.localization_rows.push_back(row);
    }

    std::set<std::string> known;
    for (auto* c : cases) known.insert(c->case_id);

    if (!in.concordance.empty()) {
        std::vector<ConcordanceCategory> cls, loc;
        for (const auto& r : in.concordance) {
            if (!known.contains(r.case_id))
                fail(ErrorCode::UnknownCase, "concordance record for unknown case " + r.case_id);
            cls.push_back(r.classification);
            loc.push_back(r.localization);
        }
        rep.concordance_rows = std::vector<ConcordanceRow>{{"classification", concordance_rate(cls, cfg.level)},
                                                           {"localization", concordance_rate(loc, cfg.level)}};
    }

    if (!in.reviews.empty() && !cases.empty()) {
        std::set<std::string> auto_ids;
        for (const auto& r : in.concordance)
            if (r.auto_accept()) auto_ids.insert(r.case_id);
        for (const auto& r : in.reviews)
            if (!known.contains(r.case_id)) fail(ErrorCode::UnknownCase, "review for unknown case " + r.case_id);
        rep.acceptance =
            acceptance_rate(in.reviews, auto_ids, static_cast<std::int64_t>(cases.size()), cfg.level);
    }

    if (!in.sus.empty()) rep.sus = sus_score(in.sus, 0.95);
    return rep;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline json num(double v) {
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

inline double num_from(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        fail(ErrorCode::ParseError, "bad number '" + s + "'");
    }
    return j.get<double>();
}

template <class T, class F>
json opt(const std::optional<T>& v, F&& f) {
    return v ? f(*v) : json();
}

template <class T, class F>
std::optional<T> opt_from(const json& j, F&& f) {
    if (j.is_null()) return std::nullopt;
    return f(j);
}

inline json interval_json(const Interval& i) {
    return {{"estimate", i.estimate}, {"lower", i.lower}, {"upper", i.upper}, {"level", i.level}};
}

inline Interval interval_from(const json& j) {
    return {j.at("estimate").get<double>(), j.at("lower").get<double>(), j.at("upper").get<double>(),
            j.at("level").get<double>()};
}

inline json binomial_json(const BinomialCI& b) {
    auto j = interval_json(b);
    j["successes"] = b.successes;
    j["trials"] = b.trials;
    return j;
}

inline BinomialCI binomial_from(const json& j) {
    BinomialCI b;
    static_cast<Interval&>(b) = interval_from(j);
    b.successes = j.at("successes").get<std::int64_t>();
    b.trials = j.at("trials").get<std::int64_t>();
    return b;
}

inline json rates_json(const DetectionRates& r) {
    return {{"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
            {"sensitivity", opt(r.sensitivity, binomial_json)},
            {"specificity", opt(r.specificity, binomial_json)},
            {"ppv", opt(r.ppv, binomial_json)},
            {"npv", opt(r.npv, binomial_json)}};
}

inline DetectionRates rates_from(const json& j) {
    DetectionRates r;
    const auto& c = j.at("counts");
    r.counts = {c.at("tp").get<std::int64_t>(), c.at("fp").get<std::int64_t>(), c.at("tn").get<std::int64_t>(),
                c.at("fn").get<std::int64_t>()};
    r.sensitivity = opt_from<BinomialCI>(j.at("sensitivity"), binomial_from);
    r.specificity = opt_from<BinomialCI>(j.at("specificity"), binomial_from);
    r.ppv = opt_from<BinomialCI>(j.at("ppv"), binomial_from);
    r.npv = opt_from<BinomialCI>(j.at("npv"), binomial_from);
    return r;
}

inline json concordance_summary_json(const ConcordanceSummary& s) {
    json counts = json::object();
    for (const auto& [c, n] : s.counts) counts[std::string(to_string(c))] = n;
    return {{"counts", counts}, {"total", s.total}, {"concordant", s.concordant}, {"rate", binomial_json(s.rate)}};
}

inline ConcordanceSummary concordance_summary_from(const json& j) {
    ConcordanceSummary s;
    for (const auto& [k, v] : j.at("counts").items()) s.counts[concordance_from_string(k)] = v.get<std::int64_t>();
    s.total = j.at("total").get<std::int64_t>();
    s.concordant = j.at("concordant").get<std::int64_t>();
    s.rate = binomial_from(j.at("rate"));
    return s;
}

inline json grade_counts_json(const std::map<int, std::int64_t>& m) {
    json j = json::object();
    for (const auto& [g, n] : m) j[std::to_string(g)] = n;
    return j;
}

inline json acceptance_json(const AcceptanceSummary& a) {
    json reviewers = json::array();
    for (const auto& r : a.reviewers)
        reviewers.push_back({{"reviewer_id", r.reviewer_id},
                             {"reviewed", r.reviewed},
                             {"accepted", r.accepted},
                             {"grade_counts", grade_counts_json(r.grade_counts)},
                             {"rate", r.rate}});
    json means = json::object();
    for (const auto& [g, v] : a.mean_grade_counts) means[std::to_string(g)] = v;
    return {{"reviewers", reviewers},     {"auto_accepted", a.auto_accepted}, {"total_cases", a.total_cases},
            {"mean_accepted", a.mean_accepted}, {"mean_grade_counts", means},     {"mean_rate", a.mean_rate},
            {"interval", binomial_json(a.interval)}};
}

inline AcceptanceSummary acceptance_from(const json& j) {
    AcceptanceSummary a;
    for (const auto& r : j.at("reviewers")) {
        ReviewerAcceptance ra;
        ra.reviewer_id = r.at("reviewer_id").get<std::string>();
        ra.reviewed = r.at("reviewed").get<std::int64_t>();
        ra.accepted = r.at("accepted").get<std::int64_t>();
        for (const auto& [g, n] : r.at("grade_counts").items()) ra.grade_counts[std::stoi(g)] = n.get<std::int64_t>();
        ra.rate = r.at("rate").get<double>();
        a.reviewers.push_back(ra);
    }
    a.auto_accepted = j.at("auto_accepted").get<std::int64_t>();
    a.total_cases = j.at("total_cases").get<std::int64_t>();
    a.mean_accepted = j.at("mean_accepted").get<double>();
    for (const auto& [g, v] : j.at("mean_grade_counts").items()) a.mean_grade_counts[std::stoi(g)] = v.get<double>();
    a.mean_rate = j.at("mean_rate").get<double>();
    a.interval = binomial_from(j.at("interval"));
    return a;
}

inline json sus_json(const SusSummary& s) {
    json scores = json::array();
    for (const auto& [id, v] : s.scores) scores.push_back({{"participant_id", id}, {"score", v}});
    return {{"scores", scores}, {"mean", s.mean}, {"interval", opt(s.interval, interval_json)}};
}

inline SusSummary sus_from(const json& j) {
    SusSummary s;
    for (const auto& e : j.at("scores"))
        s.scores.emplace_back(e.at("participant_id").get<std::string>(), e.at("score").get<double>());
    s.mean = j.at("mean").get<double>();
    s.interval = opt_from<Interval>(j.at("interval"), interval_from);
    return s;
}

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
    using namespace detail;
    json det = json::array();
    for (const auto& d : r.detection_rows) {
        json roc = json::array();
        for (const auto& p : d.roc) roc.push_back({num(p.threshold), p.fpr, p.tpr});
        det.push_back({{"condition", d.condition},
                       {"positives", d.positives},
                       {"negatives", d.negatives},
                       {"auroc", opt(d.auroc, interval_json)},
                       {"threshold", d.threshold ? num(*d.threshold) : json()},
                       {"rates", opt(d.rates, rates_json)},
                       {"roc", roc}});
    }
    json loc = json::array();
    for (const auto& l : r.localization_rows) {
        const auto& s = l.summary;
        loc.push_back({{"condition", l.condition},
                       {"lesions", s.lesions},
                       {"hits", s.hits},
                       {"false_positives", s.false_positives},
                       {"images", s.images},
                       {"cases", s.cases},
                       {"llf", opt(s.llf, binomial_json)},
                       {"nlf", interval_json(s.nlf)},
                       {"nlf_per_case", s.nlf_per_case},
                       {"mean_iogt", opt(l.overlap.mean_iogt, [](double v) { return json(v); })},
                       {"mean_iohm", opt(l.overlap.mean_iohm, [](double v) { return json(v); })}});
    }
    json conc;
    if (r.concordance_rows) {
        conc = json::array();
        for (const auto& c : *r.concordance_rows)
            conc.push_back({{"dimension", c.dimension}, {"summary", concordance_summary_json(c.summary)}});
    }
    return {{"dataset_id", r.dataset_id},
            {"tool_version", r.tool_version},
            {"config", r.config_snapshot},
            {"detection", det},
            {"localization", loc},
            {"concordance", conc},
            {"acceptance", opt(r.acceptance, acceptance_json)},
            {"sus", opt(r.sus, sus_json)}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    using namespace detail;
    EvalReport r;
    try {
        r.dataset_id = j.at("dataset_id").get<std::string>();
        r.tool_version = j.at("tool_version").get<std::string>();
        r.config_snapshot = j.at("config");
        for (const auto& d : j.at("detection")) {
            DetectionRow row;
            row.condition = d.at("condition").get<std::string>();
            row.positives = d.at("positives").get<std::int64_t>();
            row.negatives = d.at("negatives").get<std::int64_t>();
            row.auroc = opt_from<Interval>(d.at("auroc"), interval_from);
            row.threshold = opt_from<double>(d.at("threshold"), num_from);
            row.rates = opt_from<DetectionRates>(d.at("rates"), rates_from);
            for (const auto& p : d.at("roc"))
                row.roc.push_back({p.at(1).get<double>(), p.at(2).get<double>(), num_from(p.at(0))});
            r.detection_rows.push_back(row);
        }
        for (const auto& l : j.at("localization")) {
            LocalizationRow row;
            row.condition = l.at("condition").get<std::string>();
            auto& s = row.summary;
            s.lesions = l.at("lesions").get<std::int64_t>();
            s.hits = l.at("hits").get<std::int64_t>();
            s.false_positives = l.at("false_positives").get<std::int64_t>();
            s.images = l.at("images").get<std::int64_t>();
            s.cases = l.at("cases").get<std::int64_t>();
            s.llf = opt_from<BinomialCI>(l.at("llf"), binomial_from);
            s.nlf = interval_from(l.at("nlf"));
            s.nlf_per_case = l.at("nlf_per_case").get<double>();
            auto as_double = [](const json& v) { return v.get<double>(); };
            row.overlap.mean_iogt = opt_from<double>(l.at("mean_iogt"), as_double);
            row.overlap.mean_iohm = opt_from<double>(l.at("mean_iohm"), as_double);
            r.localization_rows.push_back(row);
        }
        if (!j.at("concordance").is_null()) {
            r.concordance_rows.emplace();
            for (const auto& c : j.at("concordance"))
                r.concordance_rows->push_back(
                    {c.at("dimension").get<std::string>(), concordance_summary_from(c.at("summary"))});
        }
        r.acceptance = opt_from<AcceptanceSummary>(j.at("acceptance"), acceptance_from);
        r.sus = opt_from<SusSummary>(j.at("sus"), sus_from);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("malformed report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// CSV / markdown
// ---------------------------------------------------------------------------

enum class ReportFormat { Csv, Markdown, Json };

inline ReportFormat report_format_from_string(std::string_view s) {
    if (s == "csv") return ReportFormat::Csv;
    if (s == "markdown" || s == "md") return ReportFormat::Markdown;
    if (s == "json") return ReportFormat::Json;
    fail(ErrorCode::Usage, "unknown report format '" + std::string(s) + "'");
}

namespace detail {

inline std::string fixed(double v, int decimals) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    std::string s = buf;
    if (s == "-0.000" || s == "-0.000000") s.erase(0, 1);
    return s;
}

inline std::string c6(double v) { return fixed(v, 6); }
inline std::string c6(const std::optional<double>& v) { return v ? c6(*v) : ""; }

inline std::string ci_cells(const std::optional<BinomialCI>& b) {
    return b ? c6(b->estimate) + "," + c6(b->lower) + "," + c6(b->upper) : ",,";
}
inline std::string ci_cells(const std::optional<Interval>& b) {
    return b ? c6(b->estimate) + "," + c6(b->lower) + "," + c6(b->upper) : ",,";
}

/// "0.835 (0.808 - 0.859)"
inline std::string md_ci(const Interval& i) {
    return fixed(i.estimate, 3) + " (" + fixed(i.lower, 3) + " - " + fixed(i.upper, 3) + ")";
}
template <class T>
std::string md_ci(const std::optional<T>& i) {
    return i ? md_ci(static_cast<const Interval&>(*i)) : "-";
}

inline std::string csv_preamble(const EvalReport& r) {
    return "# mammo-eval " + r.tool_version + " dataset=" + r.dataset_id + " config=" + r.config_snapshot.dump() + "\n";
}

}  // namespace detail

/// Column order is fixed; every CSV starts with one `#` line carrying the
/// tool version and config snapshot.
inline std::map<std::string, std::string> render_csv(const EvalReport& r) {
    using namespace detail;
    std::map<std::string, std::string> files;
    const auto pre = csv_preamble(r);

    std::string det = pre +
                      "condition,positives,negatives,auroc,auroc_lower,auroc_upper,threshold,tp,fp,tn,fn,"
                      "sensitivity,sensitivity_lower,sensitivity_upper,specificity,specificity_lower,"
                      "specificity_upper,ppv,ppv_lower,ppv_upper,npv,npv_lower,npv_upper\n";
    std::string roc = pre + "condition,threshold,fpr,tpr\n";
    for (const auto& d : r.detection_rows) {
        det += d.condition + "," + std::to_string(d.positives) + "," + std::to_string(d.negatives) + "," +
               ci_cells(d.auroc) + "," + (d.threshold ? c6(*d.threshold) : "") + ",";
        if (d.rates) {
            const auto& c = d.rates->counts;
            det += std::to_string(c.tp) + "," + std::to_string(c.fp) + "," + std::to_string(c.tn) + "," +
                   std::to_string(c.fn) + ",";
            det += ci_cells(d.rates->sensitivity) + "," + ci_cells(d.rates->specificity) + "," +
                   ci_cells(d.rates->ppv) + "," + ci_cells(d.rates->npv) + "\n";
        } else {
            det += ",,,,,,,,,,,,,,,\n";
        }
        for (const auto& p : d.roc) roc += d.condition + "," + c6(p.threshold) + "," + c6(p.fpr) + "," + c6(p.tpr) + "\n";
    }
    files["detection.csv"] = det;
    files["roc.csv"] = roc;

    std::string loc = pre +
                      "condition,lesions,hits,false_positives,images,cases,llf,llf_lower,llf_upper,nlf,nlf_lower,"
                      "nlf_upper,nlf_per_case,mean_iogt,mean_iohm\n";
    for (const auto& l : r.localization_rows) {
        const auto& s = l.summary;
        loc += l.condition + "," + std::to_string(s.lesions) + "," + std::to_string(s.hits) + "," +
               std::to_string(s.false_positives) + "," + std::to_string(s.images) + "," + std::to_string(s.cases) +
               "," + ci_cells(s.llf) + "," + ci_cells(std::optional<Interval>(s.nlf)) + "," + c6(s.nlf_per_case) +
               "," + c6(l.overlap.mean_iogt) + "," + c6(l.overlap.mean_iohm) + "\n";
    }
    files["localization.csv"] = loc;

    std::string conc = pre + "dimension,agree,edit,add,reject,total,concordant,rate,rate_lower,rate_upper\n";
    if (r.concordance_rows)
        for (const auto& c : *r.concordance_rows) {
            const auto& s = c.summary;
            auto count = [&](ConcordanceCategory k) {
                auto it = s.counts.find(k);
                return std::to_string(it == s.counts.end() ? 0 : it->second);
            };
            conc += c.dimension + "," + count(ConcordanceCategory::Agree) + "," + count(ConcordanceCategory::Edit) +
                    "," + count(ConcordanceCategory::Add) + "," + count(ConcordanceCategory::Reject) + "," +
                    std::to_string(s.total) + "," + std::to_string(s.concordant) + "," +
                    ci_cells(std::optional<BinomialCI>(s.rate)) + "\n";
        }
    files["concordance.csv"] = conc;

    std::string acc = pre + "reviewer,reviewed,grade_1,grade_2,grade_3,grade_4,accepted,total,rate,rate_lower,rate_upper\n";
    if (r.acceptance) {
        const auto& a = *r.acceptance;
        for (const auto& rv : a.reviewers) {
            acc += rv.reviewer_id + "," + std::to_string(rv.reviewed);
            for (int g = 1; g <= 4; ++g) {
                auto it = rv.grade_counts.find(g);
                acc += "," + std::to_string(it == rv.grade_counts.end() ? 0 : it->second);
            }
            acc += "," + std::to_string(rv.accepted) + "," + std::to_string(a.total_cases) + "," + c6(rv.rate) + ",,\n";
        }
        acc += "mean,";
        double reviewed = 0;
        for (const auto& [g, v] : a.mean_grade_counts) reviewed += v;
        acc += c6(reviewed);
        for (int g = 1; g <= 4; ++g) {
            auto it = a.mean_grade_counts.find(g);
            acc += "," + c6(it == a.mean_grade_counts.end() ? 0.0 : it->second);
        }
        acc += "," + c6(a.mean_accepted) + "," + std::to_string(a.total_cases) + "," + c6(a.mean_rate) + "," +
               c6(a.interval.lower) + "," + c6(a.interval.upper) + "\n";
    }
    files["acceptance.csv"] = acc;

    std::string sus = pre + "participant_id,score,lower,upper\n";
    if (r.sus) {
        for (const auto& [id, v] : r.sus->scores) sus += id + "," + c6(v) + ",,\n";
        sus += "mean," + c6(r.sus->mean) + "," + (r.sus->interval ? c6(r.sus->interval->lower) : "") + "," +
               (r.sus->interval ? c6(r.sus->interval->upper) : "") + "\n";
    }
    files["sus.csv"] = sus;
    return files;
}

inline std::string render_markdown(const EvalReport& r) {
    using namespace detail;
    std::string md = "# Evaluation report: " + r.dataset_id + "\n\n";
    md += "Generated by mammo-eval " + r.tool_version + ". Rates with 95% exact intervals as `rate (lower - upper)`.\n\n";

    md += "## Detection\n\n";
    md += "| Condition | Positives | AUROC | PPV | NPV | Sensitivity | Specificity |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& d : r.detection_rows) {
        const auto* rt = d.rates ? &*d.rates : nullptr;
        md += "| " + d.condition + " | " + std::to_string(d.positives) + "/" +
              std::to_string(d.positives + d.negatives) + " | " + md_ci(d.auroc) + " | " +
              (rt ? md_ci(rt->ppv) : "-") + " | " + (rt ? md_ci(rt->npv) : "-") + " | " +
              (rt ? md_ci(rt->sensitivity) : "-") + " | " + (rt ? md_ci(rt->specificity) : "-") + " |\n";
    }

    md += "\n## Localization\n\n";
    md += "| Condition | Lesions | LLF | NLF | NLF per case | Mean IoGT | Mean IoHM |\n";
    md += "|---|---|---|---|---|---|---|\n";
    for (const auto& l : r.localization_rows) {
        const auto& s = l.summary;
        md += "| " + l.condition + " | " + std::to_string(s.lesions) + " | " + md_ci(s.llf) + " | " + md_ci(s.nlf) +
              " | " + fixed(s.nlf_per_case, 3) + " | " +
              (l.overlap.mean_iogt ? fixed(*l.overlap.mean_iogt, 3) : "-") + " | " +
              (l.overlap.mean_iohm ? fixed(*l.overlap.mean_iohm, 3) : "-") + " |\n";
    }

    md += "\n## Concordance\n\n";
    if (!r.concordance_rows) {
        md += "_Not available: no concordance records._\n";
    } else {
        md += "| Dimension | Agree | Edit | Add | Reject | Concordant | Rate |\n";
        md += "|---|---|---|---|---|---|---|\n";
        for (const auto& c : *r.concordance_rows) {
            const auto& s = c.summary;
            auto count = [&](ConcordanceCategory k) {
                auto it = s.counts.find(k);
                return std::to_string(it == s.counts.end() ? 0 : it->second);
            };
            md += "| " + c.dimension + " | " + count(ConcordanceCategory::Agree) + " | " +
                  count(ConcordanceCategory::Edit) + " | " + count(ConcordanceCategory::Add) + " | " +
                  count(ConcordanceCategory::Reject) + " | " + std::to_string(s.concordant) + "/" +
                  std::to_string(s.total) + " | " + md_ci(std::optional<BinomialCI>(s.rate)) + " |\n";
        }
    }

    md += "\n## Acceptance\n\n";
    if (!r.acceptance) {
        md += "_Not available: no reviews._\n";
    } else {
        const auto& a = *r.acceptance;
        md += "| Reviewer | 1 | 2 | 3 | 4 | Auto-accepted | Accepted | Rate |\n";
        md += "|---|---|---|---|---|---|---|---|\n";
        for (const auto& rv : a.reviewers) {
            md += "| " + rv.reviewer_id;
            for (int g = 1; g <= 4; ++g) {
                auto it = rv.grade_counts.find(g);
                md += " | " + std::to_string(it == rv.grade_counts.end() ? 0 : it->second);
            }
            md += " | " + std::to_string(a.auto_accepted) + " | " + std::to_string(rv.accepted) + "/" +
                  std::to_string(a.total_cases) + " | " + fixed(rv.rate, 3) + " |\n";
        }
        md += "| Mean";
        for (int g = 1; g <= 4; ++g) {
            auto it = a.mean_grade_counts.find(g);
            md += " | " + fixed(it == a.mean_grade_counts.end() ? 0.0 : it->second, 1);
        }
        Interval mean_ci = a.interval;
        md += " | " + std::to_string(a.auto_accepted) + " | " + fixed(a.mean_accepted, 1) + "/" +
              std::to_string(a.total_cases) + " | " + md_ci(mean_ci) + " |\n";
    }

    md += "\n## System usability\n\n";
    if (!r.sus) {
        md += "_Not available: no questionnaire responses._\n";
    } else {
        md += "| Participants | Mean SUS | 95% interval |\n|---|---|---|\n";
        md += "| " + std::to_string(r.sus->scores.size()) + " | " + fixed(r.sus->mean, 2) + " | " +
              (r.sus->interval ? "(" + fixed(r.sus->interval->lower, 2) + " - " + fixed(r.sus->interval->upper, 2) + ")"
                               : "-") +
              " |\n";
    }

    md += "\n## Configuration\n\n```json\n" + r.config_snapshot.dump(2) + "\n```\n";
    return md;
}

/// Writes the files for `format` into `out_dir`, each one atomically.
inline std::vector<fs::path> write_report(const EvalReport& r, ReportFormat format, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) fail(ErrorCode::IoFailure, "cannot create " + out_dir.string());
    std::vector<fs::path> written;
    auto put = [&](const std::string& name, const std::string& bytes) {
        write_file_atomic(out_dir / name, bytes);
        written.push_back(out_dir / name);
    };
    switch (format) {
    case ReportFormat::Csv:
        for (const auto& [name, bytes] : render_csv(r)) put(name, bytes);
        break;
    case ReportFormat::Markdown: put("report.md", render_markdown(r)); break;
    case ReportFormat::Json: put("report.json", report_to_json(r).dump(2) + "\n"); break;
    }
    return written;
}

inline std::vector<fs::path> write_report_all(const EvalReport& r, const fs::path& out_dir) {
    std::vector<fs::path> all;
    for (auto f : {ReportFormat::Csv, ReportFormat::Markdown, ReportFormat::Json}) {
        auto w = write_report(r, f, out_dir);
        all.insert(all.end(), w.begin(), w.end());
    }
    return all;
}

inline EvalReport load_report(const fs::path& path) {
    try {
        return report_from_json(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

}  // namespace mammo
