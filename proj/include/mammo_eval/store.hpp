#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "mammo_eval/baseline.hpp"
#include "mammo_eval/config.hpp"
#include "mammo_eval/image_io.hpp"
#include "mammo_eval/inference.hpp"
#include "mammo_eval/manifest.hpp"
#include "mammo_eval/parallel.hpp"
#include "mammo_eval/preprocess.hpp"
#include "mammo_eval/report.hpp"
#include "mammo_eval/study.hpp"

namespace mammo {

/// Directory-tree store:
///   cases.json                      ingested manifest (absolute image paths)
///   preprocessed/<case>/            canonical views, masks, transforms
///   bundles/<case>/                 prediction bundles
///   eval/                           assessments.json, report.json
///   concordance.jsonl               automatic concordance per case
///   reviews.jsonl, sus.csv          reader-study logs (service)
class Store {
public:
    explicit Store(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }
    fs::path cases_path() const { return root_ / "cases.json"; }
    fs::path preprocessed_dir(const std::string& id) const { return root_ / "preprocessed" / id; }
    fs::path bundle_dir(const std::string& id) const { return root_ / "bundles" / id; }
    fs::path eval_dir() const { return root_ / "eval"; }
    fs::path concordance_path() const { return root_ / "concordance.jsonl"; }
    fs::path reviews_path() const { return root_ / "reviews.jsonl"; }
    fs::path sus_path() const { return root_ / "sus.csv"; }

    bool ingested() const { return fs::exists(cases_path()); }

    Manifest load_cases() const {
        if (!ingested()) fail(ErrorCode::StoreNotFound, "no ingested cases in store " + root_.string());
        return load_manifest(cases_path(), false);
    }

private:
    fs::path root_;
};

struct StageOptions {
    bool force = false;
    bool keep_going = false;
    int jobs = 1;
};

struct StageFailure {
    std::string case_id;
    ErrorCode code = ErrorCode::ValidationFailed;
    std::string message;
};

struct StageResult {
    std::string stage;
    std::size_t processed = 0;
    std::size_t skipped = 0;
    std::vector<StageFailure> failures;
    bool ok() const { return failures.empty(); }
};

namespace detail {

inline nlohmann::json provenance(const RunConfig& cfg, const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j = extra;
    j["config"] = config_snapshot(cfg);
    return j;
}

/// Provenance restricted to the config sections a stage depends on.
inline nlohmann::json provenance_of(const RunConfig& cfg, std::initializer_list<const char*> sections,
                                    const nlohmann::json& extra) {
    const auto snap = config_snapshot(cfg);
    nlohmann::json j = extra;
    j["config"] = {{"tool_version", snap.at("tool_version")}};
    for (const char* s : sections) j["config"][s] = snap.at(s);
    return j;
}

/// True when `path` exists and holds exactly `expected` (parsed as JSON).
inline bool provenance_matches(const fs::path& path, const nlohmann::json& expected) {
    if (!fs::exists(path)) return false;
    try {
        return nlohmann::json::parse(read_text_file(path)) == expected;
    } catch (const std::exception&) {
        return false;
    }
}

/// Runs `work(case)` per case in parallel; returns true when the case was
/// processed, false when skipped. Without keep_going the first failure in
/// case order is rethrown with case context.
template <class Work>
StageResult run_per_case(const std::string& stage, const std::vector<Case>& cases, const StageOptions& opt,
                         Work&& work) {
    StageResult res;
    res.stage = stage;
    std::vector<int> status(cases.size(), -1);  // -1 not run, 0 skipped, 1 processed, 2 failed
    std::vector<StageFailure> fails(cases.size());
    parallel_for(cases.size(), opt.jobs, [&](std::size_t i) {
        try {
            status[i] = work(cases[i]) ? 1 : 0;
            return true;
        } catch (const Error& e) {
            fails[i] = {cases[i].case_id, e.code(), e.message()};
        } catch (const std::exception& e) {
            fails[i] = {cases[i].case_id, ErrorCode::IoFailure, e.what()};
        }
        status[i] = 2;
        return opt.keep_going;
    });
    for (std::size_t i = 0; i < cases.size(); ++i) {
        if (status[i] == 1) ++res.processed;
        if (status[i] == 0) ++res.skipped;
        if (status[i] == 2) {
            if (!opt.keep_going)
                fail(fails[i].code, stage + ": case " + fails[i].case_id + ": " + fails[i].message);
            res.failures.push_back(fails[i]);
        }
    }
    return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

inline StageResult stage_ingest(const Store& store, const fs::path& manifest, const StageOptions& opt = {}) {
    StageResult res;
    res.stage = "ingest";
    if (store.ingested() && !opt.force) {
        res.skipped = 1;
        return res;
    }
    const auto m = load_manifest(manifest);
    fs::create_directories(store.root());
    save_manifest(store.cases_path(), m);
    res.processed = m.cases.size();
    return res;
}

inline PreprocessConfig case_preprocess_config(const Case& c, const RunConfig& cfg) {
    PreprocessConfig pc = cfg.preprocess;
    if (c.max_input) pc.max_input = *c.max_input;
    return pc;
}

inline StageResult stage_preprocess(const Store& store, const RunConfig& cfg, const StageOptions& opt = {}) {
    const auto m = store.load_cases();
    return detail::run_per_case("preprocess", m.cases, opt, [&](const Case& c) {
        const auto dir = store.preprocessed_dir(c.case_id);
        const auto pc = case_preprocess_config(c, cfg);
        const auto prov = detail::provenance_of(cfg, {"preprocess"}, {{"max_input", pc.max_input}});
        bool complete = true;
        for (auto v : kAllViews) complete &= fs::exists(dir / (std::string(to_string(v)) + "_transform.json"));
        if (!opt.force && complete && detail::provenance_matches(dir / "provenance.json", prov)) return false;
        for (auto v : kAllViews) {
            const auto& ref = c.views.at(v);
            write_preprocessed(dir, preprocess_view(read_image(ref.path), v, pc));
        }
        write_file_atomic(dir / "provenance.json", prov.dump(2) + "\n");
        return true;
    });
}

struct BaselineSource {};
struct BundleSource {
    fs::path dir;  ///< contains one sub-directory per case id
};
using InferSource = std::variant<BaselineSource, BundleSource>;

inline StageResult stage_infer(const Store& store, const InferSource& source, const RunConfig& cfg,
                               const StageOptions& opt = {}) {
    const auto m = store.load_cases();
    return detail::run_per_case("infer", m.cases, opt, [&](const Case& c) {
        const auto dir = store.bundle_dir(c.case_id);
        const bool baseline = std::holds_alternative<BaselineSource>(source);
        const auto prov = detail::provenance_of(cfg, {"preprocess"}, {{"source", baseline ? "baseline" : "bundle"}});
        if (!opt.force && fs::exists(dir / "scores.json") && detail::provenance_matches(dir / "provenance.json", prov))
            return false;
        PredictionBundle b;
        b.case_id = c.case_id;
        if (baseline) {
            for (auto v : kAllViews)
                b.merge(baseline_detect(read_preprocessed(store.preprocessed_dir(c.case_id), v), {}, c.case_id));
        } else {
            b = load_bundle(std::get<BundleSource>(source).dir / c.case_id, c.case_id);
        }
        validate_bundle(b);
        std::error_code ec;
        fs::remove_all(dir / "maps", ec);
        save_bundle(dir, b);
        write_file_atomic(dir / "provenance.json", prov.dump(2) + "\n");
        return true;
    });
}

/// Cases with lesions moved into the canonical frame, plus assessments.
struct Evaluation {
    std::string dataset_id;
    std::vector<Case> cases;  ///< sorted by case id
    std::map<std::string, CaseAssessment> assessments;
};

inline Case canonical_case(const Store& store, Case c) {
    std::map<ViewLabel, TransformRecord> transforms;
    for (auto& l : c.gt_lesions) {
        if (l.region.frame == Frame::Canonical) continue;
        auto it = transforms.find(l.view);
        if (it == transforms.end()) {
            const auto p = store.preprocessed_dir(c.case_id) / (std::string(to_string(l.view)) + "_transform.json");
            it = transforms.emplace(l.view, transform_from_json(nlohmann::json::parse(read_text_file(p)))).first;
        }
        l.region = transform_region(l.region, it->second);
    }
    return c;
}

inline Evaluation load_evaluation(const Store& store, const RunConfig& cfg, int jobs = 1) {
    auto m = store.load_cases();
    std::sort(m.cases.begin(), m.cases.end(), [](const Case& a, const Case& b) { return a.case_id < b.case_id; });
    Evaluation ev;
    ev.dataset_id = m.dataset_id;
    ev.cases.resize(m.cases.size());
    std::vector<CaseAssessment> out(m.cases.size());
    BinarizeConfig bc;
    bc.threshold = cfg.binarize_threshold;
    StageOptions opt;
    opt.jobs = jobs;
    detail::run_per_case("evaluate", m.cases, opt, [&](const Case& c) {
        const auto i = static_cast<std::size_t>(&c - m.cases.data());
        ev.cases[i] = canonical_case(store, c);
        const auto dir = store.bundle_dir(c.case_id);
        if (!fs::exists(dir / "scores.json")) fail(ErrorCode::MissingAssessment, "no prediction bundle");
        out[i] = aggregate_case(load_bundle(dir, c.case_id), bc);
        return true;
    });
    for (auto& a : out) ev.assessments.emplace(a.case_id, std::move(a));
    return ev;
}

inline nlohmann::json assessment_to_json(const CaseAssessment& a) {
    nlohmann::json breasts = nlohmann::json::object();
    for (const auto& [slot, s] : a.breast_scores)
        breasts[std::string(to_string(slot.first))][std::string(to_string(slot.second))] = s;
    nlohmann::json benign = nlohmann::json::object();
    for (const auto& [slot, s] : a.benign_display_scores)
        benign[std::string(to_string(slot.first))][std::string(to_string(slot.second))] = s;
    nlohmann::json blobs = nlohmann::json::array();
    for (const auto& b : a.blobs) {
        std::uint32_t lo = b.pixels.empty() ? 0 : b.pixels.front(), hi = b.pixels.empty() ? 0 : b.pixels.back();
        blobs.push_back({{"view", to_string(b.view)},
                         {"category", to_string(b.category)},
                         {"suspicious", b.suspicious},
                         {"source", to_string(b.source)},
                         {"pixels", b.pixels.size()},
                         {"peak_score", b.peak_score},
                         {"first_pixel", lo},
                         {"last_pixel", hi}});
    }
    return {{"case_id", a.case_id},
            {"cancer_score", a.cancer_score},
            {"breast_scores", breasts},
            {"benign_display_scores", benign},
            {"blobs", blobs}};
}

inline StageResult stage_evaluate(const Store& store, const RunConfig& cfg, const StageOptions& opt = {}) {
    StageResult res;
    res.stage = "evaluate";
    const auto dir = store.eval_dir();
    const auto prov = detail::provenance(cfg);
    if (!opt.force && fs::exists(dir / "report.json") && fs::exists(dir / "assessments.json") &&
        detail::provenance_matches(dir / "provenance.json", prov)) {
        res.skipped = 1;
        return res;
    }
    const auto ev = load_evaluation(store, cfg, opt.jobs);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : ev.cases) arr.push_back(assessment_to_json(ev.assessments.at(c.case_id)));
    const nlohmann::json doc = {{"dataset_id", ev.dataset_id}, {"config", config_snapshot(cfg)}, {"assessments", arr}};
    write_file_atomic(dir / "assessments.json", doc.dump(2) + "\n");

    ReportInputs in;
    in.dataset_id = ev.dataset_id;
    in.cases = ev.cases;
    in.assessments = ev.assessments;
    write_report(build_report(in, cfg), ReportFormat::Json, dir);
    write_file_atomic(dir / "provenance.json", prov.dump(2) + "\n");
    res.processed = ev.cases.size();
    return res;
}

inline std::vector<ConcordanceRecord> compute_concordance(const Evaluation& ev, const RunConfig& cfg) {
    std::vector<ConcordanceRecord> out;
    for (const auto& c : ev.cases)
        out.push_back(case_concordance(c, ev.assessments.at(c.case_id), cfg.concordance_overlap, cfg.fp_threshold));
    return out;
}

inline std::vector<ConcordanceRecord> read_concordance(const fs::path& path) {
    std::vector<ConcordanceRecord> out;
    if (!fs::exists(path)) return out;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(concordance_record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, path.string() + ": " + e.what());
        }
    }
    return out;
}

inline StageResult stage_concordance(const Store& store, const RunConfig& cfg, const StageOptions& opt = {}) {
    StageResult res;
    res.stage = "concordance";
    if (!opt.force && fs::exists(store.concordance_path())) {
        res.skipped = 1;
        return res;
    }
    const auto ev = load_evaluation(store, cfg, opt.jobs);
    std::string text;
    for (const auto& r : compute_concordance(ev, cfg)) text += concordance_record_to_json(r).dump() + "\n";
    write_file_atomic(store.concordance_path(), text);
    res.processed = ev.cases.size();
    return res;
}

inline std::vector<ReviewRecord> read_reviews(const fs::path& path) {
    if (!fs::exists(path)) return {};
    return parse_review_log(read_text_file(path));
}

inline std::vector<SusResponse> read_sus(const fs::path& path) {
    if (!fs::exists(path)) return {};
    return parse_sus_csv(read_text_file(path));
}

/// Full report from the store: metrics plus whatever study logs exist.
inline EvalReport store_report(const Store& store, const RunConfig& cfg, int jobs = 1) {
    const auto ev = load_evaluation(store, cfg, jobs);
    ReportInputs in;
    in.dataset_id = ev.dataset_id;
    in.cases = ev.cases;
    in.assessments = ev.assessments;
    in.concordance = read_concordance(store.concordance_path());
    in.reviews = read_reviews(store.reviews_path());
    in.sus = read_sus(store.sus_path());
    return build_report(in, cfg);
}

inline StageResult stage_report(const Store& store, const RunConfig& cfg, const fs::path& out_dir,
                                const StageOptions& opt = {}) {
    StageResult res;
    res.stage = "report";
    write_report_all(store_report(store, cfg, opt.jobs), out_dir);
    res.processed = 1;
    return res;
}

}  // namespace mammo
