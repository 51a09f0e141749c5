#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "mammo_eval/image_io.hpp"
#include "mammo_eval/render.hpp"
#include "mammo_eval/report.hpp"
#include "mammo_eval/store.hpp"
#include "mammo_eval/study.hpp"

namespace mammo {

struct ServiceConfig {
    fs::path store = "store";
    std::string host = "127.0.0.1";
    int port = 8080;
    bool blinded = false;
    std::vector<std::string> reviewers;  ///< roster for a new session
    std::uint64_t seed = 0;              ///< queue shuffle seed for a new session
    fs::path static_dir;                 ///< built review UI, served at /
    RunConfig run;
};

/// Reads MMG_EVAL_STORE / MMG_EVAL_PORT when set.
inline void apply_service_env(ServiceConfig& cfg) {
    if (const char* s = std::getenv("MMG_EVAL_STORE"); s && *s) cfg.store = s;
    if (const char* p = std::getenv("MMG_EVAL_PORT"); p && *p) {
        try {
            cfg.port = std::stoi(p);
        } catch (const std::exception&) {
            fail(ErrorCode::Usage, std::string("MMG_EVAL_PORT is not a port number: ") + p);
        }
    }
}

struct Session {
    std::string session_id;
    std::vector<std::string> reviewers;
    std::uint64_t seed = 0;
};

inline nlohmann::json session_to_json(const Session& s) {
    return {{"session_id", s.session_id}, {"reviewers", s.reviewers}, {"seed", s.seed}};
}

inline Session session_from_json(const nlohmann::json& j) {
    return {j.at("session_id").get<std::string>(), j.at("reviewers").get<std::vector<std::string>>(),
            j.value("seed", std::uint64_t{0})};
}

/// Seeded Fisher-Yates shuffle of the case ids, distinct per reviewer.
inline std::vector<std::string> reviewer_queue(std::vector<std::string> ids, std::uint64_t seed,
                                               const std::string& reviewer) {
    std::sort(ids.begin(), ids.end());
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : reviewer) h = (h ^ ch) * 0x100000001b3ull;
    auto rng = stats::SplitMix64::stream(seed, h);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
    return ids;
}

/// Live study aggregates, recomputed from a snapshot of the review log.
inline nlohmann::json study_summary(const std::vector<std::string>& case_ids,
                                    const std::vector<ConcordanceRecord>& concordance,
                                    const std::vector<ReviewRecord>& reviews, double level = 0.95) {
    std::set<std::string> auto_ids;
    std::vector<ConcordanceCategory> cls, loc;
    for (const auto& r : concordance) {
        if (r.auto_accept()) auto_ids.insert(r.case_id);
        cls.push_back(r.classification);
        loc.push_back(r.localization);
    }
    const auto total = static_cast<std::int64_t>(case_ids.size());
    nlohmann::json j;
    j["total_cases"] = total;
    j["auto_accepted"] = auto_ids.size();
    j["review_records"] = reviews.size();
    j["acceptance"] = nullptr;
    if (total > 0) {
        std::vector<ReviewRecord> counted;
        for (const auto& r : reviews)
            if (!auto_ids.contains(r.case_id)) counted.push_back(r);
        j["acceptance"] = detail::acceptance_json(acceptance_rate(counted, auto_ids, total, level, false));
    }
    j["concordance"] = nullptr;
    if (!cls.empty())
        j["concordance"] = {{"classification", detail::concordance_summary_json(concordance_rate(cls, level))},
                            {"localization", detail::concordance_summary_json(concordance_rate(loc, level))}};
    return j;
}

namespace detail {

/// Appends one line and fsyncs before returning.
inline void append_durable(const fs::path& path, const std::string& line) {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) fail(ErrorCode::IoFailure, "cannot open " + path.string());
    std::size_t off = 0;
    while (off < line.size()) {
        const auto n = ::write(fd, line.data() + off, line.size() - off);
        if (n <= 0) {
            ::close(fd);
            fail(ErrorCode::IoFailure, "write failed on " + path.string());
        }
        off += static_cast<std::size_t>(n);
    }
    const bool synced = ::fsync(fd) == 0;
    ::close(fd);
    if (!synced) fail(ErrorCode::IoFailure, "fsync failed on " + path.string());
}

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline int http_status(ErrorCode c) {
    switch (c) {
    case ErrorCode::ValidationFailed:
    case ErrorCode::BadItemCount:
    case ErrorCode::BadItemValue: return 422;
    case ErrorCode::UnknownCase:
    case ErrorCode::UnknownView: return 404;
    case ErrorCode::UnknownReviewer: return 403;
    case ErrorCode::ParseError:
    case ErrorCode::Usage: return 400;
    default: return 500;
    }
}

}  // namespace detail

class StudyService {
public:
    struct Response {
        int status = 200;
        std::string content_type = "application/json";
        std::string body;
    };

    explicit StudyService(ServiceConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.store) {
        if (!fs::is_directory(store_.root()) || !store_.ingested())
            fail(ErrorCode::StoreNotFound, "no ingested store at " + store_.root().string());
        ev_ = load_evaluation(store_, cfg_.run, cfg_.run.jobs);
        for (const auto& c : ev_.cases) {
            ids_.push_back(c.case_id);
            index_[c.case_id] = &c - ev_.cases.data();
        }
        concordance_ = read_concordance(store_.concordance_path());
        if (concordance_.empty()) concordance_ = compute_concordance(ev_, cfg_.run);
        for (const auto& r : concordance_) concordance_by_case_[r.case_id] = r;

        const auto session_path = store_.root() / "session.json";
        if (fs::exists(session_path)) {
            session_ = session_from_json(nlohmann::json::parse(read_text_file(session_path)));
        } else {
            session_.session_id = ev_.dataset_id.empty() ? "session" : ev_.dataset_id + "-session";
            session_.reviewers = cfg_.reviewers.empty() ? std::vector<std::string>{"R1", "R2"} : cfg_.reviewers;
            session_.seed = cfg_.seed;
            write_file_atomic(session_path, session_to_json(session_).dump(2) + "\n");
        }
        reviews_ = read_reviews(store_.reviews_path());
        sus_ = read_sus(store_.sus_path());
    }

    const ServiceConfig& config() const { return cfg_; }
    const Session& session() const { return session_; }

    Response get_session() const {
        return json_ok({{"session_id", session_.session_id},
                        {"dataset_id", ev_.dataset_id},
                        {"reviewers", session_.reviewers},
                        {"blinded", cfg_.blinded}});
    }

    Response list_cases(const std::optional<std::string>& reviewer) const {
        return guarded([&] {
            std::vector<std::string> order = ids_;
            std::set<std::string> done;
            if (reviewer) {
                require_reviewer(*reviewer);
                order = reviewer_queue(ids_, session_.seed, *reviewer);
                std::shared_lock lock(mu_);
                for (const auto& r : reviews_)
                    if (r.reviewer_id == *reviewer) done.insert(r.case_id);
            }
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& id : order) {
                const auto& c = ev_.cases[index_.at(id)];
                const bool aa = auto_accepted(id);
                nlohmann::json item = {{"case_id", id},
                                       {"density", to_string(c.density)},
                                       {"cancer_score", ev_.assessments.at(id).cancer_score},
                                       {"auto_accept", aa}};
                if (!cfg_.blinded) item["birads"] = to_string(c.birads);
                if (reviewer) item["status"] = aa ? "auto" : done.contains(id) ? "done" : "pending";
                arr.push_back(item);
            }
            return json_ok(arr);
        });
    }

    Response get_case(const std::string& id) const {
        return guarded([&] {
            const auto& c = find_case(id);
            const auto& a = ev_.assessments.at(id);
            nlohmann::json j = assessment_to_json(a);
            j["density"] = to_string(c.density);
            j["views"] = nlohmann::json::array();
            for (auto v : kAllViews) j["views"].push_back(to_string(v));
            if (auto it = concordance_by_case_.find(id); it != concordance_by_case_.end())
                j["concordance"] = concordance_record_to_json(it->second);
            j["auto_accept"] = auto_accepted(id);
            j["blinded"] = cfg_.blinded;
            if (!cfg_.blinded) {
                j["truth"] = to_string(c.truth_label);
                j["birads"] = to_string(c.birads);
                j["report_findings"] = nlohmann::json::array();
                for (const auto& f : c.report_findings)
                    j["report_findings"].push_back({{"category", to_string(f.category)}, {"suspicious", f.suspicious}});
                j["lesions"] = c.gt_lesions.size();
            }
            return json_ok(j);
        });
    }

    Response overlay(const std::string& id, const std::string& view, const std::string& style,
                     const std::string& kind) const {
        return guarded([&] {
            find_case(id);
            const auto v = parse_view(view);
            if (!v) fail(ErrorCode::UnknownView, "unknown view '" + view + "'");
            const auto st = overlay_style_from_string(style.empty() ? "color" : style);
            const auto kd = blob_kind_from_string(kind.empty() ? "all" : kind);
            const auto pv = read_preprocessed(store_.preprocessed_dir(id), *v);
            std::vector<HeatmapBlob> blobs;
            for (const auto& b : ev_.assessments.at(id).blobs)
                if (b.view == *v) blobs.push_back(b);
            const auto png = encode_png(render_overlay(pv, blobs, st, kd));
            return Response{200, "image/png", std::string(png.begin(), png.end())};
        });
    }

    /// Durable-then-ack: the record is on disk before 201 is returned.
    Response submit_review(const std::string& body, const std::optional<std::string>& reviewer_header = {}) {
        return guarded([&] {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(body);
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCode::ValidationFailed, std::string("body is not JSON: ") + e.what());
            }
            if (!j.is_object()) fail(ErrorCode::ValidationFailed, "review must be a JSON object");
            if (!j.contains("reviewer_id") && reviewer_header) j["reviewer_id"] = *reviewer_header;
            if (!j.contains("timestamp")) j["timestamp"] = detail::utc_now();
            if (j.contains("case_id") && j["case_id"].is_string()) find_case(j["case_id"].get<std::string>());
            if (j.contains("reviewer_id") && j["reviewer_id"].is_string())
                require_reviewer(j["reviewer_id"].get<std::string>());
            const ReviewRecord rec = review_from_json(j);
            if (auto_accepted(rec.case_id))
                fail(ErrorCode::ValidationFailed, "case " + rec.case_id + " is auto-accepted and not open for review");
            std::unique_lock lock(mu_);
            detail::append_durable(store_.reviews_path(), review_to_json(rec).dump() + "\n");
            reviews_.push_back(rec);
            return Response{201, "application/json",
                            nlohmann::json{{"stored", true}, {"records", reviews_.size()}, {"review", review_to_json(rec)}}
                                .dump()};
        });
    }

    Response summary() const {
        return guarded([&] {
            std::vector<ReviewRecord> snapshot;
            {
                std::shared_lock lock(mu_);
                snapshot = reviews_;
            }
            return json_ok(study_summary(ids_, concordance_, snapshot, cfg_.run.level));
        });
    }

    Response get_sus() const {
        return guarded([&] {
            std::vector<SusResponse> snapshot;
            {
                std::shared_lock lock(mu_);
                snapshot = sus_;
            }
            nlohmann::json j = {{"responses", snapshot.size()}, {"summary", nullptr}};
            if (!snapshot.empty()) j["summary"] = detail::sus_json(sus_score(snapshot));
            return json_ok(j);
        });
    }

    Response submit_sus(const std::string& body) {
        return guarded([&] {
            SusResponse r;
            try {
                const auto j = nlohmann::json::parse(body);
                r.participant_id = j.at("participant_id").get<std::string>();
                r.items = j.at("items").get<std::vector<int>>();
            } catch (const nlohmann::json::exception& e) {
                fail(ErrorCode::ValidationFailed, std::string("malformed SUS response: ") + e.what());
            }
            if (r.participant_id.empty() || r.participant_id.find_first_of(",\n\r") != std::string::npos)
                fail(ErrorCode::ValidationFailed, "participant_id must be non-empty without commas or newlines");
            validate_sus(r);
            std::unique_lock lock(mu_);
            const bool fresh = !fs::exists(store_.sus_path());
            detail::append_durable(store_.sus_path(), (fresh ? sus_csv_header() : "") + sus_csv_line(r));
            sus_.push_back(r);
            return Response{201, "application/json",
                            nlohmann::json{{"stored", true}, {"responses", sus_.size()}}.dump()};
        });
    }

private:
    template <class F>
    static Response guarded(F&& f) {
        try {
            return f();
        } catch (const Error& e) {
            return {detail::http_status(e.code()), "application/json",
                    nlohmann::json{{"error", error_code_name(e.code())}, {"message", e.what()}}.dump()};
        }
    }

    static Response json_ok(const nlohmann::json& j) { return {200, "application/json", j.dump()}; }

    const Case& find_case(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) fail(ErrorCode::UnknownCase, "unknown case '" + id + "'");
        return ev_.cases[it->second];
    }

    void require_reviewer(const std::string& r) const {
        if (std::find(session_.reviewers.begin(), session_.reviewers.end(), r) == session_.reviewers.end())
            fail(ErrorCode::UnknownReviewer, "unknown reviewer '" + r + "'");
    }

    bool auto_accepted(const std::string& id) const {
        auto it = concordance_by_case_.find(id);
        return it != concordance_by_case_.end() && it->second.auto_accept();
    }

    ServiceConfig cfg_;
    Store store_;
    Evaluation ev_;
    std::vector<std::string> ids_;
    std::map<std::string, std::size_t> index_;
    std::vector<ConcordanceRecord> concordance_;
    std::map<std::string, ConcordanceRecord> concordance_by_case_;
    Session session_;

    mutable std::shared_mutex mu_;
    std::vector<ReviewRecord> reviews_;
    std::vector<SusResponse> sus_;
};

/// Routes the API onto an httplib server.
inline void bind_routes(httplib::Server& svr, StudyService& svc) {
    auto send = [](httplib::Response& res, const StudyService::Response& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    auto param = [](const httplib::Request& req, const char* key) -> std::string {
        return req.has_param(key) ? req.get_param_value(key) : std::string();
    };
    auto reviewer_header = [](const httplib::Request& req) -> std::optional<std::string> {
        if (req.has_header("X-Reviewer-Id")) return req.get_header_value("X-Reviewer-Id");
        return std::nullopt;
    };

    svr.Get("/api/session", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.get_session()); });
    svr.Get("/api/cases", [&svc, send, reviewer_header](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::string> reviewer;
        if (req.has_param("reviewer")) reviewer = req.get_param_value("reviewer");
        else reviewer = reviewer_header(req);
        send(res, svc.list_cases(reviewer));
    });
    svr.Get(R"(/api/cases/([^/]+))", [&svc, send](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.get_case(req.matches[1]));
    });
    svr.Get(R"(/api/cases/([^/]+)/views/([^/]+)/overlay)",
            [&svc, send, param](const httplib::Request& req, httplib::Response& res) {
                send(res, svc.overlay(req.matches[1], req.matches[2], param(req, "style"), param(req, "kind")));
            });
    svr.Post("/api/reviews", [&svc, send, reviewer_header](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.submit_review(req.body, reviewer_header(req)));
    });
    svr.Get("/api/summary", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.summary()); });
    svr.Get("/api/sus", [&svc, send](const httplib::Request&, httplib::Response& res) { send(res, svc.get_sus()); });
    svr.Post("/api/sus", [&svc, send](const httplib::Request& req, httplib::Response& res) {
        send(res, svc.submit_sus(req.body));
    });
    if (!svc.config().static_dir.empty() && fs::is_directory(svc.config().static_dir))
        svr.set_mount_point("/", svc.config().static_dir.string());
}

/// Binds the port (PortInUse on failure); `on_ready` runs after binding and
/// before the accept loop starts.
template <class OnReady>
void serve(StudyService& svc, httplib::Server& svr, OnReady&& on_ready) {
    bind_routes(svr, svc);
    const auto& cfg = svc.config();
    if (!svr.bind_to_port(cfg.host, cfg.port))
        fail(ErrorCode::PortInUse, "cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
    on_ready();
    svr.listen_after_bind();
}

}  // namespace mammo
