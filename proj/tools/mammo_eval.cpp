#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mammo_eval/config.hpp"
#include "mammo_eval/report.hpp"
#include "mammo_eval/service.hpp"
#include "mammo_eval/store.hpp"
#include "mammo_eval/synthetic.hpp"

namespace {

using namespace mammo;

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct Flags {
    std::string config;
    std::string store;
    std::string manifest;
    std::string out;
    std::uint64_t seed = 0;
    int jobs = 1;
    int reps = 2000;
    double binarize = 0.5;
    double operating_point = 0.5;
    bool force = false;
    bool keep_going = false;

    bool baseline = false;
    std::string bundle;
    std::string format = "all";

    std::string host = "127.0.0.1";
    int port = 8080;
    bool blinded = false;
    std::vector<std::string> reviewers;
    std::string static_dir;
};

struct Given {
    CLI::Option* store = nullptr;
    CLI::Option* manifest = nullptr;
    CLI::Option* out = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* jobs = nullptr;
    CLI::Option* reps = nullptr;
    CLI::Option* binarize = nullptr;
    CLI::Option* operating_point = nullptr;
    CLI::Option* port = nullptr;
    CLI::Option* blinded = nullptr;
};

RunConfig resolve_config(const Flags& f, const Given& g) {
    RunConfig cfg;
    if (!f.config.empty()) apply_key_values(cfg, parse_key_values(read_text_file(f.config)));
    if (g.store->count()) cfg.store = f.store;
    if (g.manifest->count()) cfg.manifest = f.manifest;
    if (g.out->count()) cfg.out = f.out;
    if (g.seed->count()) cfg.seed = f.seed;
    if (g.jobs->count()) cfg.jobs = f.jobs;
    if (g.reps->count()) cfg.bootstrap_reps = f.reps;
    if (g.binarize->count()) cfg.binarize_threshold = f.binarize;
    if (g.operating_point->count()) cfg.operating_point = f.operating_point;
    validate_config(cfg);
    return cfg;
}

void print_stage(const StageResult& r) {
    std::cout << r.stage << ": " << r.processed << " processed, " << r.skipped << " skipped";
    if (!r.failures.empty()) std::cout << ", " << r.failures.size() << " failed";
    std::cout << "\n";
    for (const auto& f : r.failures)
        std::cerr << "  " << r.stage << ": case " << f.case_id << ": " << error_code_name(f.code) << ": " << f.message
                  << "\n";
}

int finish(const StageResult& r) {
    print_stage(r);
    return r.ok() ? 0 : kExitError;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Validation workbench for mammography CAD outputs", "mammo-eval"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    Given g;
    app.add_option("--config", f.config, "TOML-style key/value config file (flags override it)")
        ->check(CLI::ExistingFile);
    g.store = app.add_option("--store", f.store, "Store directory");
    g.seed = app.add_option("--seed", f.seed, "Bootstrap / shuffle seed");
    g.jobs = app.add_option("--jobs", f.jobs, "Parallel cases")->check(CLI::PositiveNumber);
    g.out = app.add_option("--out", f.out, "Output directory");
    g.reps = app.add_option("--bootstrap-reps", f.reps, "Bootstrap replicates");
    g.binarize = app.add_option("--heatmap-threshold", f.binarize, "Heatmap binarization threshold");
    g.operating_point = app.add_option("--operating-point", f.operating_point, "Fixed score threshold for rates");
    app.add_flag("--force", f.force, "Recompute outputs that already exist");
    app.add_flag("--keep-going", f.keep_going, "Continue past per-case failures and report them all");

    auto* synth = app.add_subcommand("synth", "Write the bundled 20-case synthetic dataset (needs --out)");
    auto* ingest = app.add_subcommand("ingest", "Validate a manifest and record it in the store");
    g.manifest = ingest->add_option("--manifest", f.manifest, "Dataset manifest (JSON)");
    auto* preprocess = app.add_subcommand("preprocess", "Canonicalize every view");
    auto* infer = app.add_subcommand("infer", "Produce prediction bundles");
    infer->add_flag("--baseline", f.baseline, "Run the built-in baseline detector");
    infer->add_option("--bundle", f.bundle, "Import bundles from <dir>/<case_id>/");
    auto* evaluate = app.add_subcommand("evaluate", "Aggregate bundles and compute metrics");
    auto* concordance = app.add_subcommand("concordance", "Automatic concordance per case");
    auto* report = app.add_subcommand("report", "Write report files (needs --out)");
    report->add_option("--format", f.format, "csv, markdown, json or all")
        ->check(CLI::IsMember({"csv", "markdown", "json", "all"}));
    auto* serve = app.add_subcommand("serve", "Run the reader-study HTTP service");
    serve->add_option("--host", f.host, "Listen address");
    g.port = serve->add_option("--port", f.port, "Listen port");
    g.blinded = serve->add_flag("--blinded", f.blinded, "Hide truth and report findings from reviewers");
    serve->add_option("--reviewers", f.reviewers, "Reviewer roster for a new session")->delimiter(',');
    serve->add_option("--static", f.static_dir, "Directory of built UI assets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        RunConfig cfg = resolve_config(f, g);
        StageOptions opt{f.force, f.keep_going, cfg.jobs};
        const Store store(cfg.store);

        if (synth->parsed()) {
            if (cfg.out.empty()) {
                std::cerr << "usage error: synth needs --out <dir>\n";
                return kExitUsage;
            }
            const auto path = synthetic::write_dataset(cfg.out, g.seed->count() ? cfg.seed : 7);
            std::cout << "synth: wrote " << path.string() << "\n";
            return 0;
        }
        if (ingest->parsed()) {
            if (cfg.manifest.empty()) {
                std::cerr << "usage error: ingest needs --manifest <path>\n";
                return kExitUsage;
            }
            return finish(stage_ingest(store, cfg.manifest, opt));
        }
        if (preprocess->parsed()) return finish(stage_preprocess(store, cfg, opt));
        if (infer->parsed()) {
            if (f.baseline == !f.bundle.empty()) {
                std::cerr << "usage error: infer takes exactly one of --baseline or --bundle <dir>\n";
                return kExitUsage;
            }
            const InferSource src = f.baseline ? InferSource{BaselineSource{}} : InferSource{BundleSource{f.bundle}};
            return finish(stage_infer(store, src, cfg, opt));
        }
        if (evaluate->parsed()) return finish(stage_evaluate(store, cfg, opt));
        if (concordance->parsed()) return finish(stage_concordance(store, cfg, opt));
        if (report->parsed()) {
            if (cfg.out.empty()) {
                std::cerr << "usage error: report needs --out <dir>\n";
                return kExitUsage;
            }
            const auto rep = store_report(store, cfg, cfg.jobs);
            if (f.format == "all")
                write_report_all(rep, cfg.out);
            else
                write_report(rep, report_format_from_string(f.format), cfg.out);
            std::cout << "report: wrote " << cfg.out.string() << "\n";
            return 0;
        }
        if (serve->parsed()) {
            ServiceConfig sc;
            sc.store = cfg.store;
            sc.port = cfg.port;
            sc.blinded = cfg.blinded;
            apply_service_env(sc);
            if (g.store->count()) sc.store = f.store;
            if (g.port->count()) sc.port = f.port;
            if (g.blinded->count()) sc.blinded = f.blinded;
            sc.host = f.host;
            sc.reviewers = f.reviewers;
            sc.seed = cfg.seed;
            sc.static_dir = f.static_dir;
            sc.run = cfg;
            StudyService svc(sc);
            httplib::Server svr;
            g_server = &svr;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            mammo::serve(svc, svr, [&] {
                std::cout << "serving " << sc.store.string() << " on http://" << sc.host << ":" << sc.port << "\n"
                          << std::flush;
            });
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::Usage ? kExitUsage : kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
