#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"

using testing_support::run_command;
using testing_support::slurp;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

testing_support::CommandResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), MAMMO_EVAL_BIN);
    return run_command(args);
}

std::string first_image(const fs::path& manifest, std::size_t case_index) {
    const auto doc = nlohmann::json::parse(slurp(manifest));
    const auto& views = doc["cases"][case_index]["views"];
    fs::path p = views["LCC"].is_string() ? views["LCC"].get<std::string>() : views["LCC"]["path"].get<std::string>();
    return p.is_absolute() ? p.string() : (manifest.parent_path() / p).string();
}

}  // namespace

TEST(Cli, InferNeedsExactlyOneSource) {
    TempDir tmp;
    const auto store = (tmp / "store").string();
    EXPECT_EQ(cli({"--store", store, "infer"}).exit_code, 2);
    EXPECT_EQ(cli({"--store", store, "infer", "--baseline", "--bundle", "x"}).exit_code, 2);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({"frobnicate"}).exit_code, 2);
    EXPECT_EQ(cli({}).exit_code, 2);
    EXPECT_EQ(cli({"ingest"}).exit_code, 2);
    EXPECT_EQ(cli({"--jobs", "0", "preprocess"}).exit_code, 2);
}

TEST(Cli, HelpAndVersionSucceed) {
    const auto help = cli({"--help"});
    EXPECT_EQ(help.exit_code, 0);
    EXPECT_NE(help.output.find("preprocess"), std::string::npos);
    EXPECT_EQ(cli({"--version"}).exit_code, 0);
}

TEST(Cli, MissingStoreIsAnError) {
    TempDir tmp;
    const auto r = cli({"--store", (tmp / "absent").string(), "preprocess"});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("StoreNotFound"), std::string::npos) << r.output;
}

TEST(Cli, BadManifestIsAnError) {
    TempDir tmp;
    { std::ofstream(tmp / "m.json") << "{ nope"; }
    const auto r = cli({"--store", (tmp / "store").string(), "ingest", "--manifest", (tmp / "m.json").string()});
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.output.find("ParseError"), std::string::npos) << r.output;
}

TEST(Cli, FullPipelineThenRerunSkips) {
    TempDir tmp;
    const auto manifest = testing_support::write_small_dataset(tmp / "data", 3).string();
    const auto store = (tmp / "store").string();
    const auto out = (tmp / "out").string();
    const std::vector<std::vector<std::string>> steps = {{"ingest", "--manifest", manifest},
                                                         {"preprocess"},
                                                         {"infer", "--baseline"},
                                                         {"evaluate"},
                                                         {"concordance"},
                                                         {"report", "--out", out}};
    for (const auto& s : steps) {
        std::vector<std::string> args = {"--store", store, "--bootstrap-reps", "50"};
        args.insert(args.end(), s.begin(), s.end());
        const auto r = cli(args);
        ASSERT_EQ(r.exit_code, 0) << s[0] << ": " << r.output;
    }
    for (const char* name : {"detection.csv", "localization.csv", "concordance.csv", "acceptance.csv", "sus.csv",
                             "report.json", "report.md"})
        EXPECT_TRUE(fs::exists(tmp / ("out/" + std::string(name)))) << name;

    const auto again = cli({"--store", store, "preprocess"});
    EXPECT_EQ(again.exit_code, 0);
    EXPECT_NE(again.output.find("0 processed, 3 skipped"), std::string::npos) << again.output;
    const auto forced = cli({"--store", store, "--force", "infer", "--baseline"});
    EXPECT_EQ(forced.exit_code, 0);
    EXPECT_NE(forced.output.find("3 processed"), std::string::npos) << forced.output;

    TempDir cfg_dir;
    { std::ofstream(cfg_dir / "run.toml") << "[bootstrap]\nreps = 7\n"; }
    const auto cfg_path = (cfg_dir / "run.toml").string();
    ASSERT_EQ(cli({"--store", store, "--config", cfg_path, "report", "--format", "json", "--out", out}).exit_code, 0);
    auto j = nlohmann::json::parse(slurp(tmp / "out/report.json"));
    EXPECT_EQ(j["config"]["bootstrap"]["reps"], 7);
    ASSERT_EQ(cli({"--store", store, "--config", cfg_path, "--bootstrap-reps", "9", "report", "--format", "json",
                   "--out", out})
                  .exit_code,
              0);
    j = nlohmann::json::parse(slurp(tmp / "out/report.json"));
    EXPECT_EQ(j["config"]["bootstrap"]["reps"], 9);
}

TEST(Cli, KeepGoingReportsEveryFailure) {
    TempDir tmp;
    const auto manifest = testing_support::write_small_dataset(tmp / "data", 3);
    const auto store = (tmp / "store").string();
    ASSERT_EQ(cli({"--store", store, "ingest", "--manifest", manifest.string()}).exit_code, 0);
    fs::remove(first_image(manifest, 1));
    fs::remove(first_image(manifest, 2));

    const auto stop = cli({"--store", store, "preprocess"});
    EXPECT_EQ(stop.exit_code, 1);
    EXPECT_NE(stop.output.find("IoFailure"), std::string::npos) << stop.output;

    const auto go = cli({"--store", store, "--keep-going", "preprocess"});
    EXPECT_EQ(go.exit_code, 1);
    EXPECT_NE(go.output.find("2 failed"), std::string::npos) << go.output;
}

TEST(Cli, SynthWritesManifest) {
    TempDir tmp;
    const auto r = cli({"--out", (tmp / "syn").string(), "synth"});
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto doc = nlohmann::json::parse(slurp(tmp / "syn/manifest.json"));
    EXPECT_EQ(doc["cases"].size(), 20u);
}
