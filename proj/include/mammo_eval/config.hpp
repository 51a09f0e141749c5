#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>

#include "json.hpp"

#include "mammo_eval/error.hpp"
#include "mammo_eval/fs_util.hpp"
#include "mammo_eval/preprocess.hpp"

namespace mammo {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunConfig {
    fs::path manifest;
    fs::path store = "store";
    fs::path out;

    PreprocessConfig preprocess;

    double binarize_threshold = 0.5;
    double hit_threshold = 0.5;
    double fp_threshold = 0.25;
    double concordance_overlap = 0.5;
    std::optional<double> operating_point;

    int bootstrap_reps = 2000;
    std::uint64_t seed = 0;
    double level = 0.95;

    int jobs = 1;
    int port = 8080;
    bool blinded = false;
};

inline void validate_config(const RunConfig& c) {
    auto unit = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            fail(ErrorCode::ValidationFailed, std::string(name) + " must lie in [0,1]");
    };
    unit(c.binarize_threshold, "thresholds.binarize");
    unit(c.hit_threshold, "thresholds.hit");
    unit(c.fp_threshold, "thresholds.fp");
    unit(c.concordance_overlap, "thresholds.concordance");
    if (c.operating_point) unit(*c.operating_point, "thresholds.operating_point");
    if (!(c.level > 0 && c.level < 1)) fail(ErrorCode::ValidationFailed, "bootstrap.level must lie in (0,1)");
    if (c.bootstrap_reps < 0) fail(ErrorCode::ValidationFailed, "bootstrap.reps must be >= 0");
    if (c.jobs < 1) fail(ErrorCode::ValidationFailed, "jobs must be >= 1");
    if (c.preprocess.closing_radius < 0) fail(ErrorCode::ValidationFailed, "preprocess.closing_radius must be >= 0");
    if (c.preprocess.max_input < 1) fail(ErrorCode::ValidationFailed, "preprocess.max_input must be >= 1");
}

/// Everything that influences numeric output. Paths and scheduling are left out.
inline nlohmann::json config_snapshot(const RunConfig& c) {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["preprocess"] = {{"cutoff", c.preprocess.cutoff},
                       {"connectivity", static_cast<int>(c.preprocess.connectivity)},
                       {"closing_radius", c.preprocess.closing_radius},
                       {"max_input", c.preprocess.max_input}};
    j["thresholds"] = {{"binarize", c.binarize_threshold},
                       {"hit", c.hit_threshold},
                       {"fp", c.fp_threshold},
                       {"concordance", c.concordance_overlap},
                       {"operating_point", c.operating_point ? nlohmann::json(*c.operating_point) : nlohmann::json()}};
    j["bootstrap"] = {{"reps", c.bootstrap_reps}, {"seed", c.seed}, {"level", c.level}};
    return j;
}

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

}  // namespace detail

/// Flat TOML subset: `[section]` headers, `key = value` lines, `#` comments.
/// Values are quoted strings, numbers, or true/false. Returns dotted keys.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string raw, section;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = detail::trim(detail::strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": bad section");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": expected key = value");
        auto key = detail::trim(line.substr(0, eq));
        auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorCode::ParseError, "config line " + std::to_string(lineno) + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "config key " + key + ": expected a number, got '" + v + "'");
    }
}

inline long long to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "config key " + key + ": expected an integer, got '" + v + "'");
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(ErrorCode::ParseError, "config key " + key + ": expected true or false");
}

}  // namespace detail

inline void apply_key_values(RunConfig& c, const std::map<std::string, std::string>& kv) {
    using namespace detail;
    for (const auto& [k, v] : kv) {
        if (k == "manifest") c.manifest = v;
        else if (k == "store") c.store = v;
        else if (k == "out") c.out = v;
        else if (k == "jobs") c.jobs = static_cast<int>(to_int(k, v));
        else if (k == "seed" || k == "bootstrap.seed") c.seed = static_cast<std::uint64_t>(to_int(k, v));
        else if (k == "bootstrap.reps") c.bootstrap_reps = static_cast<int>(to_int(k, v));
        else if (k == "bootstrap.level") c.level = to_double(k, v);
        else if (k == "preprocess.cutoff") c.preprocess.cutoff = static_cast<int>(to_int(k, v));
        else if (k == "preprocess.closing_radius") c.preprocess.closing_radius = static_cast<int>(to_int(k, v));
        else if (k == "preprocess.max_input") c.preprocess.max_input = static_cast<int>(to_int(k, v));
        else if (k == "preprocess.connectivity") {
            const auto n = to_int(k, v);
            if (n != 4 && n != 8) fail(ErrorCode::ValidationFailed, "preprocess.connectivity must be 4 or 8");
            c.preprocess.connectivity = n == 4 ? Connectivity::Four : Connectivity::Eight;
        }
        else if (k == "thresholds.binarize") c.binarize_threshold = to_double(k, v);
        else if (k == "thresholds.hit") c.hit_threshold = to_double(k, v);
        else if (k == "thresholds.fp") c.fp_threshold = to_double(k, v);
        else if (k == "thresholds.concordance") c.concordance_overlap = to_double(k, v);
        else if (k == "thresholds.operating_point") c.operating_point = to_double(k, v);
        else if (k == "service.port") c.port = static_cast<int>(to_int(k, v));
        else if (k == "service.blinded") c.blinded = to_bool(k, v);
        else fail(ErrorCode::ValidationFailed, "unknown config key '" + k + "'");
    }
}

inline RunConfig load_config(const fs::path& path, RunConfig base = {}) {
    apply_key_values(base, parse_key_values(read_text_file(path)));
    validate_config(base);
    return base;
}

}  // namespace mammo
