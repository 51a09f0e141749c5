#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "mammo_eval/error.hpp"
#include "mammo_eval/stats.hpp"

namespace mammo {

struct RocPoint {
    double fpr = 0;
    double tpr = 0;
    double threshold = 0;  ///< predict positive iff score >= threshold
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// Starts at (0, 0) with threshold +inf and ends at (1, 1).
struct RocCurve {
    std::vector<RocPoint> points;
    friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::int64_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Point estimate with a two-sided interval.
struct Interval {
    double estimate = 0;
    double lower = 0;
    double upper = 0;
    double level = 0.95;
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct BinomialCI : Interval {
    std::int64_t successes = 0;
    std::int64_t trials = 0;
    friend bool operator==(const BinomialCI&, const BinomialCI&) = default;
};

struct OperatingPoint {
    double threshold = 0;
    double fpr = 0;
    double tpr = 0;
    double youden = 0;
    friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

struct DetectionRates {
    ConfusionCounts counts;
    std::optional<BinomialCI> sensitivity;
    std::optional<BinomialCI> specificity;
    std::optional<BinomialCI> ppv;
    std::optional<BinomialCI> npv;
    friend bool operator==(const DetectionRates&, const DetectionRates&) = default;
};

namespace detail {

inline void check_two_class(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) fail(ErrorCode::ValidationFailed, "scores and labels differ in length");
    const auto pos = std::count(labels.begin(), labels.end(), true);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
        fail(ErrorCode::DegenerateLabels, "ROC analysis needs at least one positive and one negative");
}

}  // namespace detail

/// Threshold sweep over distinct scores in descending order; tied scores move
/// the curve diagonally in one step.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels) {
    detail::check_two_class(scores, labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
    const double neg = static_cast<double>(labels.size()) - pos;
    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]])
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.points.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos, s});
    }
    return curve;
}

/// Trapezoidal area under the curve.
inline double auroc(const RocCurve& curve) {
    double area = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2;
    }
    return area;
}

inline double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    return auroc(roc_curve(scores, labels));
}

/// Exact (Clopper-Pearson) binomial interval from Beta quantiles.
inline BinomialCI clopper_pearson(std::int64_t successes, std::int64_t trials, double level = 0.95) {
    if (trials < 1 || successes < 0 || successes > trials)
        fail(ErrorCode::InvalidCounts,
             "invalid binomial counts " + std::to_string(successes) + "/" + std::to_string(trials));
    if (!(level > 0 && level < 1)) fail(ErrorCode::InvalidCounts, "confidence level must be in (0,1)");
    const double alpha = 1 - level;
    const auto x = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    BinomialCI ci;
    ci.successes = successes;
    ci.trials = trials;
    ci.level = level;
    ci.estimate = x / n;
    ci.lower = successes == 0 ? 0.0 : stats::inverse_incomplete_beta(x, n - x + 1, alpha / 2);
    ci.upper = successes == trials ? 1.0 : stats::inverse_incomplete_beta(x + 1, n - x, 1 - alpha / 2);
    ci.lower = std::min(ci.lower, ci.estimate);
    ci.upper = std::max(ci.upper, ci.estimate);
    return ci;
}

/// Maximizes Youden's J = tpr - fpr; ties go to lower fpr, then lower threshold.
inline OperatingPoint optimal_operating_point(const RocCurve& curve) {
    if (curve.points.empty()) fail(ErrorCode::ValidationFailed, "empty ROC curve");
    const RocPoint* best = &curve.points.front();
    auto j = [](const RocPoint& p) { return p.tpr - p.fpr; };
    for (const auto& p : curve.points) {
        const double dj = j(p) - j(*best);
        if (dj > 1e-12 || (std::abs(dj) <= 1e-12 && (p.fpr < best->fpr ||
                                                     (p.fpr == best->fpr && p.threshold < best->threshold))))
            best = &p;
    }
    return {best->threshold, best->fpr, best->tpr, j(*best)};
}

inline ConfusionCounts confusion_counts(const std::vector<double>& scores, const std::vector<bool>& labels,
                                        double threshold) {
    if (scores.size() != labels.size()) fail(ErrorCode::ValidationFailed, "scores and labels differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (labels[i])
            (predicted ? c.tp : c.fn) += 1;
        else
            (predicted ? c.fp : c.tn) += 1;
    }
    return c;
}

/// Sens/Spec/PPV/NPV each with its own exact interval; a rate whose
/// denominator is zero is left empty rather than reported as 0.
inline DetectionRates rates_from_counts(const ConfusionCounts& c, double level = 0.95) {
    DetectionRates r;
    r.counts = c;
    auto rate = [level](std::int64_t num, std::int64_t den) -> std::optional<BinomialCI> {
        if (den == 0) return std::nullopt;
        return clopper_pearson(num, den, level);
    };
    r.sensitivity = rate(c.tp, c.tp + c.fn);
    r.specificity = rate(c.tn, c.tn + c.fp);
    r.ppv = rate(c.tp, c.tp + c.fp);
    r.npv = rate(c.tn, c.tn + c.fn);
    return r;
}

inline DetectionRates confusion_and_rates(const std::vector<double>& scores, const std::vector<bool>& labels,
                                          double threshold, double level = 0.95) {
    return rates_from_counts(confusion_counts(scores, labels, threshold), level);
}

/// Percentile bootstrap over cases. Resamples that contain a single class are
/// skipped; if every resample is degenerate the interval collapses to the
/// point estimate.
inline Interval bootstrap_auroc_ci(const std::vector<double>& scores, const std::vector<bool>& labels, int reps,
                                   std::uint64_t seed, double level = 0.95) {
    detail::check_two_class(scores, labels);
    Interval out;
    out.level = level;
    out.estimate = auroc(scores, labels);
    const std::size_t n = scores.size();
    std::vector<double> replicates;
    replicates.reserve(static_cast<std::size_t>(std::max(reps, 0)));
    std::vector<double> s(n);
    std::vector<bool> l(n);
    for (int r = 0; r < reps; ++r) {
        auto rng = stats::SplitMix64::stream(seed, static_cast<std::uint64_t>(r));
        std::size_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = rng.below(n);
            s[i] = scores[k];
            l[i] = labels[k];
            pos += labels[k] ? 1 : 0;
        }
        if (pos == 0 || pos == n) continue;
        replicates.push_back(auroc(s, l));
    }
    if (replicates.empty()) {
        out.lower = out.upper = out.estimate;
        return out;
    }
    const double alpha = 1 - level;
    out.lower = stats::quantile(replicates, alpha / 2);
    out.upper = stats::quantile(replicates, 1 - alpha / 2);
    return out;
}

}  // namespace mammo
